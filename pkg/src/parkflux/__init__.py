"""Parking on critical random trees: simulators, closed forms, and the
Monte Carlo harness that cross-checks them."""

from .distributions import (DistSpec, InvalidSpec, LawHandle, NotCritical,
                            OffspringReport, check_offspring, make_law, sample,
                            size_biased, thin)
from .trees import (BadNode, Delta1Offspring, EnumeratedEnsemble, Inadmissible,
                    OverflowMark, PointedTree, RejectionBudgetExceeded,
                    SpineTree, TooLarge, Tree, dump_tree, enumerate_trees,
                    fringe_histogram, pruned, sample_gw, sample_gw_conditioned,
                    sample_kesten_truncated, top)
from .parking import (BadPermutation, CarLabels, LabelMismatch, MissingTimes,
                      ParkingResult, assign_arrivals, park, park_sequential,
                      park_thinned)
from .theory import (InfiniteVariance, ModelParams, Regime, RegimeReport,
                     SingularityApproached, classify, phi_closed_form, phi_ode,
                     phi_ode_grid, root_flux_identity, t_max, theta)
from .montecarlo import (AllOverflowed, Estimate, FluxDistribution,
                         PoolTooSmallWarning, SpinalCheck,
                         SpineIncrementSampler, SweepPointConfig, SweepRow,
                         WalkPath, estimate_flux_conditioned,
                         estimate_flux_infinite_direct,
                         estimate_flux_infinite_walk, estimate_mean_flux,
                         estimate_mean_increment, estimate_root_parked_prob,
                         ks_distance, spinal_check, stream, sweep)

__version__ = "0.1.0"
