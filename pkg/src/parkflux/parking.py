"""The parking dynamics.

Cars arrive on tree nodes, drive toward the root, and take the first free
spot; whatever reaches past the root is the outgoing flux.  `park` computes
the final state in one linear bottom-up pass; `park_sequential` replays cars
one at a time and exists purely as an independent oracle, sharing no code
with the fast pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .distributions import LawHandle
from .trees import Tree


class LabelMismatch(ValueError):
    """Car labels do not cover the tree."""


class BadPermutation(ValueError):
    """A sequential order that is not a permutation of the actual cars."""


class MissingTimes(ValueError):
    """Thinned parking requested on labels without arrival times."""


@dataclass(eq=False)
class CarLabels:
    """Per-node arrival counts, optionally with i.i.d. uniform arrival times
    (one time per node, shared by that node's cars)."""

    counts: np.ndarray
    times: np.ndarray | None = None

    @property
    def total_cars(self) -> int:
        return int(self.counts.sum())


@dataclass(eq=False)
class ParkingResult:
    """flux: cars leaving through the root.  occupied: final spot state.
    edge_flux[v]: cars crossing the edge from v up to its parent; at the root
    the entry holds the outgoing flux itself."""

    flux: int
    occupied: np.ndarray
    edge_flux: np.ndarray


def assign_arrivals(tree: Tree, cars: LawHandle, rng: np.random.Generator,
                    with_times: bool = False) -> CarLabels:
    """I.i.d. car counts per node; counts are drawn first, then times."""
    counts = cars.sample_n(rng, tree.n)
    times = rng.random(tree.n) if with_times else None
    return CarLabels(counts=counts, times=times)


def _check_labels(tree: Tree, labels: CarLabels) -> np.ndarray:
    counts = np.ascontiguousarray(labels.counts, dtype=np.int64)
    if counts.shape != (tree.n,):
        raise LabelMismatch(
            f"{counts.shape[0] if counts.ndim == 1 else counts.shape} labels "
            f"for a tree of {tree.n} nodes")
    if np.any(counts < 0):
        raise LabelMismatch("negative car counts")
    return counts


def park(tree: Tree, labels: CarLabels) -> ParkingResult:
    """Final configuration via the bottom-up recursion, O(n) time, no call
    stack (survives path-shaped trees of millions of nodes)."""
    counts = _check_labels(tree, labels)
    order = tree.topological_order()
    flux, occupied, edge_flux = _kernels.park_pass(tree.parent, counts, order)
    return ParkingResult(flux=int(flux), occupied=occupied.astype(bool),
                         edge_flux=edge_flux)


def park_sequential(tree: Tree, labels: CarLabels, order) -> ParkingResult:
    """Drive the cars one at a time in the given order (a sequence of arrival
    nodes, one entry per individual car).  Deliberately naive; the reference
    the fast pass is checked against."""
    counts = _check_labels(tree, labels)
    order = [int(v) for v in order]
    expected = {}
    for v, c in enumerate(counts):
        if c > 0:
            expected[v] = int(c)
    seen = {}
    for v in order:
        if not 0 <= v < tree.n:
            raise BadPermutation(f"car at node {v} outside tree")
        seen[v] = seen.get(v, 0) + 1
    if seen != expected:
        raise BadPermutation("order is not a permutation of the cars")

    parent = tree.parent
    occupied = [False] * tree.n
    edge_flux = [0] * tree.n
    flux = 0
    for start in order:
        v = start
        while True:
            if not occupied[v]:
                occupied[v] = True
                break
            edge_flux[v] += 1
            nxt = parent[v]
            if nxt < 0:
                flux += 1
                break
            v = int(nxt)
    return ParkingResult(flux=flux, occupied=np.array(occupied, dtype=bool),
                         edge_flux=np.array(edge_flux, dtype=np.int64))


def park_thinned(tree: Tree, labels: CarLabels, t: float) -> ParkingResult:
    """Park only the cars whose node revealed its arrivals by time t."""
    if labels.times is None:
        raise MissingTimes("labels carry no arrival times")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"time must lie in [0, 1], got {t}")
    counts = _check_labels(tree, labels)
    masked = np.where(labels.times <= t, counts, 0)
    return park(tree, CarLabels(counts=masked))
