"""Batch front end: argument/config parsing, deterministic dispatch, and
CSV/JSON report emission.

Report schema (one row per parameter point, identical column order always):
    m,theta,regime,phi1_closed,mean_flux,se,parked_prob,se,flux_per_n,se,overflow_frac,seed
JSON mirrors the columns as fields, with the three `se` columns
disambiguated as mean_flux_se / parked_prob_se / flux_per_n_se.  Floats are
printed with 9 significant digits, so byte-identical inputs give
byte-identical reports.

Exit codes: 0 ok, 2 configuration error, 3 estimator failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import montecarlo as mc
from . import parking, theory, trees
from .distributions import DistSpec, InvalidSpec, LawHandle, NotCritical, make_law

OUTPUT_DIR_ENV = "PARKFLUX_OUTPUT_DIR"

REPORT_COLUMNS = ("m", "theta", "regime", "phi1_closed", "mean_flux", "se",
                  "parked_prob", "se", "flux_per_n", "se", "overflow_frac",
                  "seed")
_JSON_FIELDS = ("m", "theta", "regime", "phi1_closed", "mean_flux",
                "mean_flux_se", "parked_prob", "parked_prob_se", "flux_per_n",
                "flux_per_n_se", "overflow_frac", "seed")


class ConfigError(ValueError):
    pass


_ESTIMATOR_ERRORS = (mc.AllOverflowed, trees.Inadmissible,
                     trees.RejectionBudgetExceeded, trees.Delta1Offspring,
                     NotCritical, theory.SingularityApproached,
                     theory.InfiniteVariance)


# ---------------------------------------------------------------------------
# distribution shorthand


def parse_dist(text: str) -> DistSpec:
    """family:params shorthand, e.g. poisson:0.25, geometric:0.5,
    binomial:10,0.1, finite:0=0.5,2=0.5."""
    if ":" not in text:
        raise ConfigError(f"distribution {text!r} is not family:params")
    fam, _, rest = text.partition(":")
    try:
        if fam == "poisson":
            spec = DistSpec.poisson(float(rest))
        elif fam == "geometric":
            spec = DistSpec.geometric(float(rest))
        elif fam == "binomial":
            t, p = rest.split(",")
            spec = DistSpec.binomial(int(t), float(p))
        elif fam == "finite":
            pairs = []
            for item in rest.split(","):
                k, _, v = item.partition("=")
                pairs.append((int(k), float(v)))
            spec = DistSpec.finite(pairs)
        else:
            raise ConfigError(f"unknown distribution family {fam!r}")
        spec.validate()
        return spec
    except (ValueError, InvalidSpec) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad distribution {text!r}: {exc}") from exc


def _law(spec: DistSpec) -> LawHandle:
    return make_law(spec)


# ---------------------------------------------------------------------------
# experiment configuration


_CONFIG_KEYS = {"offspring", "cars", "seed", "reps", "cap", "n", "H", "t",
                "step", "grid", "h0", "k", "pool", "graft_depth", "workers",
                "car_family", "trials", "reps_parked", "reps_conditioned",
                "format", "out", "method"}


@dataclass
class ExperimentConfig:
    offspring: DistSpec | None = None
    cars: DistSpec | None = None
    seed: int = 0
    reps: int = 10_000
    cap: int = trees.DEFAULT_CAP
    n: int = 1000
    H: int = 100
    t: float = 1.0
    step: float = 1e-4
    grid: list = field(default_factory=list)
    h0: int = 0
    k: int = 1
    pool: int = 100_000
    graft_depth: int = 256
    workers: int = 1
    car_family: str = "poisson"
    trials: int | None = None
    reps_parked: int | None = None
    reps_conditioned: int = 200
    format: str = "csv"
    out: str | None = None
    method: str = "both"

    @staticmethod
    def load(path: str) -> dict:
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "offspring" in raw:
            raw["offspring"] = DistSpec.from_json_dict(raw["offspring"])
        if "cars" in raw:
            raw["cars"] = DistSpec.from_json_dict(raw["cars"])
        return raw

    def validated(self) -> "ExperimentConfig":
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be a 64-bit nonnegative integer")
        for name in ("reps", "cap", "n", "pool"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.H < 0 or self.h0 < 0 or self.k < 0:
            raise ConfigError("H, h0 and k must be >= 0")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.method not in ("direct", "walk", "both"):
            raise ConfigError("method must be direct, walk or both")
        return self


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    base: dict = {}
    if getattr(args, "config", None):
        try:
            base = ExperimentConfig.load(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    cfg = ExperimentConfig(**base)
    for name in vars(cfg):
        if hasattr(args, name) and getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    return cfg.validated()


# ---------------------------------------------------------------------------
# report emission


def fmt_float(x: float | None) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return f"{x:.9g}"


def _row_cells(row: mc.SweepRow) -> list[str]:
    return [
        fmt_float(row.m), fmt_float(row.theta), row.regime or "",
        fmt_float(row.phi1_closed), fmt_float(row.mean_flux),
        fmt_float(row.mean_flux_se), fmt_float(row.parked_prob),
        fmt_float(row.parked_prob_se), fmt_float(row.flux_per_n),
        fmt_float(row.flux_per_n_se), fmt_float(row.overflow_frac),
        "" if row.seed is None else str(int(row.seed)),
    ]


def _json_value(x):
    if x is None:
        return None
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.9g}")
    return x


def render_report(rows: list, fmt: str) -> str:
    """Deterministic text of a report; rows are SweepRow records."""
    if fmt == "csv":
        lines = [",".join(REPORT_COLUMNS)]
        lines += [",".join(_row_cells(r)) for r in rows]
        return "\n".join(lines) + "\n"
    objs = []
    for r in rows:
        vals = (r.m, r.theta, r.regime, r.phi1_closed, r.mean_flux,
                r.mean_flux_se, r.parked_prob, r.parked_prob_se, r.flux_per_n,
                r.flux_per_n_se, r.overflow_frac,
                None if r.seed is None else int(r.seed))
        objs.append({k: _json_value(v) for k, v in zip(_JSON_FIELDS, vals)})
    return json.dumps(objs, indent=2) + "\n"


def resolve_out_path(out: str | None) -> str | None:
    if out is None:
        return None
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(out):
        return os.path.join(base, out)
    return out


def emit_report(rows: list, fmt: str, out: str | None) -> None:
    text = render_report(rows, fmt)
    path = resolve_out_path(out)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def emit_aux(payload: dict, fmt: str, out: str | None) -> None:
    """Secondary reports (flux histograms, two-sided checks) as JSON, or CSV
    of value,count pairs when the payload is a histogram."""
    path = resolve_out_path(out)
    if fmt == "csv" and "histogram" in payload:
        lines = ["value,count"]
        lines += [f"{v},{c}" for v, c in sorted(payload["histogram"].items())]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(payload, indent=2, default=_json_value) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# tree mini-language for demos


def parse_tree_arg(text: str) -> trees.Tree:
    """pathN, starN, or degrees:1,2,0,... (preorder child counts)."""
    if text.startswith("path"):
        n = int(text[4:])
        if n < 1:
            raise ConfigError("path length must be >= 1")
        degs = np.array([1] * (n - 1) + [0], dtype=np.int64)
    elif text.startswith("star"):
        n = int(text[4:])
        if n < 2:
            raise ConfigError("star size must be >= 2")
        degs = np.array([n - 1] + [0] * (n - 1), dtype=np.int64)
    elif text.startswith("degrees:"):
        degs = np.array([int(x) for x in text[len("degrees:"):].split(",")],
                        dtype=np.int64)
    else:
        raise ConfigError(f"unknown tree shorthand {text!r}")
    try:
        return trees.Tree.from_preorder_degrees(degs)
    except ValueError as exc:
        raise ConfigError(f"bad tree {text!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def _params(cfg: ExperimentConfig) -> theory.ModelParams:
    if cfg.offspring is None or cfg.cars is None:
        raise ConfigError("this command needs --offspring and --cars")
    return theory.ModelParams.from_laws(_law(cfg.cars), _law(cfg.offspring))


def _cmd_regime(cfg: ExperimentConfig) -> int:
    p = _params(cfg)
    rep = theory.classify(p)
    print(f"theta = {fmt_float(rep.theta)}")
    print(f"regime = {rep.regime.value}")
    print(f"t_max = {fmt_float(rep.t_max)}")
    return 0


def _cmd_phi(cfg: ExperimentConfig) -> int:
    p = _params(cfg)
    print(fmt_float(theory.phi_closed_form(cfg.t, p)))
    return 0


def _cmd_ode(cfg: ExperimentConfig) -> int:
    p = _params(cfg)
    print(fmt_float(theory.phi_ode(cfg.t, p, cfg.step)))
    return 0


def _cmd_sample_tree(cfg: ExperimentConfig, conditioned: bool,
                     kesten: bool) -> int:
    if cfg.offspring is None:
        raise ConfigError("sample-tree needs --offspring")
    law = _law(cfg.offspring)
    rng = mc.stream(cfg.seed, 99, 0)
    if kesten:
        t = trees.sample_kesten_truncated(law, cfg.H, rng, cfg.cap)
        tree = None if isinstance(t, trees.OverflowMark) else t.tree
    elif conditioned:
        tree = trees.sample_gw_conditioned(law, cfg.n, rng)
    else:
        t = trees.sample_gw(law, rng, cfg.cap)
        tree = None if isinstance(t, trees.OverflowMark) else t
    if tree is None:
        print(f"overflow: more than {cfg.cap} vertices", file=sys.stderr)
        return 3
    sys.stdout.write(trees.dump_tree(tree))
    return 0


def _cmd_park_demo(cfg: ExperimentConfig, tree_text: str,
                   labels_text: str) -> int:
    tree = parse_tree_arg(tree_text)
    try:
        counts = np.array([int(x) for x in labels_text.split(",")],
                          dtype=np.int64)
    except ValueError as exc:
        raise ConfigError(f"bad labels {labels_text!r}: {exc}") from exc
    if counts.shape[0] != tree.n:
        raise ConfigError(f"{counts.shape[0]} labels for {tree.n} nodes")
    res = parking.park(tree, parking.CarLabels(counts=counts))
    non_root = ",".join(str(int(res.edge_flux[v])) for v in range(1, tree.n))
    print(f"flux = {res.flux}")
    print(f"edge_flux = {non_root}")
    print("occupied = " + ",".join("1" if b else "0" for b in res.occupied))
    return 0


def _theory_row(cfg: ExperimentConfig) -> mc.SweepRow:
    p = _params(cfg)
    rep = theory.classify(p)
    try:
        phi1 = theory.phi_closed_form(1.0, p)
    except ValueError:
        phi1 = math.inf
    return mc.SweepRow(m=p.m, theta=rep.theta, regime=rep.regime.value,
                       phi1_closed=phi1, seed=cfg.seed)


def _cmd_mean_flux(cfg: ExperimentConfig) -> int:
    row = _theory_row(cfg)
    est = mc.estimate_mean_flux(_law(cfg.offspring), _law(cfg.cars), cfg.reps,
                                cfg.cap, cfg.seed, cfg.workers)
    row.mean_flux, row.mean_flux_se = est.point, est.std_error
    row.overflow_frac = est.overflow_count / est.replicates
    print(f"mean_flux = {fmt_float(est.point)} +- {fmt_float(est.std_error)} "
          f"(reps {est.replicates}, overflow {est.overflow_count}, "
          f"cap shift {fmt_float(est.notes.get('cap_shift'))})")
    emit_report([row], cfg.format, cfg.out)
    return 0


def _cmd_parked_prob(cfg: ExperimentConfig) -> int:
    row = _theory_row(cfg)
    est = mc.estimate_root_parked_prob(_law(cfg.offspring), _law(cfg.cars),
                                       cfg.reps, cfg.cap, cfg.seed,
                                       cfg.workers)
    row.parked_prob, row.parked_prob_se = est.point, est.std_error
    row.overflow_frac = est.overflow_count / est.replicates
    print(f"parked_prob = {fmt_float(est.point)} +- {fmt_float(est.std_error)}")
    emit_report([row], cfg.format, cfg.out)
    return 0


def _cmd_flux_n(cfg: ExperimentConfig) -> int:
    row = _theory_row(cfg)
    est = mc.estimate_flux_conditioned(_law(cfg.offspring), _law(cfg.cars),
                                       cfg.n, cfg.reps, cfg.seed, cfg.workers)
    row.flux_per_n, row.flux_per_n_se = est.point, est.std_error
    print(f"flux_per_n = {fmt_float(est.point)} +- {fmt_float(est.std_error)}")
    emit_report([row], cfg.format, cfg.out)
    return 0


def _cmd_flux_inf(cfg: ExperimentConfig) -> int:
    off, cars = _law(cfg.offspring), _law(cfg.cars)
    payload: dict = {"H": cfg.H, "reps": cfg.reps, "seed": cfg.seed}
    dists = {}
    if cfg.method in ("direct", "both"):
        d = mc.estimate_flux_infinite_direct(off, cars, cfg.H, cfg.reps,
                                             cfg.seed, cfg.cap,
                                             cfg.graft_depth, cfg.workers)
        dists["direct"] = d
        payload["direct"] = {"histogram": d.histogram(),
                             "overflow": d.overflow_count,
                             "diverged": d.diverged}
    if cfg.method in ("walk", "both"):
        w = mc.estimate_flux_infinite_walk(off, cars, cfg.H, cfg.reps,
                                           cfg.pool, cfg.seed, cfg.cap,
                                           cfg.workers)
        dists["walk"] = w
        payload["walk"] = {"histogram": w.histogram(),
                           "overflow": w.overflow_count,
                           "diverged": w.diverged}
    if len(dists) == 2:
        payload["ks_distance"] = mc.ks_distance(dists["direct"].samples,
                                                dists["walk"].samples)
        print(f"ks_distance = {fmt_float(payload['ks_distance'])}")
    if len(dists) == 1:
        (only,) = dists.values()
        payload["histogram"] = only.histogram()
    emit_aux(payload, cfg.format, cfg.out)
    return 0


def _cmd_spinal_check(cfg: ExperimentConfig) -> int:
    chk = mc.spinal_check(_law(cfg.offspring), cfg.h0, cfg.k, cfg.reps,
                          cfg.seed, cfg.cap, workers=cfg.workers)
    print(f"lhs = {fmt_float(chk.lhs.point)} +- {fmt_float(chk.lhs.std_error)}")
    print(f"rhs = {fmt_float(chk.rhs.point)} +- {fmt_float(chk.rhs.std_error)}")
    print(f"disagreement_sigma = {fmt_float(chk.disagreement_sigma)}")
    payload = {
        "h0": cfg.h0, "k": cfg.k, "reps": cfg.reps, "seed": cfg.seed,
        "lhs": {"point": chk.lhs.point, "se": chk.lhs.std_error,
                "overflow": chk.lhs.overflow_count},
        "rhs": {"point": chk.rhs.point, "se": chk.rhs.std_error,
                "overflow": chk.rhs.overflow_count},
        "disagreement_sigma": chk.disagreement_sigma,
    }
    emit_aux(payload, "json", cfg.out)
    return 0


def _cmd_sweep(cfg: ExperimentConfig) -> int:
    if cfg.offspring is None:
        raise ConfigError("sweep needs --offspring")
    if not cfg.grid:
        emit_report([], cfg.format, cfg.out)
        return 0
    point = mc.SweepPointConfig(
        reps_flux=cfg.reps,
        reps_parked=cfg.reps_parked if cfg.reps_parked is not None else cfg.reps,
        n=cfg.n, reps_conditioned=cfg.reps_conditioned, cap=cfg.cap,
        workers=cfg.workers)
    rows = mc.sweep(_law(cfg.offspring), cfg.car_family, cfg.grid, cfg.seed,
                    point, cfg.trials)
    for r in rows:
        if r.error:
            print(f"m={r.m}: {r.error}", file=sys.stderr)
    emit_report(rows, cfg.format, cfg.out)
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def parse_grid(text: str) -> list[float]:
    """Comma list (0.1,0.2) or start:stop:step inclusive-ish range."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("range grid must be start:stop:step")
        a, b, s = (float(x) for x in parts)
        if s <= 0:
            raise ConfigError("grid step must be positive")
        out = []
        x = a
        while x <= b + 1e-12:
            out.append(round(x, 12))
            x += s
        return out
    return [float(x) for x in text.split(",") if x != ""]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="parkflux",
        description="Parking on critical random trees: closed forms and "
                    "Monte Carlo experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, *, dists=True):
        p.add_argument("--config", help="JSON config file (flags override)")
        if dists:
            p.add_argument("--offspring", type=parse_dist,
                           help="offspring law, e.g. poisson:1")
            p.add_argument("--cars", type=parse_dist,
                           help="car-arrival law, e.g. poisson:0.25")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="report path (else stdout); relative "
                                     f"paths join ${OUTPUT_DIR_ENV} when set")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--workers", type=int)

    p = sub.add_parser("regime", help="phase classification from moments")
    common(p)

    p = sub.add_parser("phi", help="closed-form mean flux at time t")
    common(p)
    p.add_argument("--t", type=float)

    p = sub.add_parser("ode", help="mean flux by fixed-step integration")
    common(p)
    p.add_argument("--t", type=float)
    p.add_argument("--step", type=float)

    p = sub.add_parser("sample-tree", help="dump one sampled tree")
    common(p)
    p.add_argument("--n", type=int, help="condition on n vertices")
    p.add_argument("--height", type=int, dest="H",
                   help="truncated spine tree of this height")
    p.add_argument("--cap", type=int)

    p = sub.add_parser("park-demo", help="park explicit labels on a tiny tree")
    p.add_argument("--tree", required=True,
                   help="pathN | starN | degrees:1,1,0")
    p.add_argument("--labels", required=True, help="car counts, preorder")

    for name, helptext in (("mean-flux", "Monte Carlo mean flux"),
                           ("parked-prob", "probability the root is parked")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--reps", type=int)
        p.add_argument("--cap", type=int)

    p = sub.add_parser("flux-n", help="flux per vertex on n-vertex trees")
    common(p)
    p.add_argument("--reps", type=int)
    p.add_argument("--n", type=int)

    p = sub.add_parser("flux-inf", help="flux distribution on the truncated "
                                        "surviving tree")
    common(p)
    p.add_argument("--reps", type=int)
    p.add_argument("--H", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--pool", type=int)
    p.add_argument("--graft-depth", type=int, dest="graft_depth")
    p.add_argument("--method", choices=("direct", "walk", "both"))

    p = sub.add_parser("spinal-check", help="two-sided spine identity check")
    common(p)
    p.add_argument("--reps", type=int)
    p.add_argument("--h0", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--cap", type=int)

    p = sub.add_parser("sweep", help="sweep the car mean across a grid")
    common(p)
    p.add_argument("--m-grid", type=parse_grid, dest="grid")
    p.add_argument("--car-family", dest="car_family",
                   choices=("poisson", "geometric", "binomial"))
    p.add_argument("--trials", type=int, help="binomial car trials")
    p.add_argument("--reps", type=int)
    p.add_argument("--reps-parked", type=int, dest="reps_parked")
    p.add_argument("--reps-conditioned", type=int, dest="reps_conditioned")
    p.add_argument("--n", type=int)
    p.add_argument("--cap", type=int)

    return ap


def run(argv: list[str]) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        if args.command == "park-demo":
            return _cmd_park_demo(ExperimentConfig(), args.tree, args.labels)
        cfg = _build_config(args)
        if args.command == "regime":
            return _cmd_regime(cfg)
        if args.command == "phi":
            return _cmd_phi(cfg)
        if args.command == "ode":
            return _cmd_ode(cfg)
        if args.command == "sample-tree":
            return _cmd_sample_tree(cfg, conditioned=args.n is not None,
                                    kesten=args.H is not None)
        if args.command == "mean-flux":
            return _cmd_mean_flux(cfg)
        if args.command == "parked-prob":
            return _cmd_parked_prob(cfg)
        if args.command == "flux-n":
            return _cmd_flux_n(cfg)
        if args.command == "flux-inf":
            return _cmd_flux_inf(cfg)
        if args.command == "spinal-check":
            return _cmd_spinal_check(cfg)
        if args.command == "sweep":
            return _cmd_sweep(cfg)
        raise ConfigError(f"unhandled command {args.command!r}")
    except (ConfigError, InvalidSpec, ValueError) as exc:
        if isinstance(exc, _ESTIMATOR_ERRORS):
            print(f"estimator error: {exc}", file=sys.stderr)
            return 3
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _ESTIMATOR_ERRORS as exc:
        print(f"estimator error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
