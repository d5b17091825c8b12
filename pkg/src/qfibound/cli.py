"""Command-line front end for the Fisher-information bound pipelines.

Each subcommand wraps one pipeline and emits rows in one of three
formats: ``csv`` (12 significant digits, '.' decimal separator, header
row always present), ``json-lines``, or an aligned ``pretty`` table.
Every numeric cell passes through the same 12-significant-digit
formatter, so all formats carry identical numbers and repeated
invocations are byte-identical.  Sweep and grid subcommands accept
``--jobs`` (default from ``QFI_BOUND_THREADS``) for threaded
evaluation; results are gathered in input order before emission, so
output does not depend on the worker count.

Exit codes: 0 success, 2 invalid arguments, 3 infeasible constraints,
4 validation failure, 5 capacity exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from io import StringIO

import numpy as np

from .analytic import boundary_scan, dicke_threshold, ghz_bound
from .bound import (
    BoundProblem,
    Constraint,
    OptimizerSettings,
    exact_qfi,
    lower_bound_multi,
    lower_bound_single,
)
from .errors import CapacityError, InfeasibleError, ValidationFailure
from .experiments import (
    dicke_extrapolation,
    evaluate_record,
    load_records,
    squeezing_convergence,
    symmetrize_moments,
)
from .spin import (
    build_collective,
    dicke_state,
    full_representation,
    ghz_state,
    projector,
    symmetric_representation,
)

FORMATS = ("csv", "json-lines", "pretty")


@dataclass(frozen=True)
class RunConfig:
    """Validated common options shared by all subcommands."""

    subcommand: str
    fmt: str
    output: str | None
    seed: int
    jobs: int
    representation: str
    settings: OptimizerSettings

    def __post_init__(self):
        if self.fmt not in FORMATS:
            raise ValueError(f"unknown format {self.fmt!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.representation not in ("full", "symmetric"):
            raise ValueError(f"unknown representation {self.representation!r}")


# ---------------------------------------------------------------------------
# Formatting and emission


def _fmt(x) -> str:
    """One cell: 12 significant digits for floats, '' for absent values."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.12g}"


def _json_cell(x):
    if x is None or isinstance(x, str):
        return x
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    # round-trip through the shared formatter so every format carries
    # the same 12-digit numbers
    return float(f"{float(x):.12g}")


def _emit(rows: list[dict], columns: list[str], cfg: RunConfig) -> None:
    if cfg.fmt == "csv":
        import csv as _csv

        buf = StringIO()
        w = _csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
        text = buf.getvalue()
    elif cfg.fmt == "json-lines":
        lines = [
            json.dumps({c: _json_cell(row.get(c)) for c in columns}, separators=(", ", ": "))
            for row in rows
        ]
        text = "\n".join(lines) + ("\n" if lines else "")
    else:
        cells = [[_fmt(row.get(c)) for c in columns] for row in rows]
        widths = [
            max(len(columns[j]), *(len(r[j]) for r in cells)) if cells else len(columns[j])
            for j in range(len(columns))
        ]
        out = ["  ".join(c.rjust(widths[j]) for j, c in enumerate(columns))]
        for r in cells:
            out.append("  ".join(c.rjust(widths[j]) for j, c in enumerate(r)))
        text = "\n".join(out) + "\n"
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _map_jobs(fn, items, jobs: int):
    """Threaded map preserving input order (deterministic output)."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Argument helpers


def _parse_sweep(text: str, parser: argparse.ArgumentParser) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        parser.error(f"--sweep wants lo:hi:steps, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        parser.error(f"--sweep wants numeric lo:hi:steps, got {text!r}")
    if steps < 1 or hi < lo:
        parser.error(f"--sweep needs steps >= 1 and hi >= lo, got {text!r}")
    return np.linspace(lo, hi, steps)


def _parse_list(text: str, parser: argparse.ArgumentParser, cast, flag: str) -> list:
    try:
        return [cast(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        parser.error(f"{flag} wants a comma-separated list, got {text!r}")


def _fidelity_values(args, parser) -> np.ndarray:
    if (args.fidelity is None) == (args.sweep is None):
        parser.error("exactly one of --fidelity and --sweep is required")
    if args.fidelity is not None:
        return np.array([args.fidelity])
    return _parse_sweep(args.sweep, parser)


def _config(args, parser) -> RunConfig:
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("QFI_BOUND_THREADS", "1"))
    base = OptimizerSettings()
    settings = OptimizerSettings(
        mu_grid_points=args.mu_grid_points or base.mu_grid_points,
        r_tolerance=args.r_tolerance or base.r_tolerance,
        r_max_iters=args.r_max_iters or base.r_max_iters,
        dense_cutoff=args.dense_cutoff or base.dense_cutoff,
    )
    rep = getattr(args, "representation", "symmetric")
    n = getattr(args, "n", None)
    if rep == "full" and n is not None and n > 14:
        parser.error("representation=full requires N <= 14")
    if jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return RunConfig(
            subcommand=args.subcommand,
            fmt=args.format,
            output=args.output,
            seed=args.seed,
            jobs=jobs,
            representation=rep,
            settings=settings,
        )
    except ValueError as exc:
        parser.error(str(exc))


def _representation(cfg: RunConfig, n: int):
    if cfg.representation == "full":
        return full_representation(n)
    return symmetric_representation(n)


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_ghz(args, parser) -> int:
    cfg = _config(args, parser)
    n = args.n
    fs = _fidelity_values(args, parser)
    rows = [
        {"f": f, "bound_per_n2": ghz_bound(f, n) / n**2, "bound": ghz_bound(f, n)}
        for f in fs
    ]
    _emit(rows, ["f", "bound_per_n2", "bound"], cfg)
    return 0


def _cmd_dicke_fidelity(args, parser) -> int:
    cfg = _config(args, parser)
    n = args.n
    if n % 2:
        parser.error("--n must be even (half-excited Dicke target)")
    fs = _fidelity_values(args, parser)
    thr = dicke_threshold(n)
    rep = _representation(cfg, n)
    ops = build_collective(rep)
    proj = projector(dicke_state(rep))

    def cell(f: float) -> dict:
        res = lower_bound_single(proj, f, ops.jy, cfg.settings, representation=rep.kind)
        row = {"f": f, "bound": res.bound, "bound_per_n2": res.bound / n**2, "threshold": thr}
        if args.both:
            # closed anchors: zero at/below threshold, N(N+2)/2 at F = 1
            ref = None
            if f <= thr:
                ref = 0.0
            elif f == 1.0:
                ref = n * (n + 2) / 2
            row["bound_reference"] = ref
        return row

    rows = _map_jobs(cell, list(fs), cfg.jobs)
    cols = ["f", "bound", "bound_per_n2", "threshold"]
    if args.both:
        cols.append("bound_reference")
    _emit(rows, cols, cfg)
    return 0


def _feasible_mask(n: int, rep, pts: list[tuple[float, float]]) -> list[bool]:
    """Joint numerical-range membership for (<J_z>, <J_x^2>) pairs.

    The joint range of two Hermitian operators is convex, so a point is
    feasible iff it passes every directional support test.  Mixing any
    state with its pi-rotation about z kills <J_x> without moving
    <J_z> or <J_x^2>, so the extra <J_x> = 0 constraint never changes
    feasibility of the pair.
    """
    ops = build_collective(rep)
    jz = ops.jz.matrix.real
    jx2 = (ops.jx.matrix @ ops.jx.matrix).real
    scale = max(np.abs(np.diag(jz)).max(), np.linalg.norm(jx2, 2), 1.0)
    feas = [True] * len(pts)
    for th in np.linspace(0.0, 2.0 * math.pi, 721)[:-1]:
        a, b = math.cos(th), math.sin(th)
        top = float(np.linalg.eigvalsh(a * jz + b * jx2)[-1])
        for i, (z, x2) in enumerate(pts):
            if feas[i] and a * z + b * x2 > top + 1e-9 * scale:
                feas[i] = False
    return feas


def _cmd_squeezing_map(args, parser) -> int:
    cfg = _config(args, parser)
    n = args.n
    jz_grid = _parse_sweep(args.jz_grid, parser)
    jx2_grid = _parse_sweep(args.jx2_grid, parser)
    rep = _representation(cfg, n)
    ops = build_collective(rep)
    pts = [(float(z), float(x2)) for z in jz_grid for x2 in jx2_grid]
    feas = _feasible_mask(n, rep, pts)

    def cell(item) -> dict:
        (z, x2), ok = item
        row = {"jz": z, "jx2": x2, "bound": None, "bound_per_n": None, "feasible": ok}
        if not ok:
            return row
        prob = BoundProblem(
            constraints=[
                Constraint(ops.jz, z, "jz"),
                Constraint(ops.jx2, x2, "jx2"),
                Constraint(ops.jx, 0.0, "jx"),
            ],
            generator=ops.jy,
            representation=rep.kind,
        )
        try:
            res = lower_bound_multi(prob, cfg.settings)
        except InfeasibleError:
            # support test passed but the cell sits on the boundary edge
            row["feasible"] = False
            return row
        row["bound"] = res.bound
        row["bound_per_n"] = res.bound / n
        return row

    rows = _map_jobs(cell, list(zip(pts, feas)), cfg.jobs)
    _emit(rows, ["jz", "jx2", "bound", "bound_per_n", "feasible"], cfg)
    return 0


def _cmd_boundary(args, parser) -> int:
    cfg = _config(args, parser)
    mus = _parse_list(args.mu_list, parser, float, "--mu-list")
    if not mus:
        parser.error("--mu-list is empty")
    try:
        points = boundary_scan(args.n, args.sign, mus)
    except ValueError as exc:
        parser.error(str(exc))
    rows = [
        {
            "mu": p.mu,
            "jz": p.jz,
            "jx2": p.jx2,
            "var_jx": p.var_jx,
            "fq": p.fq,
            "archetype_bound": p.archetype_bound,
            "rel_diff": p.rel_diff,
            "gap": p.gap,
            "degenerate": p.degenerate,
        }
        for p in points
    ]
    cols = ["mu", "jz", "jx2", "var_jx", "fq", "archetype_bound", "rel_diff", "gap", "degenerate"]
    _emit(rows, cols, cfg)
    return 0


def _cmd_experiment(args, parser) -> int:
    cfg = _config(args, parser)
    try:
        records = load_records(args.input)
    except OSError as exc:
        parser.error(f"cannot read {args.input}: {exc}")
    except ValueError as exc:
        parser.error(str(exc))
    n_primes = None
    if args.n_primes:
        n_primes = _parse_list(args.n_primes, parser, int, "--n-primes")

    def run(rec) -> dict:
        res = evaluate_record(rec, settings=cfg.settings, n_primes=n_primes)
        return {
            "name": res.name,
            "n": res.n,
            "family": res.family,
            "bound": res.bound,
            "bound_sigma": res.bound_sigma,
            "bound_per_n": res.bound_per_n,
            "bound_per_n2": res.bound_per_n2,
            "depth_k": res.depth_k,
            "representation": res.representation,
            "certified_flag": res.certified,
        }

    rows = _map_jobs(run, records, cfg.jobs)
    cols = [
        "name",
        "n",
        "family",
        "bound",
        "bound_sigma",
        "bound_per_n",
        "bound_per_n2",
        "depth_k",
        "representation",
        "certified_flag",
    ]
    _emit(rows, cols, cfg)
    return 0


def _cmd_scaling(args, parser) -> int:
    cfg = _config(args, parser)
    n_primes = _parse_list(args.n_primes, parser, int, "--n-primes")
    if not n_primes:
        parser.error("--n-primes is empty")
    if args.mode == "squeezing":
        if args.alpha is None or args.xi2 is None:
            parser.error("squeezing mode needs --alpha and --xi2")
        run = squeezing_convergence(args.alpha, args.xi2, n_primes, settings=cfg.settings)
        gamma = None
    else:
        needed = (args.n, args.jz2, args.jx2, args.jy2)
        if any(v is None for v in needed):
            parser.error("dicke mode needs --n, --jz2, --jx2 and --jy2")
        moments = {"jz2": args.jz2, "jx2": args.jx2, "jy2": args.jy2}
        gamma, sym = symmetrize_moments(moments, args.n)
        run = dicke_extrapolation(sym["jz2"], args.n, gamma, n_primes, settings=cfg.settings)
    rows = []
    for i, np_i in enumerate(run.n_primes):
        r = run.r_opts[i] if i < len(run.r_opts) else (None, None, None)
        rows.append(
            {
                "n_prime": np_i,
                "bound": run.bounds[i],
                "bound_per_n": run.bounds_per_n[i],
                "iterations": run.iterations[i] if i < len(run.iterations) else None,
                "r1": r[0],
                "r2": r[1],
                "r3": r[2],
                "gamma": gamma,
                "extrapolated": run.extrapolated,
                "plateau": run.plateau,
            }
        )
    cols = [
        "n_prime",
        "bound",
        "bound_per_n",
        "iterations",
        "r1",
        "r2",
        "r3",
        "gamma",
        "extrapolated",
        "plateau",
    ]
    _emit(rows, cols, cfg)
    return 0


def _cmd_validate(args, parser) -> int:
    cfg = _config(args, parser)
    n = args.n
    if n > 14:
        parser.error("validate runs in the full representation; N <= 14")
    rep = full_representation(n)
    ops = build_collective(rep)
    proj = projector(ghz_state(rep))
    rng = np.random.default_rng(cfg.seed)
    d = rep.dim
    states = []
    for trial in range(args.samples):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rho = g @ g.conj().T
        states.append((trial, rho / np.trace(rho).real))

    def run(item) -> list[dict]:
        trial, rho = item
        out = []
        fq_z = exact_qfi(rho, ops.jz)
        fval = float(np.trace(proj.matrix @ rho).real)
        b = lower_bound_single(proj, fval, ops.jz, cfg.settings, representation="full").bound
        out.append(
            {"trial": trial, "kind": "ghz-fidelity", "bound": b, "exact": fq_z, "margin": b - fq_z}
        )
        fq_y = exact_qfi(rho, ops.jy)
        vals = [float(np.trace(op.matrix @ rho).real) for op in (ops.jz, ops.jx2, ops.jx)]
        prob = BoundProblem(
            constraints=[
                Constraint(ops.jz, vals[0], "jz"),
                Constraint(ops.jx2, vals[1], "jx2"),
                Constraint(ops.jx, vals[2], "jx"),
            ],
            generator=ops.jy,
            representation="full",
        )
        b = lower_bound_multi(prob, cfg.settings).bound
        out.append(
            {"trial": trial, "kind": "moments", "bound": b, "exact": fq_y, "margin": b - fq_y}
        )
        return out

    nested = _map_jobs(run, states, cfg.jobs)
    rows = [row for chunk in nested for row in chunk]
    _emit(rows, ["trial", "kind", "bound", "exact", "margin"], cfg)
    worst = max((row["margin"] for row in rows), default=0.0)
    if worst > 1e-6:
        raise ValidationFailure(
            f"soundness violated: bound exceeds exact QFI by {worst:.3e} (> 1e-6)"
        )
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfi-bound",
        description="Lower bounds on the quantum Fisher information from fidelities and moments.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default="pretty")
    common.add_argument("--output", default=None, metavar="PATH")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=None, help="default: QFI_BOUND_THREADS or 1")
    common.add_argument("--mu-grid-points", type=int, default=None)
    common.add_argument("--r-tolerance", type=float, default=None)
    common.add_argument("--r-max-iters", type=int, default=None)
    common.add_argument("--dense-cutoff", type=int, default=None)

    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ghz", parents=[common], help="GHZ fidelity-to-bound curve (closed form)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--fidelity", type=float, default=None)
    p.add_argument("--sweep", default=None, metavar="LO:HI:STEPS")
    p.set_defaults(func=_cmd_ghz)

    p = sub.add_parser(
        "dicke-fidelity", parents=[common], help="Dicke fidelity-to-bound curve (engine)"
    )
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--fidelity", type=float, default=None)
    p.add_argument("--sweep", default=None, metavar="LO:HI:STEPS")
    p.add_argument("--representation", choices=("full", "symmetric"), default="symmetric")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument(
        "--numeric", action="store_true", help="engine values only (the default)"
    )
    mode.add_argument(
        "--both", action="store_true", help="add closed anchor values where they exist"
    )
    p.set_defaults(func=_cmd_dicke_fidelity)

    p = sub.add_parser(
        "squeezing-map", parents=[common], help="bound over a (<J_z>, <J_x^2>) grid"
    )
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--jz-grid", required=True, metavar="LO:HI:STEPS")
    p.add_argument("--jx2-grid", required=True, metavar="LO:HI:STEPS")
    p.add_argument("--representation", choices=("full", "symmetric"), default="symmetric")
    p.set_defaults(func=_cmd_squeezing_map)

    p = sub.add_parser(
        "boundary", parents=[common], help="extremal moment-curve states and their QFI"
    )
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sign", choices=("+", "-"), default="+")
    p.add_argument("--mu-list", required=True, metavar="MU1,MU2,...")
    p.set_defaults(func=_cmd_boundary)

    p = sub.add_parser("experiment", parents=[common], help="evaluate a record file")
    p.add_argument("--input", required=True, metavar="PATH")
    p.add_argument("--n-primes", default=None, metavar="N1,N2,...")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("scaling", parents=[common], help="chain runs over particle number")
    p.add_argument("--mode", choices=("squeezing", "dicke"), required=True)
    p.add_argument("--n-primes", required=True, metavar="N1,N2,...")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--xi2", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--jz2", type=float, default=None)
    p.add_argument("--jx2", type=float, default=None)
    p.add_argument("--jy2", type=float, default=None)
    p.set_defaults(func=_cmd_scaling)

    p = sub.add_parser("validate", parents=[common], help="soundness suite on random states")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 4
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
