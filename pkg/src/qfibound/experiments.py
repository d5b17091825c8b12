"""Experiment ingestion and scaling pipelines for measured collective data.

Two kinds of laboratory input are supported: target-state fidelities
(GHZ and half-excited Dicke states) and second moments of the
collective spin components.  Fidelity records go through the
closed-form or engine bound directly.  Moment records from large
ensembles are mapped onto smaller symmetric problems, solved there with
a warm-started chain, and rescaled back; the rescaled number is an
extrapolated estimate and is flagged as such, distinct from the
certified small-system bounds.

Records travel as plain text files, one block of ``field: value`` lines
per record, blank-line separated; ``#`` starts a comment line.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .analytic import ghz_bound
from .bound import (
    BoundProblem,
    BoundResult,
    Constraint,
    OptimizerSettings,
    lower_bound_multi,
    lower_bound_single,
)
from .spin import (
    build_collective,
    dicke_state,
    full_representation,
    projector,
    symmetric_representation,
)

__all__ = [
    "FAMILIES",
    "MOMENT_KEYS",
    "ExperimentRecord",
    "ScalingRun",
    "RecordResult",
    "parse_records",
    "load_records",
    "bound_from_fidelity",
    "entanglement_depth",
    "scale_squeezing",
    "squeezing_convergence",
    "symmetrize_moments",
    "dicke_extrapolation",
    "evaluate_record",
]

FAMILIES = ("GHZ", "Dicke", "SqueezedMoments", "DickeMoments")

# First and second moments a record may carry, in file order.
MOMENT_KEYS = ("jz", "jx2", "jy2", "jz2")

_FIELDS = (
    "name",
    "source",
    "n",
    "family",
    "fidelity",
    "fidelity_sigma",
) + tuple(k for key in MOMENT_KEYS for k in (key, key + "_sigma"))


def _casimir(n: int) -> float:
    j = n / 2.0
    return j * (j + 1.0)


@dataclass(frozen=True)
class ExperimentRecord:
    """One published measurement: either a fidelity or a set of moments."""

    name: str
    n_qubits: int
    family: str
    fidelity: tuple[float, float | None] | None = None
    moments: dict[str, tuple[float, float | None]] | None = None
    source: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.n_qubits < 2:
            raise ValueError("n must be at least 2")
        if (self.fidelity is None) == (self.moments is None):
            raise ValueError("exactly one of fidelity/moments must be present")
        if self.family in ("GHZ", "Dicke"):
            if self.fidelity is None:
                raise ValueError(f"{self.family} record needs a fidelity")
            value, sigma = self.fidelity
            if not 0.0 <= value <= 1.0:
                raise ValueError("fidelity outside [0, 1]")
            if sigma is not None and not 0.0 <= sigma:
                raise ValueError("fidelity sigma must be nonnegative")
        else:
            if self.moments is None:
                raise ValueError(f"{self.family} record needs moments")
            need = ("jz", "jx2") if self.family == "SqueezedMoments" else ("jx2", "jy2", "jz2")
            for key in need:
                if key not in self.moments:
                    raise ValueError(f"{self.family} record needs moment {key!r}")
            for key, (value, sigma) in self.moments.items():
                if key not in MOMENT_KEYS:
                    raise ValueError(f"unknown moment {key!r}")
                if not math.isfinite(value):
                    raise ValueError(f"moment {key!r} must be finite")
                if key != "jz" and value < 0:
                    raise ValueError(f"second moment {key!r} must be nonnegative")
                if sigma is not None and sigma < 0:
                    raise ValueError(f"sigma of {key!r} must be nonnegative")


@dataclass(frozen=True)
class ScalingRun:
    """Chain of engine runs over system size, plus the extrapolated value.

    `bounds` holds the absolute engine bound per point; `bounds_per_n`
    the normalized quantity that is expected to plateau (bound/N' for
    squeezing chains, the rescaled per-particle estimate for Dicke
    chains).  `extrapolated` is the mean of the last three normalized
    values and `plateau` says whether their spread stayed within 2%.
    """

    n_target: int
    n_primes: tuple[int, ...]
    bounds: tuple[float, ...]
    bounds_per_n: tuple[float, ...]
    extrapolated: float
    plateau: bool
    gamma: float | None = None
    iterations: tuple[int, ...] = ()
    r_opts: tuple[tuple[float, ...], ...] = ()
    certified: bool = False

    def __post_init__(self):
        primes = tuple(int(p) for p in self.n_primes)
        if any(b >= a for a, b in zip(primes[1:], primes)):
            raise ValueError("n_primes must be strictly ascending")
        if not len(primes) == len(self.bounds) == len(self.bounds_per_n):
            raise ValueError("per-point lists must have equal length")
        object.__setattr__(self, "n_primes", primes)
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        object.__setattr__(self, "bounds_per_n", tuple(float(b) for b in self.bounds_per_n))


@dataclass(frozen=True)
class RecordResult:
    """Evaluated record, one row of the results table."""

    name: str
    n: int
    family: str
    bound: float
    bound_sigma: float | None
    bound_per_n: float
    bound_per_n2: float
    depth_k: int
    representation: str
    certified: bool


# ---------------------------------------------------------------------------
# Record file parsing


def parse_records(text: str) -> list[ExperimentRecord]:
    """Parse record blocks from text; returns records in file order."""
    records = []
    fields: dict[str, str] = {}
    start_line = 0
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line:
            if fields:
                records.append(_record_from_fields(fields, start_line))
                fields = {}
            continue
        if line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or not key:
            raise ValueError(f"line {lineno}: expected 'field: value', got {rawline!r}")
        if key not in _FIELDS:
            raise ValueError(f"line {lineno}: unknown field {key!r}")
        if key in fields:
            raise ValueError(f"line {lineno}: duplicate field {key!r}")
        if not fields:
            start_line = lineno
        fields[key] = value.strip()
    if fields:
        records.append(_record_from_fields(fields, start_line))
    return records


def load_records(path) -> list[ExperimentRecord]:
    with open(path, encoding="utf-8") as handle:
        return parse_records(handle.read())


def _record_from_fields(fields: dict[str, str], lineno: int) -> ExperimentRecord:
    try:
        name = fields.pop("name")
        family = fields.pop("family")
        n = int(fields.pop("n"))
    except KeyError as exc:
        raise ValueError(f"record at line {lineno}: missing field {exc}") from None
    source = fields.pop("source", "")

    fidelity = None
    if "fidelity" in fields:
        value = float(fields.pop("fidelity"))
        sigma = float(fields.pop("fidelity_sigma")) if "fidelity_sigma" in fields else None
        fidelity = (value, sigma)
    elif "fidelity_sigma" in fields:
        raise ValueError(f"record at line {lineno}: fidelity_sigma without fidelity")

    moments: dict[str, tuple[float, float | None]] = {}
    for key in MOMENT_KEYS:
        skey = key + "_sigma"
        if key in fields:
            value = float(fields.pop(key))
            sigma = float(fields.pop(skey)) if skey in fields else None
            moments[key] = (value, sigma)
        elif skey in fields:
            raise ValueError(f"record at line {lineno}: {skey} without {key}")
    try:
        return ExperimentRecord(
            name=name,
            n_qubits=n,
            family=family,
            fidelity=fidelity,
            moments=moments or None,
            source=source,
        )
    except ValueError as exc:
        raise ValueError(f"record at line {lineno}: {exc}") from None


# ---------------------------------------------------------------------------
# Fidelity records


def _dicke_fidelity_run(
    fidelity: float, n: int, settings: OptimizerSettings
) -> tuple[BoundResult, str]:
    """Engine bound for a Dicke-state fidelity.

    Uses the full representation while the dense path can afford it
    (result then holds for arbitrary states); larger systems fall back
    to the symmetric representation and carry its certificate.
    """
    kind = "full" if 2**n <= settings.dense_cutoff else "symmetric"
    rep = full_representation(n) if kind == "full" else symmetric_representation(n)
    ops = build_collective(rep)
    proj = projector(dicke_state(rep))
    res = lower_bound_single(proj, fidelity, ops.jy, settings, representation=kind)
    return res, kind


def bound_from_fidelity(
    rec: ExperimentRecord, settings: OptimizerSettings | None = None
) -> tuple[float, float | None]:
    """Bound per N^2 from a fidelity record, with propagated uncertainty.

    The quoted sigma is the upper forward difference B(F+s) - B(F),
    capped at the bound itself so the one-sigma interval stays inside
    the attainable range.  On the quadratically growing fidelity curves
    a tangent-line estimate understates the error bar, so the full
    finite shift is used rather than the derivative.
    """
    if rec.fidelity is None:
        raise ValueError(f"record {rec.name!r} carries no fidelity")
    s = settings or OptimizerSettings()
    f, sigma_f = rec.fidelity
    n = rec.n_qubits

    if rec.family == "GHZ":
        def per_n2(x: float) -> float:
            return ghz_bound(x, n) / n**2
    elif rec.family == "Dicke":
        def per_n2(x: float) -> float:
            return _dicke_fidelity_run(x, n, s)[0].bound / n**2
    else:
        raise ValueError(f"family {rec.family!r} carries no fidelity bound")

    value = per_n2(f)
    if sigma_f is None:
        return value, None
    shifted = per_n2(min(f + sigma_f, 1.0))
    delta = shifted - value
    sigma = delta if value == 0 else min(delta, value)
    return value, sigma


def entanglement_depth(bound: float, n: int) -> int:
    """Largest k with bound > (k-1)n; 1 below shot noise, at most n."""
    if n < 1:
        raise ValueError("n must be positive")
    if bound <= 0:
        return 1
    # Shrink by one ulp-scale factor so bound == m*n lands on k = m.
    k = math.ceil((bound / n) * (1.0 - 1e-12))
    return min(max(k, 1), n)


# ---------------------------------------------------------------------------
# Spin-squeezing scaling chain


def scale_squeezing(alpha: float, xi2: float, n_prime: int) -> tuple[float, float]:
    """Collective moments of the squeezed family at system size n_prime.

    The polarization fraction alpha and squeezing parameter xi2 are
    kept fixed, so <Jz> = alpha*n'/2 and Var Jx = xi2*(n'/4)*alpha^2;
    the ratio <Jz>^2/Var Jx stays exactly n'/xi2 along the family.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    if xi2 <= 0:
        raise ValueError("xi2 must be positive")
    if n_prime < 2:
        raise ValueError("n_prime must be at least 2")
    jz = 0.5 * n_prime * alpha
    var_jx = xi2 * (n_prime / 4.0) * alpha**2
    return jz, var_jx


def _plateau_mean(values: Sequence[float]) -> tuple[float, bool]:
    # Extrapolated value = mean of the last three points; the run is a
    # plateau when their spread is within 2% of that mean.
    tail = list(values[-3:])
    mean = sum(tail) / len(tail)
    if mean <= 0:
        return mean, False
    spread = (max(tail) - min(tail)) / mean
    return mean, spread <= 0.02


def _chain_n_primes(n_primes) -> tuple[int, ...]:
    primes = tuple(int(p) for p in n_primes)
    if not primes:
        raise ValueError("n_primes must be nonempty")
    if any(b >= a for a, b in zip(primes[1:], primes)):
        raise ValueError("n_primes must be strictly ascending")
    return primes


def squeezing_convergence(
    alpha: float,
    xi2: float,
    n_primes: Sequence[int],
    settings: OptimizerSettings | None = None,
    warm_start: bool = True,
) -> ScalingRun:
    """Bound per particle along the squeezed family, one run per size.

    Each point solves the symmetric-representation problem with
    constraints {<Jz>, <Jx^2> = Var Jx (with <Jx> = 0), <Jx> = 0} for
    generator Jy.  Successive runs reuse the previous multipliers as
    the starting point; the chain is sequential by construction.
    """
    primes = _chain_n_primes(n_primes)
    base = settings or OptimizerSettings()
    bounds, per_n, iters, r_opts = [], [], [], []
    certified = True
    r_prev: np.ndarray | None = None
    for n_prime in primes:
        jz, var_jx = scale_squeezing(alpha, xi2, n_prime)
        ops = build_collective(symmetric_representation(n_prime))
        cons = (
            Constraint(ops.jz, jz, "jz"),
            Constraint(ops.jx2, var_jx, "jx2"),
            Constraint(ops.jx, 0.0, "jx"),
        )
        run = base
        if warm_start and r_prev is not None:
            run = replace(base, r_init=r_prev)
        res = lower_bound_multi(
            BoundProblem(ops.jy, cons, representation="symmetric"), run
        )
        r_prev = res.r_opt
        bounds.append(res.bound)
        per_n.append(res.bound / n_prime)
        iters.append(res.iterations)
        r_opts.append(tuple(float(r) for r in res.r_opt))
        certified = certified and res.certified
    extrapolated, plateau = _plateau_mean(per_n)
    return ScalingRun(
        n_target=primes[-1],
        n_primes=primes,
        bounds=tuple(bounds),
        bounds_per_n=tuple(per_n),
        extrapolated=extrapolated,
        plateau=plateau,
        gamma=None,
        iterations=tuple(iters),
        r_opts=tuple(r_opts),
        certified=certified,
    )


# ---------------------------------------------------------------------------
# Dicke-moment symmetrization and extrapolation


def symmetrize_moments(moments: Mapping[str, float], n: int) -> tuple[float, dict[str, float]]:
    """Rescale second moments onto the symmetric sector.

    Multiplying all three second moments by gamma = J_n / sum so the
    Casimir identity sum_l <J_l^2> = (n/2)(n/2+1) holds exactly; a
    state with the rescaled moments can be fully symmetric.  gamma >= 1
    whenever the measured sum is sub-symmetric.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    try:
        second = {key: float(moments[key]) for key in ("jx2", "jy2", "jz2")}
    except KeyError as exc:
        raise ValueError(f"missing second moment {exc}") from None
    if any(v < 0 for v in second.values()):
        raise ValueError("second moments must be nonnegative")
    total = sum(second.values())
    if total <= 0:
        raise ValueError("second moments sum to zero; rescaling is undefined")
    gamma = _casimir(n) / total
    return gamma, {key: gamma * value for key, value in second.items()}


def dicke_extrapolation(
    sym_jz2: float,
    n: int,
    gamma: float,
    n_primes: Sequence[int],
    settings: OptimizerSettings | None = None,
    warm_start: bool = True,
) -> ScalingRun:
    """Per-particle bound estimate for a large Dicke-like ensemble.

    Each chain point solves the symmetric problem at size n' with
    constraints {<Jx^2>, <Jy^2>, <Jz^2>}, where <Jz^2> is held at the
    symmetrized value and <Jx^2> = <Jy^2> = (J_n' - <Jz^2>)/2 keeps the
    Casimir sum exact.  First moments are not constrained; for this
    family the optimum is unchanged by adding <J_l> = 0.  The absolute
    bound is rescaled by (1/gamma)(J_n/J_n') and divided by n; the
    result is an extrapolated estimate, never a certified bound.
    """
    if sym_jz2 < 0:
        raise ValueError("sym_jz2 must be nonnegative")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    primes = _chain_n_primes(n_primes)
    base = settings or OptimizerSettings()
    j_n = _casimir(n)
    if sym_jz2 > j_n:
        raise ValueError("sym_jz2 exceeds the Casimir sum at size n")
    bounds, per_particle, iters, r_opts = [], [], [], []
    r_prev: np.ndarray | None = None
    n_prev: int | None = None
    for n_prime in primes:
        j_np = _casimir(n_prime)
        transverse = 0.5 * (j_np - sym_jz2)
        if transverse < 0:
            raise ValueError(f"n'={n_prime} too small for <Jz^2> = {sym_jz2}")
        ops = build_collective(symmetric_representation(n_prime))
        cons = (
            Constraint(ops.jx2, transverse, "jx2"),
            Constraint(ops.jy2, transverse, "jy2"),
            Constraint(ops.jz2, sym_jz2, "jz2"),
        )
        run = base
        if warm_start and r_prev is not None:
            # The dual is exactly flat along (1,1,1): these moments sum
            # to the Casimir value while Jx^2+Jy^2+Jz^2 is a multiple of
            # the identity, so project that component out first.  In the
            # remaining gauge the first two multipliers barely move
            # along the chain while the third grows linearly with size.
            rg = np.asarray(r_prev, dtype=float) - float(np.mean(r_prev))
            warm = np.array([rg[0], rg[1], rg[2] * n_prime / n_prev])
            run = replace(base, r_init=warm)
        res = lower_bound_multi(
            BoundProblem(ops.jy, cons, representation="symmetric"), run
        )
        r_prev, n_prev = res.r_opt, n_prime
        bounds.append(res.bound)
        per_particle.append((j_n / j_np) * res.bound / (gamma * n))
        iters.append(res.iterations)
        r_opts.append(tuple(float(r) for r in res.r_opt))
    extrapolated, plateau = _plateau_mean(per_particle)
    return ScalingRun(
        n_target=n,
        n_primes=primes,
        bounds=tuple(bounds),
        bounds_per_n=tuple(per_particle),
        extrapolated=extrapolated,
        plateau=plateau,
        gamma=gamma,
        iterations=tuple(iters),
        r_opts=tuple(r_opts),
        certified=False,
    )


# ---------------------------------------------------------------------------
# Record evaluation


def _default_squeezing_chain(n: int) -> tuple[int, ...]:
    chain = []
    size = n
    while size >= 64 and len(chain) < 5:
        chain.append(size)
        size //= 2
    if not chain:
        chain.append(n)
    return tuple(sorted(chain))


def _default_dicke_chain(n: int) -> tuple[int, ...]:
    chain = tuple(p for p in (400, 600, 800, 1000) if p <= n)
    return chain or (max(2, n // 2), n)


def evaluate_record(
    rec: ExperimentRecord,
    settings: OptimizerSettings | None = None,
    n_primes: Sequence[int] | None = None,
) -> RecordResult:
    """Evaluate one record into a results row.

    Fidelity records yield certified bounds (closed form for GHZ,
    engine for Dicke).  Moment records run the scaling chain sized by
    `n_primes` (defaults depend on the family); their bound column is
    the chain's extrapolated estimate times the particle number, and
    the certificate flag survives only when the chain actually reaches
    the recorded size.
    """
    s = settings or OptimizerSettings()
    n = rec.n_qubits
    if rec.family in ("GHZ", "Dicke"):
        per_n2, sigma2 = bound_from_fidelity(rec, s)
        bound = per_n2 * n**2
        sigma = None if sigma2 is None else sigma2 * n**2
        if rec.family == "GHZ":
            representation, certified = "analytic", True
        else:
            res, representation = _dicke_fidelity_run(rec.fidelity[0], n, s)
            certified = res.certified
    elif rec.family == "SqueezedMoments":
        jz = rec.moments["jz"][0]
        var_jx = rec.moments["jx2"][0]  # <Jx> = 0 along the mean spin
        alpha = 2.0 * jz / n
        xi2 = var_jx * n / jz**2
        chain = tuple(n_primes) if n_primes is not None else _default_squeezing_chain(n)
        run = squeezing_convergence(alpha, xi2, chain, s)
        bound = run.extrapolated * n
        sigma = None
        representation = "symmetric"
        certified = run.certified and run.n_primes[-1] == n
    else:
        values = {key: rec.moments[key][0] for key in ("jx2", "jy2", "jz2")}
        gamma, sym = symmetrize_moments(values, n)
        chain = tuple(n_primes) if n_primes is not None else _default_dicke_chain(n)
        run = dicke_extrapolation(sym["jz2"], n, gamma, chain, s)
        bound = run.extrapolated * n
        sigma = None
        representation = "symmetric"
        certified = False
    return RecordResult(
        name=rec.name,
        n=n,
        family=rec.family,
        bound=bound,
        bound_sigma=sigma,
        bound_per_n=bound / n,
        bound_per_n2=bound / n**2,
        depth_k=entanglement_depth(bound, n),
        representation=representation,
        certified=certified,
    )
