"""Closed-form bounds and semi-analytic scans.

The engine in :mod:`qfibound.bound` works for arbitrary constraint sets;
this module collects the cases where the answer (or the scan protocol)
is known in closed or semi-closed form: the GHZ fidelity bound, Dicke
fidelity thresholds, the classic squeezing ratio, boundary-state families
in the (<J_z>, <J_x^2>) plane, and the redundancy check for the <J_x> = 0
constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .bound import BoundProblem, Constraint, OptimizerSettings, lower_bound_multi, lower_bound_single
from .linalg import HermitianOperator
from .spin import build_collective, dicke_state, full_representation, log_binomial, projector, symmetric_representation

__all__ = [
    "BoundaryPoint",
    "JxReductionCase",
    "JxReductionReport",
    "ScalingPoint",
    "archetype_bound",
    "boundary_scan",
    "check_jx_reduction",
    "dicke_scaling_scan",
    "dicke_threshold",
    "ghz_bound",
    "ghz_legendre_closed",
]


def ghz_bound(fidelity: float, n: int) -> float:
    """Sharp fidelity-to-QFI bound for GHZ target states.

    Returns N^2 (1 - 2F)^2 for F > 1/2 and 0 otherwise; below half
    fidelity the overlap carries no metrological witness.
    """
    f = float(fidelity)
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"fidelity {f} outside [0, 1]")
    if n < 1:
        raise ValueError("n must be a positive integer")
    if f <= 0.5:
        return 0.0
    return float(n) ** 2 * (2.0 * f - 1.0) ** 2


def ghz_legendre_closed(r: float, n: int) -> float:
    """Closed form of the inner Legendre sup for a GHZ projector constraint.

    Piecewise in the multiplier r: zero for r < 0, quadratic
    r/2 + r^2/(16 N^2) on [0, 4N^2], linear r - N^2 beyond.  Continuous
    at both knees.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    r = float(r)
    n2 = float(n) ** 2
    if r < 0.0:
        return 0.0
    if r <= 4.0 * n2:
        return 0.5 * r + r * r / (16.0 * n2)
    return r - n2


def dicke_threshold(n: int) -> float:
    """Dicke fidelity reachable by a polarized product state: C(N, N/2) / 2^N.

    Below this value the fidelity constraint cannot witness any QFI,
    so the numeric fidelity-to-bound curve leaves zero exactly here.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be a positive even integer")
    return math.exp(log_binomial(n, n // 2) - n * math.log(2.0))


def archetype_bound(jz: float, var_jx: float) -> float:
    """Classic squeezing ratio <J_z>^2 / (Delta J_x)^2."""
    if var_jx <= 0.0:
        raise ValueError(f"variance {var_jx} must be positive")
    return float(jz) ** 2 / float(var_jx)


@dataclass(frozen=True)
class BoundaryPoint:
    """One extremal state of +/-J_x^2 - mu J_z with its moments and QFI.

    ``fq`` is the exact QFI of the (pure) boundary state for phase
    generation by J_y, i.e. 4 Var(J_y); ``archetype_bound`` is the
    squeezing ratio at the same moments and is never larger.  ``gap``
    is the spectral gap above the ground state, the nondegeneracy
    certificate for the symmetric-representation computation.
    """

    mu: float
    jz: float
    jx2: float
    var_jx: float
    fq: float
    archetype_bound: float
    rel_diff: float
    gap: float
    degenerate: bool


#: Below this multiplier the maximizing branch has near-crossing ground
#: levels for odd N and the extremal-state construction breaks down.
ODD_N_MU_FLOOR = 0.5

_DEGENERACY_RTOL = 1e-10


def boundary_scan(
    n: int,
    sign: str,
    mu_values,
    mu_floor: float = ODD_N_MU_FLOOR,
) -> list[BoundaryPoint]:
    """Sweep ground states of sign*J_x^2 - mu*J_z along the moment boundary.

    Works in the symmetric representation, where these permutationally
    invariant Hamiltonians have their ground states.  Points whose
    spectral gap vanishes (relative to the spectral width) are flagged
    degenerate rather than dropped.

    The "+" branch requires mu > 0, and for odd ``n`` additionally
    mu >= ``mu_floor``: below that the two lowest levels cross and the
    ground state no longer traces the extremal moment curve.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    s = 1.0 if sign == "+" else -1.0
    mu_values = [float(m) for m in mu_values]
    if sign == "+":
        if any(m <= 0.0 for m in mu_values):
            raise ValueError("the + branch requires mu > 0")
        if n % 2 and any(m < mu_floor for m in mu_values):
            raise ValueError(
                f"odd n on the + branch needs mu >= {mu_floor}; "
                "below that the ground level is (near-)degenerate"
            )

    rep = symmetric_representation(n)
    ops = build_collective(rep)
    jx = ops.jx.matrix.real
    jz_diag = np.real(np.diag(ops.jz.matrix))
    jx2 = jx @ jx
    jy = ops.jy.matrix

    points = []
    for mu in mu_values:
        h = s * jx2 - mu * np.diag(jz_diag)
        w, v = sla.eigh(h, subset_by_index=(0, 1))
        vec = v[:, 0]
        gap = float(w[1] - w[0])
        width = max(abs(float(w[0])), abs(float(w[1])), 1.0)
        degenerate = gap <= _DEGENERACY_RTOL * width

        jz_val = float(np.dot(vec * jz_diag, vec))
        jx_val = float(vec @ jx @ vec)
        jx2_val = float(vec @ jx2 @ vec)
        var_jx = max(jx2_val - jx_val**2, 0.0)

        jyv = jy @ vec
        jy_val = float(np.real(np.vdot(vec, jyv)))
        fq = 4.0 * max(float(np.real(np.vdot(jyv, jyv))) - jy_val**2, 0.0)

        arche = jz_val**2 / var_jx if var_jx > 0.0 else 0.0
        rel = (fq - arche) / fq if fq > 0.0 else 0.0
        points.append(
            BoundaryPoint(
                mu=mu,
                jz=jz_val,
                jx2=jx2_val,
                var_jx=var_jx,
                fq=fq,
                archetype_bound=arche,
                rel_diff=rel,
                gap=gap,
                degenerate=degenerate,
            )
        )
    return points


@dataclass(frozen=True)
class JxReductionCase:
    jz: float
    jx2: float
    bound_with: float
    bound_without: float
    rel_diff: float


@dataclass(frozen=True)
class JxReductionReport:
    n: int
    cases: tuple[JxReductionCase, ...]
    max_rel_diff: float


def check_jx_reduction(
    n: int,
    samples: int,
    seed: int = 0,
    settings: OptimizerSettings | None = None,
) -> JxReductionReport:
    """Verify that the explicit <J_x> = 0 constraint is redundant.

    The bound with the extra first-moment constraint must agree with the
    bound without it: a pi rotation about z flips J_x while fixing J_z,
    J_x^2 and the QFI, so the feasible set and the dual optimum are
    unchanged.  Moment pairs are drawn along the metrologically relevant
    band: extremal states of J_x^2 - mu J_z at random mu, mixed with
    white noise of random weight, which sweeps from the boundary curve
    into the interior of the moment plane.  Relative differences use a
    unit floor in the denominator so that zero-bound pairs compare
    absolutely.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    settings = settings or OptimizerSettings(r_tolerance=1e-9)
    rng = np.random.default_rng(seed)
    rep = full_representation(n)
    ops = build_collective(rep)
    d = rep.dim
    jx2_op = HermitianOperator(ops.jx.matrix @ ops.jx.matrix)

    cases = []
    for _ in range(samples):
        mu = math.exp(rng.uniform(math.log(0.2), math.log(8.0)))
        noise = rng.uniform(0.0, 0.4)
        h = jx2_op.matrix - mu * ops.jz.matrix
        _, v = sla.eigh(h, subset_by_index=(0, 0))
        psi = v[:, 0]
        rho = (1.0 - noise) * np.outer(psi, psi.conj()) + noise * np.eye(d) / d
        jz_val = float(np.real(np.trace(rho @ ops.jz.matrix)))
        jx2_val = float(np.real(np.trace(rho @ jx2_op.matrix)))

        with_jx = lower_bound_multi(
            BoundProblem(
                generator=ops.jy,
                constraints=(
                    Constraint(ops.jz, jz_val),
                    Constraint(jx2_op, jx2_val),
                    Constraint(ops.jx, 0.0),
                ),
            ),
            settings,
        )
        without_jx = lower_bound_multi(
            BoundProblem(
                generator=ops.jy,
                constraints=(
                    Constraint(ops.jz, jz_val),
                    Constraint(jx2_op, jx2_val),
                ),
            ),
            settings,
        )
        denom = max(with_jx.bound, without_jx.bound, 1.0)
        rel = abs(with_jx.bound - without_jx.bound) / denom
        cases.append(
            JxReductionCase(
                jz=jz_val,
                jx2=jx2_val,
                bound_with=with_jx.bound,
                bound_without=without_jx.bound,
                rel_diff=rel,
            )
        )
    return JxReductionReport(
        n=n,
        cases=tuple(cases),
        max_rel_diff=max(c.rel_diff for c in cases),
    )


@dataclass(frozen=True)
class ScalingPoint:
    n: int
    fidelity: float
    bound: float
    bound_per_n2: float
    certified: bool


def dicke_scaling_scan(
    n_values,
    fidelities,
    settings: OptimizerSettings | None = None,
) -> list[ScalingPoint]:
    """Dicke fidelity bound over particle number, normalized by N^2.

    Runs the single-constraint engine on the half-excited Dicke
    projector in the symmetric representation, warm-starting each
    particle number from the previous multiplier (rescaled by N^2,
    the natural growth of the dual variable).
    """
    fidelities = [float(f) for f in fidelities]
    n_values = sorted({int(n) for n in n_values})
    base = settings or OptimizerSettings()
    points = []
    for f in fidelities:
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"fidelity {f} outside [0, 1]")
        r_prev, n_prev = None, None
        for n in n_values:
            if n % 2:
                raise ValueError("Dicke scan uses half excitation, n must be even")
            rep = symmetric_representation(n)
            ops = build_collective(rep)
            proj = projector(dicke_state(rep))
            if r_prev is not None:
                warm = r_prev * (n / n_prev) ** 2
                run = replace(base, r_init=np.array([warm]))
            else:
                run = base
            res = lower_bound_single(proj, f, ops.jy, run, representation="symmetric")
            r_prev, n_prev = float(res.r_opt[0]), n
            points.append(
                ScalingPoint(
                    n=n,
                    fidelity=f,
                    bound=res.bound,
                    bound_per_n2=res.bound / n**2,
                    certified=res.certified,
                )
            )
    return points
