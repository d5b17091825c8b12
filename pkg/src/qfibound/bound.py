"""Fisher-information lower bounds from expectation-value constraints.

For a generator A, the map W -> sup_mu lambda_max(W - 4 (A - mu)^2) is
the state-space Legendre transform of the quantum Fisher information.
Maximizing  sum_k r_k w_k  minus that transform over multipliers r then
gives the tightest F_Q bound compatible with the measured expectation
values w_k = <W_k>.

Two asymmetries drive the numerics.  The outer objective is concave in
r, so any visited r yields a valid bound and early stopping is safe.
The inner sup over mu must never be underestimated (that would inflate
the bound), so it runs on a dense grid with golden-section refinement
of the best cells, and the winner is re-checked on a 4x denser grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import numpy.linalg as npl
import scipy.linalg as sla
import scipy.sparse
from scipy.optimize import linprog, minimize

from .errors import CapacityError, InfeasibleError, ValidationFailure
from .linalg import (
    BandedHermitian,
    DensityMatrix,
    HermitianOperator,
    StateVector,
    default_start_vector,
    detect_bandwidth,
    eig_full,
    lanczos_lambda_max,
    variance,
    _as_matrix,
)

__all__ = [
    "Constraint",
    "BoundProblem",
    "OptimizerSettings",
    "BoundResult",
    "legendre_qfi",
    "lower_bound_single",
    "lower_bound_multi",
    "supergradient",
    "exact_qfi",
]

GAP_CERTIFY_TOL = 1e-8
EXACT_QFI_CAP = 1024


@dataclass(frozen=True)
class Constraint:
    """One measured expectation value: <observable> = value."""

    observable: HermitianOperator
    value: float
    name: str = ""

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("constraint value must be finite")


@dataclass(frozen=True)
class BoundProblem:
    """Generator plus the constraint set the bound is conditioned on."""

    generator: HermitianOperator
    constraints: tuple[Constraint, ...]
    representation: str | None = None

    def __post_init__(self):
        cons = tuple(self.constraints)
        if not cons:
            raise ValueError("at least one constraint is required")
        d = self.generator.dim
        for c in cons:
            if c.observable.dim != d:
                raise ValueError("constraint dimension does not match generator")
        object.__setattr__(self, "constraints", cons)

    @property
    def dim(self) -> int:
        return self.generator.dim

    @property
    def values(self) -> np.ndarray:
        return np.array([c.value for c in self.constraints])


@dataclass(frozen=True)
class OptimizerSettings:
    """Knobs for the two nested searches.

    The mu defaults are deliberately conservative: thinning the grid is
    the one change that can silently break soundness, so only do it with
    the verification pass left on.
    """

    mu_grid_points: int = 401
    mu_refine_iters: int = 60
    mu_verify_tol: float = 1e-7
    r_max_iters: int = 2000
    r_tolerance: float = 1e-7
    r_init: np.ndarray | None = None
    mu_interval: tuple[float, float] | None = None
    verify_final: bool = True
    dense_cutoff: int = 64
    gap_certify_tol: float = GAP_CERTIFY_TOL


@dataclass(frozen=True)
class BoundResult:
    """Outcome of one dual optimization.

    `bound` is clamped at zero (the trivial bound always holds); `raw`
    keeps the unclamped value for diagnostics.  `certified` says the
    value holds for arbitrary states: always true in the full
    representation, true in the symmetric one only when the top
    eigenvalue at the optimum was nondegenerate (gap above threshold).
    """

    bound: float
    raw: float
    r_opt: np.ndarray
    mu_opt: float
    top_eigvec_expectations: np.ndarray
    iterations: int
    converged: bool
    gap: float
    certified: bool
    representation: str | None = None

    @property
    def phase_precision(self) -> float:
        """Inverse-variance limit 1/bound; inf when nothing is certified."""
        return 1.0 / self.bound if self.bound > 0 else math.inf


# ---------------------------------------------------------------------------
# Constraint-operator structure detection


class _DiagPart:
    kind = "diag"

    def __init__(self, d: np.ndarray):
        self.d = np.real(np.asarray(d))
        self.norm = float(np.abs(self.d).max()) if self.d.size else 0.0
        self.extremes = (float(self.d.min()), float(self.d.max()))

    def expect(self, v: np.ndarray) -> float:
        return float(np.real(np.sum(self.d * np.abs(v) ** 2)))


class _BandPart:
    kind = "band"

    def __init__(self, banded: BandedHermitian):
        self.banded = banded
        lo = float(banded.eigvals_extreme("min", 1)[0])
        hi = float(banded.eigvals_extreme("max", 1)[0])
        self.extremes = (lo, hi)
        self.norm = max(abs(lo), abs(hi))

    def expect(self, v: np.ndarray) -> float:
        return float(np.real(np.vdot(v, self.banded.matvec(v))))


class _RankOnePart:
    kind = "rank1"

    def __init__(self, u: np.ndarray, c: float, dim: int):
        self.u = u
        self.c = c
        self.extremes = (min(0.0, c), max(0.0, c)) if dim > 1 else (c, c)
        self.norm = abs(c)

    def expect(self, v: np.ndarray) -> float:
        return self.c * float(np.abs(np.vdot(self.u, v)) ** 2)


class _DensePart:
    kind = "dense"

    def __init__(self, m: np.ndarray):
        self.m = m
        vals = npl.eigvalsh(m)
        self.extremes = (float(vals[0]), float(vals[-1]))
        self.norm = max(abs(self.extremes[0]), abs(self.extremes[1]))

    def expect(self, v: np.ndarray) -> float:
        return float(np.real(np.vdot(v, self.m @ v)))


def _try_rank_one(m: np.ndarray):
    """Detect c * u u^dag structure in O(dim^2); returns (u, c) or None."""
    scale = float(np.abs(m).max())
    if scale == 0.0:
        return None
    col_norms = npl.norm(m, axis=0)
    j = int(np.argmax(col_norms))
    u = m[:, j] / col_norms[j]
    c = float(np.real(np.vdot(u, m @ u)))
    if float(np.abs(m - c * np.outer(u, u.conj())).max()) <= 1e-12 * scale:
        return u, c
    return None


def _classify(m: np.ndarray):
    w = detect_bandwidth(m, max_w=4)
    if w == 0:
        return _DiagPart(np.diagonal(m))
    if w is not None:
        return _BandPart(BandedHermitian.from_dense(m, w))
    r1 = _try_rank_one(m)
    if r1 is not None:
        return _RankOnePart(r1[0], r1[1], m.shape[0])
    return _DensePart(m)


def _band_square(b: BandedHermitian, wmax: int) -> np.ndarray:
    """Upper-banded storage of b @ b, padded to half-bandwidth wmax."""
    n, w = b.n, b.w
    offsets = list(range(-w, w + 1))
    data = np.zeros((2 * w + 1, n), dtype=b.ab.dtype)
    for o in range(w + 1):
        diag = b.diagonal(o)
        data[w + o, o:] = diag
        if o:
            data[w - o, : n - o] = np.conj(diag)
    a = scipy.sparse.dia_matrix((data, offsets), shape=(n, n))
    c = (a @ a).todia()
    ab = np.zeros((wmax + 1, n), dtype=c.dtype)
    for k in range(min(2 * w, wmax) + 1):
        ab[wmax - k, k:] = c.diagonal(k)
    if np.iscomplexobj(ab) and not np.abs(ab.imag).max():
        ab = np.ascontiguousarray(ab.real)
    return ab


def _pad_band(b: BandedHermitian, w: int) -> np.ndarray:
    ab = np.zeros((w + 1, b.n), dtype=b.ab.dtype)
    ab[w - b.w :] = b.ab
    return ab


# ---------------------------------------------------------------------------
# Inner kernel: fhat(r) = sup_mu lambda_max(sum_k r_k W_k - 4 (A - mu)^2)


@dataclass
class _InnerResult:
    fhat: float
    mu: float
    vec: np.ndarray | None
    gap: float
    evals: int


def _top_cells(vals: np.ndarray, count: int) -> list[int]:
    """Indices of the largest grid values, skipping adjacent duplicates."""
    chosen: list[int] = []
    for idx in np.argsort(vals)[::-1][: 4 * count]:
        if all(abs(int(idx) - c) > 1 for c in chosen):
            chosen.append(int(idx))
        if len(chosen) == count:
            break
    return chosen


class _EvalKernel:
    def __init__(self, generator: HermitianOperator, observables, settings: OptimizerSettings):
        a = generator.matrix
        self.dim = a.shape[0]
        self.settings = settings
        self.parts = [_classify(_as_matrix(w)) for w in observables]
        for k, p in enumerate(self.parts):
            if p.norm == 0.0:
                raise ValueError(f"constraint observable {k} is the zero operator")
        self.scales = np.array([p.norm for p in self.parts])

        wa = detect_bandwidth(a, max_w=4)
        if wa is not None:
            self.a_band = BandedHermitian.from_dense(a, wa)
            self.a_extremes = (
                float(self.a_band.eigvals_extreme("min", 1)[0]),
                float(self.a_band.eigvals_extreme("max", 1)[0]),
            )
        else:
            self.a_band = None
            vals = npl.eigvalsh(a)
            self.a_extremes = (float(vals[0]), float(vals[-1]))
        self.interval = settings.mu_interval or self.a_extremes
        if self.interval[0] > self.interval[1]:
            raise ValueError("empty mu interval")

        structured = (
            self.a_band is not None
            and self.dim > settings.dense_cutoff
            and all(p.kind in ("diag", "band", "rank1") for p in self.parts)
        )
        self.mode = "lanczos" if structured else "dense"
        if self.mode == "dense":
            self.a_dense = np.asarray(a)
            a2 = a @ a
            if np.iscomplexobj(a2) and not np.abs(a2.imag).max():
                a2 = np.ascontiguousarray(a2.real)
            self.a2_dense = a2
            self.w_dense = [self._part_dense(p) / s for p, s in zip(self.parts, self.scales)]
        else:
            wa2 = 2 * self.a_band.w
            wmax = max([wa2] + [p.banded.w for p in self.parts if p.kind == "band"])
            self.width = wmax
            n = self.dim
            self.a_bands = _pad_band(self.a_band, wmax)
            self.a2_bands = _band_square(self.a_band, wmax)
            self.w_bands: list[np.ndarray | None] = []
            self.w_rank1: list[tuple[int, np.ndarray, float]] = []
            for k, p in enumerate(self.parts):
                s = self.scales[k]
                if p.kind == "rank1":
                    self.w_rank1.append((k, p.u, p.c / s))
                    self.w_bands.append(None)
                elif p.kind == "diag":
                    ab = np.zeros((wmax + 1, n))
                    ab[wmax] = p.d / s
                    self.w_bands.append(ab)
                else:
                    self.w_bands.append(_pad_band(p.banded, wmax) / s)
            self.is_complex = (
                np.iscomplexobj(self.a_bands)
                or any(b is not None and np.iscomplexobj(b) for b in self.w_bands)
                or any(np.iscomplexobj(u) for _, u, _ in self.w_rank1)
            )
            # With no rank-one parts the dual operator is purely banded
            # and LAPACK bisection beats restarted Lanczos on the sweep.
            self.banded_direct = not self.w_rank1

        # F_Q never exceeds the squared spectral spread of the generator; a
        # dual objective crossing that cap certifies the constraints infeasible.
        spread = self.a_extremes[1] - self.a_extremes[0]
        self.fq_cap = spread * spread

    def _part_dense(self, p) -> np.ndarray:
        if p.kind == "diag":
            return np.diag(p.d)
        if p.kind == "band":
            return p.banded.to_dense()
        if p.kind == "rank1":
            return p.c * np.outer(p.u, p.u.conj())
        return p.m

    def check_feasible_box(self, values: np.ndarray):
        """Necessary feasibility: each value inside its observable's spectrum."""
        for k, p in enumerate(self.parts):
            lo, hi = p.extremes
            slack = 1e-9 * max(1.0, p.norm)
            if not (lo - slack <= values[k] <= hi + slack):
                raise InfeasibleError(
                    f"constraint {k}: value {values[k]} outside spectral range [{lo:.6g}, {hi:.6g}]"
                )

    # -- dense path -------------------------------------------------------

    def _dense_base(self, r: np.ndarray) -> np.ndarray:
        cplx = np.iscomplexobj(self.a2_dense) or any(np.iscomplexobj(w) for w in self.w_dense)
        base = (-4.0 * self.a2_dense).astype(np.complex128 if cplx else np.float64)
        for rk, w in zip(r, self.w_dense):
            if rk:
                base = base + rk * w
        return base

    def _dense_grid_vals(self, base: np.ndarray, mus: np.ndarray) -> np.ndarray:
        d = self.dim
        vals = np.empty(mus.shape[0])
        chunk = max(1, int(3e7 // max(d * d, 1)))
        eye = np.eye(d, dtype=base.dtype)
        for i in range(0, mus.shape[0], chunk):
            mu = mus[i : i + chunk]
            stack = base[None, :, :] + (8.0 * mu)[:, None, None] * self.a_dense[None, :, :]
            stack -= (4.0 * mu * mu)[:, None, None] * eye[None, :, :]
            vals[i : i + chunk] = npl.eigvalsh(stack)[:, -1]
        return vals

    def _dense_at(self, base: np.ndarray, mu: float, want_vector: bool):
        m = base + 8.0 * mu * self.a_dense - 4.0 * mu * mu * np.eye(self.dim, dtype=base.dtype)
        if want_vector:
            w, v = npl.eigh(m)
            gap = float(w[-1] - w[-2]) if self.dim > 1 else math.inf
            return float(w[-1]), v[:, -1], gap
        w = npl.eigvalsh(m)
        return float(w[-1]), None, math.nan

    # -- softmax smoothing (dense mode only) --------------------------------

    def smooth_eval(self, r: np.ndarray, tau: float):
        """Free-energy smoothed inner sup and its exact gradient data.

        Replaces sup_mu lambda_max with the log-sum-exp over the joint
        (mu grid x spectrum) ensemble.  Smoothing the eigenvalues alone
        is not enough: where the argmax over mu is degenerate (r = 0 is
        the worst case, every eigenvalue of the generator ties) a hard
        branch choice keeps the kink and strands line searches.  The
        joint form is log-trace-exp of an affine Hermitian family summed
        over a fixed grid, hence analytic and convex in r, and its exact
        gradient is the ensemble-weighted expectation of the constraint
        operators.  It overestimates the grid maximum by at most
        tau*log(dim*npts); the optimum found here is only a starting
        point, the returned bound is always re-derived exactly.

        Returns (value, heaviest mu, ensemble-weighted expectations).
        """
        if self.mode != "dense":
            raise ValueError("smoothing needs the dense evaluation path")
        s = self.settings
        npts = max(85, s.mu_grid_points // 3)
        lo, hi = self.interval
        mus = np.linspace(lo, hi, npts) if hi > lo else np.array([lo])
        base = self._dense_base(r)
        d = self.dim
        eye = np.eye(d, dtype=base.dtype)

        evals = np.empty((mus.size, d))
        chunk = max(1, int(3e7 // max(d * d, 1)))
        for i in range(0, mus.size, chunk):
            mu = mus[i : i + chunk]
            stack = base[None, :, :] + (8.0 * mu)[:, None, None] * self.a_dense[None, :, :]
            stack -= (4.0 * mu * mu)[:, None, None] * eye[None, :, :]
            evals[i : i + chunk] = npl.eigvalsh(stack)

        top = float(evals.max())
        value = top + tau * math.log(float(np.exp((evals - top) / tau).sum()))
        # Weights sum to one by construction; eigenvectors are only needed
        # where a grid cell carries non-negligible mass (a handful of cells
        # once tau is small).
        cell_mass = np.exp((evals - value) / tau).sum(axis=1)
        expect = np.zeros(len(self.w_dense))
        for idx in np.argsort(cell_mass)[::-1]:
            if cell_mass[idx] < 1e-13:
                break
            mu = float(mus[idx])
            m = base + 8.0 * mu * self.a_dense - 4.0 * mu**2 * eye
            w, v = npl.eigh(m)
            p = np.exp((w - value) / tau)
            expect += np.array(
                [np.einsum("j,ij,ij->", p, v.conj(), wn @ v).real for wn in self.w_dense]
            )
        best_mu = float(mus[int(cell_mass.argmax())])
        return value, best_mu, expect

    # -- lanczos path -------------------------------------------------------

    def _lanczos_bands(self, r: np.ndarray, mu: float) -> BandedHermitian:
        ab = -4.0 * self.a2_bands + (8.0 * mu) * self.a_bands
        if self.is_complex and not np.iscomplexobj(ab):
            ab = ab.astype(np.complex128)
        ab[self.width] = ab[self.width] - 4.0 * mu * mu
        for rk, wb in zip(r, self.w_bands):
            if wb is not None and rk:
                ab = ab + rk * wb
        return BandedHermitian(ab)

    def _lanczos_at(self, r: np.ndarray, mu: float, v0, rank1):
        banded = self._lanczos_bands(r, mu)
        lo, hi = banded.gershgorin()
        dtype = np.complex128 if self.is_complex else np.float64
        if rank1:
            extra = sum(abs(c) for _, _, c in rank1)

            def mv(x):
                y = banded.matvec(x)
                for _, u, c in rank1:
                    y = y + c * np.vdot(u, x) * u
                return y

            return lanczos_lambda_max(mv, self.dim, (lo - extra, hi + extra), v0=v0, dtype=dtype)
        return lanczos_lambda_max(banded.matvec, self.dim, (lo, hi), v0=v0, dtype=dtype)

    def _banded_top_value(self, r: np.ndarray, mu: float) -> float:
        b = self._lanczos_bands(r, mu)
        val = sla.eigvals_banded(b.ab, lower=False, select="i", select_range=(b.n - 1, b.n - 1))
        return float(val[0])

    def _banded_top_pair(self, r: np.ndarray, mu: float, v0=None):
        """Top eigenpair of the banded dual: bisection plus inverse iteration.

        The shifted system sigma*I - M is positive definite for any
        sigma above the top eigenvalue, so each iteration is one banded
        Cholesky solve.  A cluster at the top only mixes the iterate
        within the top eigenspace, which every caller accepts; the
        residual check below still certifies the pair.
        """
        b = self._lanczos_bands(r, mu)
        lam = float(
            sla.eigvals_banded(b.ab, lower=False, select="i", select_range=(b.n - 1, b.n - 1))[0]
        )
        lo, hi = b.gershgorin()
        scale = max(1.0, abs(lo), abs(hi))
        v = v0 if v0 is not None else default_start_vector(b.n)
        if self.is_complex and not np.iscomplexobj(v):
            v = v.astype(np.complex128)
        eps = 1e-10 * scale
        for _ in range(3):  # widen the shift if the factorization fails
            ab_shift = -b.ab.astype(np.complex128 if self.is_complex else np.float64)
            ab_shift[b.w] = ab_shift[b.w] + (lam + eps)
            try:
                cur = v
                for _ in range(6):
                    cur = sla.solveh_banded(ab_shift, cur, lower=False)
                    nrm = float(npl.norm(cur))
                    if not math.isfinite(nrm) or nrm == 0.0:
                        raise np.linalg.LinAlgError("inverse iteration collapsed")
                    cur = cur / nrm
                    if float(npl.norm(b.matvec(cur) - lam * cur)) <= 1e-9 * scale:
                        return lam, cur
            except np.linalg.LinAlgError:
                pass
            eps *= 100.0
        return self._lanczos_at(r, mu, v0, [])

    def _banded_gap(self, r: np.ndarray, mu: float) -> float:
        b = self._lanczos_bands(r, mu)
        vals = sla.eigvals_banded(b.ab, lower=False, select="i", select_range=(b.n - 2, b.n - 1))
        return float(vals[1] - vals[0])

    def _lanczos_gap(self, r: np.ndarray, mu: float, val: float, vec: np.ndarray, rank1) -> float:
        # second eigenvalue by deflating the converged top vector
        banded = self._lanczos_bands(r, mu)
        lo, hi = banded.gershgorin()
        extra = sum(abs(c) for _, _, c in rank1) if rank1 else 0.0
        shift = (hi + extra) - (lo - extra) + 1.0

        def mv(x):
            y = banded.matvec(x)
            for _, u, c in rank1:
                y = y + c * np.vdot(u, x) * u
            y = y - shift * (np.vdot(vec, x) * vec)
            return y

        dtype = np.complex128 if self.is_complex else np.float64
        second, _ = lanczos_lambda_max(mv, self.dim, (lo - extra - shift, hi + extra), dtype=dtype)
        return float(val - second)

    # -- sup over mu ---------------------------------------------------------

    def inner_sup(
        self,
        r: np.ndarray,
        grid_points: int | None = None,
        want_vector: bool = True,
        want_gap: bool = False,
    ) -> _InnerResult:
        s = self.settings
        refine_iters = s.mu_refine_iters
        ncells = 3
        if grid_points is not None:
            npts = grid_points
        elif self.mode == "dense":
            npts = s.mu_grid_points
        else:
            # Iterative-path search evaluations: a thin scan of the best
            # cell locates the right basin and the refined value only
            # steers the outer search; the returned result is always
            # re-derived on the full grid with the 4x verification pass
            # behind it.
            npts = max(51, s.mu_grid_points // 8)
            refine_iters = min(refine_iters, 20)
            ncells = 1
        lo, hi = self.interval
        mus = np.linspace(lo, hi, npts) if hi > lo else np.array([lo])
        evals = 0

        if self.mode == "dense":
            base = self._dense_base(r)
            vals = self._dense_grid_vals(base, mus)
            evals += mus.size
            vecs = None

            def f(mu, _v0=None):
                v, _, _ = self._dense_at(base, mu, want_vector=False)
                return v, None
        elif self.banded_direct:
            rank1 = []
            vals = np.array([self._banded_top_value(r, mu) for mu in mus])
            vecs = None
            evals += mus.size

            def f(mu, _v0=None):
                return self._banded_top_value(r, mu), None
        else:
            rank1 = [(k, u, r[k] * c) for k, u, c in self.w_rank1 if r[k] * c]
            vals = np.empty(mus.size)
            vecs = [None] * mus.size
            v0 = None
            for i, mu in enumerate(mus):
                val, vec = self._lanczos_at(r, mu, v0, rank1)
                vals[i] = val
                vecs[i] = vec
                v0 = vec
            evals += mus.size

            def f(mu, _v0=None):
                return self._lanczos_at(r, mu, _v0, rank1)

        top = int(vals.argmax())
        best_val = float(vals[top])
        best_mu = float(mus[top])
        best_vec = None if vecs is None else vecs[top]

        if mus.size >= 3 and refine_iters > 0:
            for idx in _top_cells(vals, ncells):
                a = float(mus[max(idx - 1, 0)])
                b = float(mus[min(idx + 1, mus.size - 1)])
                seed = None if vecs is None else vecs[idx]
                val, mu, vec, n = _golden_max(f, a, b, refine_iters, seed)
                evals += n
                if val > best_val:
                    best_val, best_mu, best_vec = val, mu, vec

        gap = math.nan
        if want_vector or want_gap:
            if self.mode == "dense":
                val2, best_vec, gap = self._dense_at(self._dense_base(r), best_mu, want_vector=True)
                best_val = max(best_val, val2)
                evals += 1
            elif self.banded_direct:
                val2, best_vec = self._banded_top_pair(r, best_mu, best_vec)
                best_val = max(best_val, val2)
                evals += 1
                if want_gap:
                    gap = self._banded_gap(r, best_mu)
                    evals += 1
            else:
                val2, best_vec = self._lanczos_at(r, best_mu, best_vec, rank1)
                best_val = max(best_val, val2)
                evals += 1
                if want_gap:
                    gap = self._lanczos_gap(r, best_mu, best_val, best_vec, rank1)
                    evals += 1
        return _InnerResult(best_val, best_mu, best_vec, gap, evals)

    def expectations(self, vec: np.ndarray) -> np.ndarray:
        """<W_k> in original (unnormalized) scale."""
        return np.array([p.expect(vec) for p in self.parts])

    def normalized_gradient(self, wt: np.ndarray, vec: np.ndarray) -> np.ndarray:
        return wt - self.expectations(vec) / self.scales


def _golden_max(f, a: float, b: float, iters: int, seed_vec):
    """Golden-section maximization on [a, b]; f returns (value, vector)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    h = b - a
    if h <= 0:
        val, vec = f(a, seed_vec)
        return val, a, vec, 1
    x1, x2 = b - invphi * h, a + invphi * h
    f1, v1 = f(x1, seed_vec)
    f2, v2 = f(x2, v1 if v1 is not None else seed_vec)
    n = 2
    best = (f1, x1, v1) if f1 >= f2 else (f2, x2, v2)
    for _ in range(max(iters - 2, 0)):
        if f1 < f2:
            a, x1, f1, v1 = x1, x2, f2, v2
            h = b - a
            x2 = a + invphi * h
            f2, v2 = f(x2, v1 if v1 is not None else seed_vec)
        else:
            b, x2, f2, v2 = x2, x1, f1, v1
            h = b - a
            x1 = b - invphi * h
            f1, v1 = f(x1, v2 if v2 is not None else seed_vec)
        n += 1
        cand = (f1, x1, v1) if f1 >= f2 else (f2, x2, v2)
        if cand[0] > best[0]:
            best = cand
        if h < 1e-14 * max(1.0, abs(a) + abs(b)):
            break
    return best[0], best[1], best[2], n


# ---------------------------------------------------------------------------
# Dual optimization driver


class _DualSearch:
    """Shared state for the outer maximization over multipliers r.

    Everything runs in normalized coordinates (each observable scaled
    to unit operator norm); best-visited points are tracked so that an
    interrupted search still reports a valid bound.
    """

    def __init__(self, kern: _EvalKernel, wt: np.ndarray, settings: OptimizerSettings):
        self.kern = kern
        self.wt = wt
        self.settings = settings
        self.evals = 0
        self.best_obj = -math.inf
        self.best_r: np.ndarray | None = None
        self.best_inner: _InnerResult | None = None

    def evaluate(self, r: np.ndarray, want_vector: bool = True):
        if self.evals >= self.settings.r_max_iters:
            raise _BudgetExhausted
        self.evals += 1
        inner = self.kern.inner_sup(np.asarray(r, dtype=float), want_vector=want_vector)
        obj = float(np.dot(r, self.wt) - inner.fhat)
        if obj > self.kern.fq_cap * (1.0 + 1e-6) + 1e-6:
            raise InfeasibleError(
                f"dual objective {obj:.6g} exceeds the generator spread cap "
                f"{self.kern.fq_cap:.6g}; constraint set is infeasible"
            )
        if obj > self.best_obj:
            self.best_obj = obj
            self.best_r = np.asarray(r, dtype=float).copy()
            self.best_inner = inner if inner.vec is not None else None
        return obj, inner

    def gradient_at_best(self) -> np.ndarray:
        if self.best_inner is None or self.best_inner.vec is None:
            self.best_inner = self.kern.inner_sup(self.best_r, want_vector=True)
            self.evals += 1
        return self.kern.normalized_gradient(self.wt, self.best_inner.vec)

    def ftol(self) -> float:
        # Objective-scaled tolerance.  The dual optimum is never below
        # obj(0) = 0, so only a positive incumbent may grow the scale; a
        # hugely negative one (bad warm start) must not loosen the tests.
        return self.settings.r_tolerance * (1.0 + max(0.0, self.best_obj))


class _BudgetExhausted(Exception):
    pass


def _ascent(search: _DualSearch, r0: np.ndarray, max_iters: int) -> tuple[str, float]:
    """Adaptive-step supergradient ascent.

    Returns (exit reason, last gradient norm).  "gradient" means proper
    stationarity; "stall" and "step_floor" are how nonsmooth kinks
    (degenerate top eigenvalue) manifest; "cap" means the phase budget
    ran out.  The caller follows all three up with exact line searches.
    """
    try:
        obj, inner = search.evaluate(r0)
    except _BudgetExhausted:
        return "budget", math.inf
    r = np.asarray(r0, dtype=float).copy()
    alpha = 0.5
    stall = 0
    used = 1
    last_best = search.best_obj
    while True:
        g = search.kern.normalized_gradient(search.wt, inner.vec)
        gn = float(npl.norm(g))
        if gn <= search.ftol():
            return "gradient", gn
        if used >= max_iters:
            return "cap", gn
        try:
            cobj, cinner = search.evaluate(r + alpha * g)
        except _BudgetExhausted:
            return "budget", gn
        used += 1
        if cobj > obj + 1e-15:
            r = r + alpha * g
            obj, inner = cobj, cinner
            alpha *= 1.4
        else:
            alpha *= 0.5
            if alpha * gn < 1e-13 * max(1.0, float(npl.norm(r))):
                return "step_floor", gn
        if search.best_obj - last_best <= search.ftol():
            stall += 1
            if stall >= 12:
                return "stall", gn
        else:
            stall = 0
            last_best = search.best_obj


def _lbfgs_polish(search: _DualSearch, max_evals: int, r_start: np.ndarray | None = None) -> bool:
    """Quasi-Newton stage from the incumbent, using the analytic supergradient.

    The dual objective is concave and differentiable wherever the inner top
    eigenvalue is simple, which is the generic situation, and there L-BFGS
    converges fast even on badly conditioned ridges.  Along recession rays
    (constraint sets only attainable in a limit) its relative-decrease exit
    fires once further growth of r stops paying.  At kinks its line search
    can fail; the caller then falls through to the simplex stage.  Returns
    True when the optimizer terminated on its own tolerances.
    """
    r0 = search.best_r if r_start is None else r_start
    if r0 is None or max_evals < 5:
        return False

    def neg_with_grad(rv):
        try:
            obj, inner = search.evaluate(np.asarray(rv))
        except _BudgetExhausted:
            raise StopIteration
        g = search.kern.normalized_gradient(search.wt, inner.vec)
        return -obj, -g

    gtol = search.ftol()
    try:
        res = minimize(
            neg_with_grad,
            r0,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxfun": max_evals,
                "ftol": search.settings.r_tolerance,
                "gtol": gtol,
                "maxcor": 20,
            },
        )
    except StopIteration:
        return False
    return bool(res.success)


def _smooth_stage(search: _DualSearch) -> float | None:
    """Homotopy over decreasing softmax temperatures (dense mode only).

    Each stage maximizes the smoothed dual, which is concave and smooth,
    so L-BFGS is reliable there even where the exact objective has kinks
    from degenerate top eigenvalues or mu branch switches.  The final
    temperature leaves an offset of at most tau*log(dim*grid); the exact
    optimizer then starts from a point that close to the true optimum.
    Returns the exact objective recorded at the homotopy point, or None
    off the dense path.
    """
    kern, s = search.kern, search.settings
    if kern.mode != "dense" or search.best_r is None:
        return None
    scale = max(1.0, kern.fq_cap)
    r_cur = search.best_r.copy()
    for tau_rel in (1e-3, 1e-5, 1e-7):
        tau = tau_rel * scale

        def neg_smooth(rv):
            if search.evals >= s.r_max_iters:
                raise StopIteration
            search.evals += 1
            val, _, expect = kern.smooth_eval(np.asarray(rv), tau)
            obj = float(np.dot(rv, search.wt) - val)
            # The smoothed value overestimates the exact inner sup, so
            # this objective underestimates the exact dual; exceeding
            # the spread cap is a sound infeasibility certificate and
            # stops divergent rays before their matrices overflow.
            if obj > kern.fq_cap * (1.0 + 1e-6) + 1e-6:
                raise InfeasibleError(
                    f"smoothed dual objective {obj:.6g} exceeds the generator "
                    f"spread cap {kern.fq_cap:.6g}; constraint set is infeasible"
                )
            return -obj, -(search.wt - expect)

        try:
            res = minimize(
                neg_smooth,
                r_cur,
                jac=True,
                method="L-BFGS-B",
                options={
                    "maxfun": max(s.r_max_iters - search.evals, 1),
                    "ftol": 0.01 * tau_rel,
                    "gtol": 0.01 * tau_rel * scale,
                    "maxcor": 20,
                    "maxls": 60,
                },
            )
        except StopIteration:
            break
        r_cur = np.asarray(res.x, dtype=float)
    try:
        obj, _ = search.evaluate(r_cur)
        return obj
    except _BudgetExhausted:
        return None


def _bundle_polish(search: _DualSearch, max_evals: int) -> bool:
    """Cutting-plane endgame with a box trust region.

    Supergradient cuts overestimate the concave dual everywhere, so the
    LP model's maximum inside the box upper-bounds the true one.  Once
    the modeled gain over the incumbent drops below tolerance with the
    box slack, no point can beat the incumbent by more than that, and
    the stage reports convergence; this certificate is what the smooth
    optimizers cannot give at kinks, where their line searches die.
    Null steps keep their cuts, folding the model around a kink until
    it is resolved; recession rays (suprema approached only in a limit)
    show up as an ever-ascending model and geometric box growth.
    """
    r = search.best_r
    if r is None or max_evals < 3:
        return False
    try:
        obj, inner = search.evaluate(r)
    except _BudgetExhausted:
        return False
    if inner.vec is None:
        return False
    r = r.copy()
    best = obj
    cuts_r = [r.copy()]
    cuts_o = [obj]
    cuts_g = [search.kern.normalized_gradient(search.wt, inner.vec)]
    k = r.size
    delta = 0.1 * max(1.0, float(npl.norm(r)))
    widened = 0
    for _ in range(max_evals):
        tol = search.ftol()
        m = len(cuts_r)
        g_mat = np.asarray(cuts_g)
        # maximize t - eps |y|_1  s.t.  t <= o_i + g_i.(r + y - r_i),
        # |y|_inf <= delta, with y split into nonnegative parts.  The
        # tiny l1 term picks the smallest step among degenerate optima;
        # without it, exactly flat dual directions (constraint sets
        # whose weighted sum is a multiple of the identity) push y to a
        # box corner and the iterate drifts along the flat ray.  The
        # penalty understates the model maximum by at most
        # eps * k * delta = 0.1 tol, absorbed in the certificate slack.
        eps = 0.1 * tol / (k * delta)
        cost = np.concatenate([np.full(2 * k, eps), [-1.0]])
        a_ub = np.hstack([-g_mat, g_mat, np.ones((m, 1))])
        b_ub = np.array([cuts_o[i] + cuts_g[i] @ (r - cuts_r[i]) for i in range(m)])
        lp = linprog(
            cost,
            A_ub=a_ub,
            b_ub=b_ub,
            bounds=[(0.0, delta)] * (2 * k) + [(None, None)],
            method="highs",
        )
        if not lp.success:
            return False
        y = lp.x[:k] - lp.x[k : 2 * k]
        model_gain = float(lp.x[-1]) - best
        boxed = float(np.abs(y).max()) >= delta * (1.0 - 1e-9)
        if model_gain <= tol:
            if not boxed or widened >= 8:
                return True
            delta *= 4.0
            widened += 1
            continue
        try:
            cobj, cinner = search.evaluate(r + y)
        except _BudgetExhausted:
            return False
        if cinner.vec is None:
            return False
        cuts_r.append(r + y)
        cuts_o.append(cobj)
        cuts_g.append(search.kern.normalized_gradient(search.wt, cinner.vec))
        if len(cuts_r) > 60:
            del cuts_r[0], cuts_o[0], cuts_g[0]
        if cobj > best:
            serious = cobj - best >= 0.3 * model_gain
            r = cuts_r[-1]
            best = cobj
            if serious and boxed:
                delta *= 2.0
        else:
            delta *= 0.5
            if delta <= 1e-13 * max(1.0, float(npl.norm(r))):
                return True
    return False


def _finish(search: _DualSearch, prob_values, representation, converged: bool) -> BoundResult:
    kern, s = search.kern, search.settings
    r_best = search.best_r
    final = kern.inner_sup(r_best, grid_points=s.mu_grid_points, want_vector=True, want_gap=True)
    raw = float(np.dot(r_best, search.wt) - final.fhat)
    if s.verify_final:
        dense = kern.inner_sup(r_best, grid_points=4 * s.mu_grid_points, want_vector=False)
        growth = dense.fhat - final.fhat
        if growth > s.mu_verify_tol * max(1.0, abs(final.fhat)):
            raise ValidationFailure(
                f"mu verification pass found a larger inner sup (growth {growth:.3e}); "
                "the mu grid is too coarse for this problem"
            )
        if growth > 0:
            raw = float(np.dot(r_best, search.wt) - dense.fhat)
    gap = final.gap
    certified = representation != "symmetric" or (
        math.isfinite(gap) and gap > s.gap_certify_tol * max(1.0, abs(final.fhat))
    )
    return BoundResult(
        bound=max(raw, 0.0),
        raw=raw,
        r_opt=r_best / kern.scales,
        mu_opt=final.mu,
        top_eigvec_expectations=kern.expectations(final.vec),
        iterations=search.evals,
        converged=converged,
        gap=gap,
        certified=certified,
        representation=representation,
    )


def lower_bound_multi(problem: BoundProblem, settings: OptimizerSettings | None = None) -> BoundResult:
    """Maximize  sum_k r_k w_k - fhat(sum_k r_k W_k)  over r in R^K."""
    s = settings or OptimizerSettings()
    if not isinstance(problem, BoundProblem):
        raise ValueError("expected a BoundProblem")
    kern = _EvalKernel(problem.generator, [c.observable for c in problem.constraints], s)
    values = problem.values
    kern.check_feasible_box(values)
    wt = values / kern.scales
    search = _DualSearch(kern, wt, s)

    if s.r_init is not None:
        arr = np.asarray(s.r_init, dtype=float)
        if arr.shape != wt.shape:
            raise ValueError("r_init length does not match constraint count")
        r0 = arr * kern.scales  # original -> normalized
    else:
        r0 = np.zeros_like(wt)

    cap_a = 10 if kern.mode == "dense" else 25 + 10 * wt.size
    if s.r_init is not None:
        # Warm starts sit near the optimum already; hand over to the
        # quasi-Newton stage after a sanity check instead of crawling.
        cap_a = min(cap_a, 4)
        if np.any(r0):
            # Anchor at r = 0 (objective there is exactly 0) so a bad
            # warm start can never leave the incumbent hugely negative.
            try:
                search.evaluate(np.zeros_like(wt))
            except _BudgetExhausted:
                pass
    reason, last_gn = _ascent(search, r0, cap_a)
    converged = reason == "gradient"
    if not converged and reason != "budget":
        # Accelerator first (temperature homotopy where smooth evals are
        # cheap, exact quasi-Newton otherwise), then the cutting-plane
        # endgame, which closes kink gaps the smooth stages cannot and
        # certifies the incumbent.  Deterministic throughout, so paired
        # problems with the same optimum land on the same value.
        if kern.mode == "dense":
            _smooth_stage(search)
        else:
            _lbfgs_polish(search, s.r_max_iters - search.evals)
        converged = _bundle_polish(search, s.r_max_iters - search.evals)
    if not converged:
        last_gn = float(npl.norm(search.gradient_at_best()))
        if last_gn <= 10.0 * search.ftol():
            converged = True
    return _finish(search, values, problem.representation, converged)


def lower_bound_single(
    observable,
    value: float,
    generator,
    settings: OptimizerSettings | None = None,
    representation: str | None = None,
) -> BoundResult:
    """One-constraint bound via sign bisection on the scalar supergradient.

    The dual objective r*w - fhat(r W) is concave in the single scalar
    r and its supergradient w - <W> is nonincreasing, so bracketing plus
    bisection converges fast; every probe is itself a valid bound.
    """
    s = settings or OptimizerSettings()
    gen = generator if isinstance(generator, HermitianOperator) else HermitianOperator(generator)
    wop = observable if isinstance(observable, HermitianOperator) else HermitianOperator(observable)
    kern = _EvalKernel(gen, [wop], s)
    kern.check_feasible_box(np.array([float(value)]))
    wt = np.array([float(value) / kern.scales[0]])
    search = _DualSearch(kern, wt, s)

    def grad_at(r: float):
        obj, inner = search.evaluate(np.array([r]))
        return obj, float(kern.normalized_gradient(wt, inner.vec)[0])

    r_start = 0.0
    if s.r_init is not None:
        arr = np.atleast_1d(np.asarray(s.r_init, dtype=float))
        if arr.size != 1:
            raise ValueError("r_init length does not match constraint count")
        r_start = float(arr[0]) * kern.scales[0]  # original -> normalized

    converged = False
    try:
        obj0, g0 = grad_at(r_start)
        if abs(g0) <= s.r_tolerance:
            converged = True
        else:
            direction = 1.0 if g0 > 0 else -1.0
            step = max(1.0, 0.25 * abs(r_start))
            edge = r_start  # invariant: supergradient has the sign of `direction` here
            prev, plateau = obj0, 0
            bracket = None
            while True:
                cand = edge + direction * step
                obj, g = grad_at(cand)
                if g * direction <= 0:
                    bracket = (edge, cand) if direction > 0 else (cand, edge)
                    break
                if obj - prev <= s.r_tolerance * max(1.0, abs(obj)) and obj >= prev:
                    plateau += 1
                    if plateau >= 2:
                        converged = True  # asymptotic ray, objective flat
                        break
                else:
                    plateau = 0
                prev = obj
                edge = cand
                step *= 2.0
            if bracket is not None:
                # supergradient is nonincreasing in r: >= 0 at lo, <= 0 at hi
                lo, hi = bracket
                while hi - lo > s.r_tolerance * max(1.0, abs(lo), abs(hi)):
                    mid = 0.5 * (lo + hi)
                    _, g = grad_at(mid)
                    if g > 0:
                        lo = mid
                    else:
                        hi = mid
                converged = True
    except _BudgetExhausted:
        converged = False

    return _finish(search, np.array([float(value)]), representation, converged)


def supergradient(problem: BoundProblem, r, settings: OptimizerSettings | None = None) -> np.ndarray:
    """w - <W>_psi at the inner optimum: a supergradient of the concave dual.

    `r` is in original (unnormalized) multiplier units, matching
    BoundResult.r_opt.
    """
    s = settings or OptimizerSettings()
    kern = _EvalKernel(problem.generator, [c.observable for c in problem.constraints], s)
    r = np.asarray(r, dtype=float)
    if r.shape != (len(problem.constraints),):
        raise ValueError("multiplier length does not match constraint count")
    inner = kern.inner_sup(r * kern.scales, want_vector=True)
    return problem.values - kern.expectations(inner.vec)


def legendre_qfi(
    w_op,
    generator,
    settings: OptimizerSettings | None = None,
    mu_interval: tuple[float, float] | None = None,
) -> float:
    """sup_mu lambda_max(W - 4 (A - mu)^2): the transform the dual rests on."""
    s = settings or OptimizerSettings()
    if mu_interval is not None:
        s = replace(s, mu_interval=mu_interval)
    gen = generator if isinstance(generator, HermitianOperator) else HermitianOperator(generator)
    wop = w_op if isinstance(w_op, HermitianOperator) else HermitianOperator(w_op)
    kern = _EvalKernel(gen, [wop], s)
    res = kern.inner_sup(np.array([kern.scales[0]]), want_vector=False)
    return res.fhat


def exact_qfi(state, generator, cap: int = EXACT_QFI_CAP) -> float:
    """Quantum Fisher information, exact spectral formula.

    Pure states reduce to 4 * variance; mixed states use
    2 sum_{ij} (p_i - p_j)^2 / (p_i + p_j) |<i|A|j>|^2 over pairs with
    p_i + p_j > 0.
    """
    gen = generator if isinstance(generator, HermitianOperator) else HermitianOperator(generator)
    if isinstance(state, StateVector):
        return 4.0 * variance(gen, state)
    if not isinstance(state, DensityMatrix):
        arr = np.asarray(state)
        if arr.ndim == 1:
            return 4.0 * variance(gen, StateVector(arr))
        state = DensityMatrix(arr)
    if state.dim > cap:
        raise CapacityError(f"exact_qfi dimension {state.dim} exceeds cap {cap}")
    p, v = eig_full(state.matrix, cap=cap)
    p = np.clip(p, 0.0, None)
    a = v.conj().T @ gen.matrix @ v
    ps = p[:, None] + p[None, :]
    diff = p[:, None] - p[None, :]
    mask = ps > 1e-12
    w = np.zeros_like(ps)
    w[mask] = (diff[mask] ** 2) / ps[mask]
    return float(2.0 * np.sum(w * np.abs(a) ** 2))
