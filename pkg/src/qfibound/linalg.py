"""Hermitian linear algebra kernel.

Dense LAPACK decompositions handle small problems exactly; large
problems go through a Lanczos path (ARPACK) with a Gershgorin spectral
shift so the requested edge of the spectrum dominates in magnitude.
Banded Hermitian matrices get dedicated storage with O(n) matvecs,
which is what makes collective-spin problems at dimension a few
thousand affordable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import numpy.linalg as npl
from scipy.linalg import eigvals_banded
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import CapacityError, ValidationFailure

__all__ = [
    "HermitianOperator",
    "StateVector",
    "DensityMatrix",
    "BandedHermitian",
    "expectation",
    "variance",
    "lambda_max",
    "ground_state",
    "eig_full",
]

HERMITICITY_TOL = 1e-12
NORM_TOL = 1e-10
PSD_TOL = 1e-10
RESIDUAL_TOL = 1e-9
# Dense decomposition below this dimension, iterative above.
DENSE_CUTOFF = 512
EIG_FULL_CAP = 4096


def _square_matrix(entries) -> np.ndarray:
    m = np.asarray(entries)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class HermitianOperator:
    """Dense self-adjoint matrix.

    Hermiticity is enforced at construction (max asymmetry 1e-12
    relative to the largest entry) and the stored matrix is exactly
    symmetrized.  Real-valued operators are stored as float64 so
    downstream solvers can take the cheaper real code path.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _square_matrix(self.matrix).astype(np.complex128, copy=True)
        scale = max(1.0, float(np.abs(m).max()) if m.size else 0.0)
        asym = float(np.abs(m - m.conj().T).max()) if m.size else 0.0
        if asym > HERMITICITY_TOL * scale:
            raise ValueError(f"matrix is not Hermitian: asymmetry {asym:.3e}")
        m = (m + m.conj().T) / 2.0
        if float(np.abs(m.imag).max()) == 0.0:
            m = np.ascontiguousarray(m.real)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def real(self) -> bool:
        """True when every entry is real (cheaper solver path applies)."""
        return not np.iscomplexobj(self.matrix)

    def __matmul__(self, other: "HermitianOperator") -> np.ndarray:
        return self.matrix @ _as_matrix(other)


@dataclass(frozen=True)
class StateVector:
    """Pure state; unit norm enforced within 1e-10, then renormalized."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1).copy()
        if v.size == 0:
            raise ValueError("empty state vector")
        nrm = float(npl.norm(v))
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state vector norm {nrm} is not 1 within {NORM_TOL}")
        v /= nrm
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state: Hermitian, unit trace, positive semidefinite.

    Negative eigenvalues below -1e-10 are rejected; the tiny negative
    dust that numerical state preparation leaves behind is tolerated.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _square_matrix(self.matrix).astype(np.complex128, copy=True)
        scale = max(1.0, float(np.abs(m).max()))
        if float(np.abs(m - m.conj().T).max()) > 1e-10 * scale:
            raise ValueError("density matrix is not Hermitian")
        m = (m + m.conj().T) / 2.0
        tr = float(np.real(np.trace(m)))
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"trace {tr} is not 1")
        m /= tr
        lo = float(npl.eigvalsh(m)[0])
        if lo < -PSD_TOL:
            raise ValueError(f"not positive semidefinite: min eigenvalue {lo:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, HermitianOperator):
        return op.matrix
    return _square_matrix(op)


def _as_state(state):
    """Coerce to either a 1-d amplitude vector or a density matrix."""
    if isinstance(state, StateVector):
        return state.amplitudes, None
    if isinstance(state, DensityMatrix):
        return None, state.matrix
    a = np.asarray(state)
    if a.ndim == 1:
        return a, None
    if a.ndim == 2:
        return None, a
    raise ValueError(f"cannot interpret state with shape {a.shape}")


def expectation(op, state) -> float:
    """<A> for a pure or mixed state. The value is real for Hermitian A."""
    m = _as_matrix(op)
    vec, rho = _as_state(state)
    if vec is not None:
        if vec.shape[0] != m.shape[0]:
            raise ValueError("dimension mismatch between operator and state")
        return float(np.real(np.vdot(vec, m @ vec)))
    if rho.shape[0] != m.shape[0]:
        raise ValueError("dimension mismatch between operator and state")
    return float(np.real(np.einsum("ij,ji->", rho, m)))


def variance(op, state) -> float:
    """<A^2> - <A>^2, clamped so roundoff never reports below -1e-10."""
    m = _as_matrix(op)
    vec, rho = _as_state(state)
    if vec is not None:
        w = m @ vec
        second = float(np.real(np.vdot(w, w)))
        first = float(np.real(np.vdot(vec, w)))
    else:
        mm = m @ m
        second = float(np.real(np.einsum("ij,ji->", rho, mm)))
        first = float(np.real(np.einsum("ij,ji->", rho, m)))
    var = second - first * first
    scale = max(1.0, second)
    if var < -PSD_TOL * scale:
        raise ValidationFailure(f"variance {var:.3e} below tolerance floor")
    return max(var, 0.0)


def eig_full(op, cap: int = EIG_FULL_CAP):
    """Full spectral decomposition, eigenvalues ascending.

    Dimension is capped (default 4096): a full dense decomposition
    beyond that is almost certainly a caller mistake in this package.
    """
    m = _as_matrix(op)
    if m.shape[0] > cap:
        raise CapacityError(f"eig_full dimension {m.shape[0]} exceeds cap {cap}")
    vals, vecs = npl.eigh(m)
    return vals, vecs


# ---------------------------------------------------------------------------
# Banded Hermitian support


class BandedHermitian:
    """Hermitian matrix stored as upper diagonals (LAPACK banded layout).

    ``ab[w - k, k:]`` holds diagonal k for k = 0..w.  Diagonal 0 must be
    real.  Matvecs are O(n * w), which is what the mu sweeps rely on.
    """

    __slots__ = ("ab", "n", "w")

    def __init__(self, ab: np.ndarray):
        ab = np.asarray(ab)
        if ab.ndim != 2:
            raise ValueError("banded storage must be 2-d")
        self.ab = ab
        self.w = ab.shape[0] - 1
        self.n = ab.shape[1]

    @classmethod
    def from_dense(cls, m: np.ndarray, w: int) -> "BandedHermitian":
        m = _square_matrix(m)
        n = m.shape[0]
        dtype = np.float64 if not np.iscomplexobj(m) else np.complex128
        ab = np.zeros((w + 1, n), dtype=dtype)
        for k in range(w + 1):
            ab[w - k, k:] = np.diagonal(m, k)
        return cls(ab)

    def diagonal(self, k: int = 0) -> np.ndarray:
        return self.ab[self.w - k, k:]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        ab, w, n = self.ab, self.w, self.n
        y = ab[w].astype(np.result_type(ab.dtype, x.dtype)) * x
        for k in range(1, w + 1):
            d = ab[w - k, k:]
            y[: n - k] += d * x[k:]
            y[k:] += np.conj(d) * x[: n - k]
        return y

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=self.ab.dtype)
        for k in range(self.w + 1):
            idx = np.arange(self.n - k)
            out[idx, idx + k] = self.diagonal(k)
            if k:
                out[idx + k, idx] = np.conj(self.diagonal(k))
        return out

    def gershgorin(self) -> tuple[float, float]:
        """Interval certain to contain the whole spectrum."""
        w, n = self.w, self.n
        radius = np.zeros(n)
        for k in range(1, w + 1):
            a = np.abs(self.ab[w - k, k:])
            radius[: n - k] += a
            radius[k:] += a
        d = np.real(self.ab[w])
        return float(np.min(d - radius)), float(np.max(d + radius))

    def eigvals_extreme(self, which: str = "max", k: int = 1) -> np.ndarray:
        """Selected extreme eigenvalues via LAPACK bisection (values only)."""
        if which == "max":
            rng = (self.n - k, self.n - 1)
        else:
            rng = (0, k - 1)
        return eigvals_banded(self.ab, select="i", select_range=rng)


def detect_bandwidth(m: np.ndarray, max_w: int = 8) -> int | None:
    """Smallest half-bandwidth <= max_w such that m is banded, else None."""
    m = _square_matrix(m)
    i, j = np.nonzero(m)
    if i.size == 0:
        return 0
    w = int(np.abs(i - j).max())
    return w if w <= max_w else None


# ---------------------------------------------------------------------------
# Extreme eigenpairs


def default_start_vector(n: int) -> np.ndarray:
    # Deterministic, generic direction: constant vector plus a slow wiggle
    # so states orthogonal to the uniform vector are still reachable.
    v = 1.0 + 0.25 * np.cos(2.3 * np.arange(n)) + 0.05 * np.sin(0.7 * np.arange(n))
    return v / npl.norm(v)


def lanczos_lambda_max(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    spectrum_bounds: tuple[float, float],
    v0: np.ndarray | None = None,
    tol: float = 0.0,
    dtype=np.float64,
    maxiter: int | None = None,
):
    """Largest eigenpair of a Hermitian operator given only its matvec.

    The operator is shifted by the lower Gershgorin bound so the target
    eigenvalue is also largest in magnitude, which is the regime ARPACK
    converges fastest in.  Returns (value, vector).
    """
    lo, hi = spectrum_bounds
    shift = lo - 0.01 * max(1.0, hi - lo)

    def shifted(x):
        return matvec(x) - shift * x

    op = LinearOperator((n, n), matvec=shifted, dtype=dtype)
    if v0 is None:
        v0 = default_start_vector(n)
    ncv = min(n, 24)
    try:
        vals, vecs = eigsh(op, k=1, which="LA", v0=v0, tol=tol, ncv=ncv, maxiter=maxiter)
    except ArpackNoConvergence:
        vals, vecs = eigsh(op, k=1, which="LA", v0=default_start_vector(n), tol=max(tol, 1e-12), ncv=min(n, 48), maxiter=20 * n)
    return float(vals[0]) + shift, vecs[:, 0]


def _dense_extreme(m: np.ndarray, which: str):
    vals, vecs = npl.eigh(m)
    idx = -1 if which == "max" else 0
    return float(vals[idx]), vecs[:, idx]


def lambda_max(op, v0: np.ndarray | None = None, dense_cutoff: int = DENSE_CUTOFF):
    """Largest eigenvalue and an eigenvector of a Hermitian operator.

    Contract: the residual ||H v - lam v|| stays below 1e-9 * ||H||.
    For degenerate tops any unit vector of the eigenspace qualifies.
    Dense LAPACK below `dense_cutoff`, shifted Lanczos above.
    """
    m = _as_matrix(op)
    n = m.shape[0]
    if n <= dense_cutoff:
        return _dense_extreme(m, "max")

    w = detect_bandwidth(m)
    if w is not None:
        banded = BandedHermitian.from_dense(m, w)
        bounds = banded.gershgorin()
        val, vec = lanczos_lambda_max(banded.matvec, n, bounds, v0=v0, dtype=banded.ab.dtype)
    else:
        radius = float(np.abs(m).sum(axis=1).max())
        val, vec = lanczos_lambda_max(lambda x: m @ x, n, (-radius, radius), v0=v0, dtype=m.dtype)

    scale = max(1.0, float(np.abs(m).sum(axis=1).max()))
    resid = float(npl.norm(m @ vec - val * vec))
    if resid > RESIDUAL_TOL * scale:
        if n <= EIG_FULL_CAP:
            return _dense_extreme(m, "max")
        raise ValidationFailure(f"lambda_max residual {resid:.3e} exceeds {RESIDUAL_TOL} * {scale:.3e}")
    return val, vec


def ground_state(op, v0: np.ndarray | None = None, dense_cutoff: int = DENSE_CUTOFF):
    """Smallest eigenpair, computed as -lambda_max(-H)."""
    m = _as_matrix(op)
    val, vec = lambda_max(-m, v0=v0, dense_cutoff=dense_cutoff)
    return -val, vec
