"""Collective spin-1/2 operators and the named states built from them.

Two representations are supported.  The full one lives on the 2^N
computational basis (lexicographic, |00...0> first) and is capped at
N = 14 since operators are stored densely.  The symmetric one lives on
the N+1 dimensional maximal-spin multiplet, ordered by descending Jz
eigenvalue (m = +N/2 first), and is what makes thousands of particles
tractable: every collective operator is banded there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import CapacityError
from .linalg import HermitianOperator, StateVector

__all__ = [
    "Representation",
    "full_representation",
    "symmetric_representation",
    "CollectiveSpinSet",
    "build_collective",
    "ghz_state",
    "dicke_state",
    "projector",
    "polarized_y_state",
    "log_binomial",
    "binomial",
]

FULL_CAP_DEFAULT = 14
SYMMETRIC_CAP_DEFAULT = 4095  # dense construction above this would not fit modest RAM


def log_binomial(n: int, k: int) -> float:
    if k < 0 or k > n:
        return -np.inf
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def binomial(n: int, k: int) -> float:
    """C(n, k); exact integer arithmetic up to n = 60, log-gamma beyond."""
    if k < 0 or k > n:
        return 0.0
    if n <= 60:
        return float(math.comb(n, k))
    return float(np.exp(log_binomial(n, k)))


@dataclass(frozen=True)
class Representation:
    """Which Hilbert space collective operators act on."""

    kind: str  # "full" or "symmetric"
    n: int
    cap: int | None = None

    def __post_init__(self):
        if self.kind not in ("full", "symmetric"):
            raise ValueError(f"unknown representation kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("particle number must be >= 1")
        cap = self.cap
        if self.kind == "full":
            cap = FULL_CAP_DEFAULT if cap is None else cap
            if self.n > cap:
                raise CapacityError(f"full representation capped at N = {cap}, got {self.n}")
        else:
            cap = SYMMETRIC_CAP_DEFAULT if cap is None else cap
            if self.n > cap:
                raise CapacityError(f"symmetric representation capped at N = {cap}, got {self.n}")

    @property
    def dim(self) -> int:
        return 2**self.n if self.kind == "full" else self.n + 1


def full_representation(n: int, cap: int | None = None) -> Representation:
    return Representation("full", n, cap)


def symmetric_representation(n: int, cap: int | None = None) -> Representation:
    return Representation("symmetric", n, cap)


@dataclass(frozen=True)
class CollectiveSpinSet:
    """Jx, Jy, Jz and their squares for one representation.

    [Jx, Jy] = i Jz holds to 1e-10 * N; in the symmetric representation
    the Casimir sum Jx^2 + Jy^2 + Jz^2 equals (N/2)(N/2 + 1) * identity
    to rounding.
    """

    representation: Representation
    jx: HermitianOperator
    jy: HermitianOperator
    jz: HermitianOperator
    jx2: HermitianOperator
    jy2: HermitianOperator
    jz2: HermitianOperator

    @property
    def n(self) -> int:
        return self.representation.n

    @property
    def casimir_value(self) -> float:
        j = self.representation.n / 2.0
        return j * (j + 1.0)

    def operator(self, name: str) -> HermitianOperator:
        try:
            return getattr(self, name)
        except AttributeError:
            raise ValueError(f"unknown collective operator {name!r}") from None


def _full_jxyz(n: int):
    dim = 2**n
    rows = np.arange(dim, dtype=np.int64)
    ones = np.bitwise_count(rows.astype(np.uint64)).astype(np.float64)
    jz = np.zeros((dim, dim))
    jz[rows, rows] = n / 2.0 - ones
    jx = np.zeros((dim, dim))
    jy = np.zeros((dim, dim), dtype=np.complex128)
    for q in range(n):
        cols = rows ^ (1 << q)
        bit = (rows >> q) & 1
        jx[cols, rows] += 0.5
        jy[cols, rows] += 0.5j * (1.0 - 2.0 * bit)
    return jx, jy, jz


def _symmetric_jxyz(n: int):
    j = n / 2.0
    m = j - np.arange(n + 1)  # descending: +j, j-1, ..., -j
    jz = np.diag(m)
    # raising operator: nonzero entries sit on the superdiagonal because
    # increasing m means decreasing basis index
    c = np.sqrt(j * (j + 1.0) - m[1:] * (m[1:] + 1.0))
    jx = (np.diag(c, 1) + np.diag(c, -1)) / 2.0
    jy = (np.diag(-1j * c, 1) + np.diag(1j * c, -1)) / 2.0
    return jx, jy, jz


def build_collective(rep: Representation) -> CollectiveSpinSet:
    if rep.kind == "full":
        jx, jy, jz = _full_jxyz(rep.n)
    else:
        jx, jy, jz = _symmetric_jxyz(rep.n)
    jy2 = (jy @ jy).real
    return CollectiveSpinSet(
        representation=rep,
        jx=HermitianOperator(jx),
        jy=HermitianOperator(jy),
        jz=HermitianOperator(jz),
        jx2=HermitianOperator(jx @ jx),
        jy2=HermitianOperator(jy2),
        jz2=HermitianOperator(jz @ jz),
    )


def ghz_state(rep: Representation) -> StateVector:
    """(|00...0> + |11...1>) / sqrt(2), i.e. the two extremal Jz levels."""
    v = np.zeros(rep.dim, dtype=np.complex128)
    v[0] = v[-1] = 1.0 / math.sqrt(2.0)
    return StateVector(v)


def dicke_state(rep: Representation, excitations: int | None = None) -> StateVector:
    """Symmetrized state with a fixed excitation count (default N/2).

    The default requires even N; pass `excitations` explicitly otherwise.
    """
    n = rep.n
    if excitations is None:
        if n % 2:
            raise ValueError("default half-excitation Dicke state needs even N")
        excitations = n // 2
    k = int(excitations)
    if not 0 <= k <= n:
        raise ValueError(f"excitation count {k} outside 0..{n}")
    if rep.kind == "symmetric":
        v = np.zeros(rep.dim, dtype=np.complex128)
        v[k] = 1.0  # index k has Jz eigenvalue N/2 - k
        return StateVector(v)
    dim = rep.dim
    rows = np.arange(dim, dtype=np.uint64)
    mask = np.bitwise_count(rows) == k
    v = np.zeros(dim, dtype=np.complex128)
    v[mask] = 1.0 / math.sqrt(math.comb(n, k))
    return StateVector(v)


def projector(state: StateVector) -> HermitianOperator:
    v = state.amplitudes
    return HermitianOperator(np.outer(v, v.conj()))


def polarized_y_state(rep: Representation) -> StateVector:
    """Product state fully polarized along +y: <Jy> = N/2, var(Jy) = 0."""
    n = rep.n
    if rep.kind == "full":
        one = np.array([1.0, 1.0j]) / math.sqrt(2.0)
        v = one
        for _ in range(n - 1):
            v = np.kron(v, one)
        return StateVector(v)
    # Dicke-basis amplitudes of the same product state: i^k sqrt(C(N,k)) / 2^(N/2)
    k = np.arange(n + 1)
    log_amp = np.array([0.5 * log_binomial(n, int(kk)) for kk in k]) - 0.5 * n * math.log(2.0)
    v = np.exp(log_amp) * (1.0j**k)
    return StateVector(v)
