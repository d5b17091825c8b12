"""Dense and banded Hermitian primitives against direct numpy references."""

import numpy as np
import numpy.linalg as npl
import pytest

from qfibound.errors import CapacityError
from qfibound.linalg import (
    BandedHermitian,
    DensityMatrix,
    HermitianOperator,
    StateVector,
    detect_bandwidth,
    eig_full,
    expectation,
    ground_state,
    lambda_max,
    variance,
)


def _rand_herm(rng, dim, real=False):
    g = rng.standard_normal((dim, dim))
    if not real:
        g = g + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (g + g.conj().T)


def test_hermitian_operator_rejects_nonhermitian(rng):
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    with pytest.raises(ValueError):
        HermitianOperator(m)


def test_hermitian_operator_real_flag(rng):
    assert HermitianOperator(_rand_herm(rng, 5, real=True)).real
    h = _rand_herm(rng, 5)
    h[0, 1] += 0.3j
    h[1, 0] -= 0.3j
    assert not HermitianOperator(h).real


def test_state_vector_requires_normalization(rng):
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    with pytest.raises(ValueError):
        StateVector(v * 10.0)
    sv = StateVector(v / npl.norm(v))
    rho = sv.density()
    assert isinstance(rho, DensityMatrix)
    assert np.allclose(rho.matrix, np.outer(sv.amplitudes, sv.amplitudes.conj()))


def test_density_matrix_validation(rng):
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.7, 0.7]))  # trace 1.4
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))  # negative eigenvalue


def test_expectation_and_variance_match_numpy(rng):
    dim = 7
    h = HermitianOperator(_rand_herm(rng, dim))
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= npl.norm(v)
    sv = StateVector(v)
    want = float(np.real(v.conj() @ h.matrix @ v))
    assert expectation(h, sv) == pytest.approx(want, rel=1e-12)
    want2 = float(np.real(v.conj() @ h.matrix @ h.matrix @ v)) - want**2
    assert variance(h, sv) == pytest.approx(want2, rel=1e-10)
    # mixed-state path agrees with the trace formula
    rho = DensityMatrix(np.outer(v, v.conj()))
    assert expectation(h, rho) == pytest.approx(want, rel=1e-12)


def test_eig_full_cap():
    with pytest.raises(CapacityError):
        eig_full(np.eye(8), cap=4)


def test_eig_full_matches_numpy(rng):
    m = _rand_herm(rng, 9)
    vals, vecs = eig_full(m)
    ref = npl.eigvalsh(m)
    assert np.allclose(vals, ref)
    assert np.allclose(vecs.conj().T @ m @ vecs, np.diag(vals), atol=1e-10)


def test_banded_round_trip_and_matvec(rng):
    dim, w = 12, 2
    m = _rand_herm(rng, dim, real=True)
    mask = np.abs(np.subtract.outer(np.arange(dim), np.arange(dim))) <= w
    m = m * mask
    b = BandedHermitian.from_dense(m, w)
    assert np.allclose(b.to_dense(), m)
    x = rng.standard_normal(dim)
    assert np.allclose(b.matvec(x), m @ x)
    lo, hi = b.gershgorin()
    ev = npl.eigvalsh(m)
    assert lo <= ev[0] and ev[-1] <= hi


def test_banded_extreme_eigenvalues(rng):
    dim, w = 40, 1
    d = rng.standard_normal(dim)
    off = rng.standard_normal(dim - 1)
    m = np.diag(d) + np.diag(off, 1) + np.diag(off, -1)
    b = BandedHermitian.from_dense(m, w)
    ev = npl.eigvalsh(m)
    assert b.eigvals_extreme("max", k=2) == pytest.approx(ev[-2:], rel=1e-10, abs=1e-10)
    assert b.eigvals_extreme("min", k=1) == pytest.approx(ev[:1], rel=1e-10, abs=1e-10)


def test_detect_bandwidth(rng):
    dim = 10
    tri = np.diag(rng.standard_normal(dim))
    tri += np.diag(np.ones(dim - 1), 1) + np.diag(np.ones(dim - 1), -1)
    assert detect_bandwidth(tri) == 1
    assert detect_bandwidth(_rand_herm(rng, dim, real=True)) is None


@pytest.mark.parametrize("dim", [30, 300])
def test_lambda_max_dense_vs_iterative(rng, dim):
    # tridiagonal test matrix keeps the iterative path honest at scale
    d = np.linspace(-1.0, 2.0, dim)
    off = 0.7 * np.ones(dim - 1)
    m = np.diag(d) + np.diag(off, 1) + np.diag(off, -1)
    ref = float(npl.eigvalsh(m)[-1])
    val_it, vec_it = lambda_max(m, dense_cutoff=8)
    val_dn, vec_dn = lambda_max(m, dense_cutoff=10_000)
    assert val_it == pytest.approx(ref, rel=1e-9, abs=1e-9)
    assert val_dn == pytest.approx(ref, rel=1e-12, abs=1e-12)
    # returned vectors are true eigenvectors of the top eigenvalue
    for vec in (vec_it, vec_dn):
        assert npl.norm(m @ vec - ref * vec) < 1e-7 * max(1.0, abs(ref))


def test_ground_state_matches_numpy(rng):
    m = _rand_herm(rng, 25, real=True)
    lo, vec = ground_state(m)
    ev = npl.eigvalsh(m)
    assert lo == pytest.approx(float(ev[0]), rel=1e-10, abs=1e-10)
    assert npl.norm(m @ vec - lo * vec) < 1e-8
