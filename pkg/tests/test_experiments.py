"""Record parsing, uncertainty propagation, and the two scaling chains."""

import math

import pytest

from qfibound.analytic import ghz_bound
from qfibound.experiments import (
    ExperimentRecord,
    ScalingRun,
    bound_from_fidelity,
    dicke_extrapolation,
    entanglement_depth,
    evaluate_record,
    load_records,
    parse_records,
    scale_squeezing,
    squeezing_convergence,
    symmetrize_moments,
)

RECORD_TEXT = """\
# two records, one of each constraint kind

name: ghz-demo
source: bench
n: 6
family: GHZ
fidelity: 0.82
fidelity_sigma: 0.01

name: squeezed-demo
n: 100
family: SqueezedMoments
jz: 42.5
jz_sigma: 0.8
jx2: 6.5
"""


def test_parse_records_round_trip():
    recs = parse_records(RECORD_TEXT)
    assert [r.name for r in recs] == ["ghz-demo", "squeezed-demo"]
    ghz = recs[0]
    assert ghz.family == "GHZ" and ghz.n_qubits == 6
    assert ghz.fidelity == (0.82, 0.01)
    assert ghz.source == "bench"
    sq = recs[1]
    assert sq.fidelity is None
    assert sq.moments["jz"] == (42.5, 0.8)
    assert sq.moments["jx2"] == (6.5, None)


@pytest.mark.parametrize(
    "text,message",
    [
        ("name: x\nn: 4\nfamily: Cluster\nfidelity: 0.9\n", "unknown family"),
        ("name: x\nn: 4\nfamily: GHZ\n", "exactly one"),
        ("name: x\nn: 4\nfamily: GHZ\nfidelity: 1.2\n", "outside"),
        ("name: x\nn: 4\nfamily: SqueezedMoments\njz: 1.0\n", "needs moment"),
        ("name: x\nn: 4\nfamily: GHZ\nfidelity_sigma: 0.1\n", "without fidelity"),
        ("name: x\nn: 4\nfamily: GHZ\nfidelity: 0.9\nfidelity: 0.9\n", "duplicate"),
        ("n: 4\nfamily: GHZ\nfidelity: 0.9\n", "missing field"),
        ("name: x\nn: 4\nfamily: GHZ\nbogus: 1\n", "unknown field"),
    ],
)
def test_parse_records_rejects_malformed(text, message):
    with pytest.raises(ValueError, match=message):
        parse_records(text)


def test_packaged_record_files_load():
    rows = load_records("data/table_s1.rec")
    assert len(rows) == 16
    assert len({r.name for r in rows}) == 16
    assert all(r.family in ("GHZ", "Dicke") for r in rows)
    cold = load_records("data/coldgas.rec")
    assert {r.family for r in cold} == {"SqueezedMoments", "DickeMoments"}


def test_bound_from_fidelity_ghz_with_sigma():
    rec = ExperimentRecord(name="g", n_qubits=6, family="GHZ", fidelity=(0.82, 0.01))
    value, sigma = bound_from_fidelity(rec)
    assert value == pytest.approx(ghz_bound(0.82, 6) / 36.0, rel=1e-12)
    shifted = ghz_bound(0.83, 6) / 36.0
    assert sigma == pytest.approx(min(shifted - value, value), rel=1e-12)


def test_bound_from_fidelity_zero_region_sigma():
    # a record below threshold keeps bound 0; the one-sided shift rules
    rec = ExperimentRecord(name="g", n_qubits=4, family="GHZ", fidelity=(0.45, 0.02))
    value, sigma = bound_from_fidelity(rec)
    assert value == 0.0 and sigma == 0.0
    # crossing the threshold from below yields the full shifted value
    rec2 = ExperimentRecord(name="g", n_qubits=4, family="GHZ", fidelity=(0.49, 0.05))
    value2, sigma2 = bound_from_fidelity(rec2)
    assert value2 == 0.0
    assert sigma2 == pytest.approx(ghz_bound(0.54, 4) / 16.0, rel=1e-12)


def test_bound_from_fidelity_clamps_shift_at_one():
    rec = ExperimentRecord(name="g", n_qubits=3, family="GHZ", fidelity=(0.99, 0.05))
    value, sigma = bound_from_fidelity(rec)
    assert sigma == pytest.approx(ghz_bound(1.0, 3) / 9.0 - value, rel=1e-10)


def test_entanglement_depth_rules():
    n = 8
    assert entanglement_depth(-1.0, n) == 1
    assert entanglement_depth(0.0, n) == 1
    assert entanglement_depth(0.5 * n, n) == 1
    assert entanglement_depth(1.0 * n, n) == 1  # boundary lands below
    assert entanglement_depth(1.5 * n, n) == 2
    assert entanglement_depth(3.0 * n, n) == 3
    assert entanglement_depth(float(n * n), n) == n
    assert entanglement_depth(10.0 * n * n, n) == n  # capped at n


def test_scale_squeezing_family():
    jz, var_jx = scale_squeezing(0.85, 0.1514, 2300)
    assert jz == pytest.approx(977.5, rel=1e-12)
    assert var_jx == pytest.approx(0.1514 * 575.0 * 0.85**2, rel=1e-12)
    # the squeezing ratio is size/xi2 exactly, independent of alpha
    assert jz**2 / var_jx == pytest.approx(2300 / 0.1514, rel=1e-12)
    with pytest.raises(ValueError):
        scale_squeezing(0.0, 0.1, 100)
    with pytest.raises(ValueError):
        scale_squeezing(0.85, -1.0, 100)


def test_symmetrize_moments_enforces_casimir():
    moments = {"jx2": 6e6, "jy2": 6e6, "jz2": 112.0}
    gamma, sym = symmetrize_moments(moments, 7900)
    j = 7900 / 2.0
    assert sum(sym.values()) == pytest.approx(j * (j + 1.0), rel=1e-14)
    assert gamma == pytest.approx(1.3005253617632901, rel=1e-12)
    assert sym["jz2"] == pytest.approx(gamma * 112.0, rel=1e-12)
    with pytest.raises(ValueError):
        symmetrize_moments({"jx2": 0.0, "jy2": 0.0, "jz2": 0.0}, 10)
    with pytest.raises(ValueError):
        symmetrize_moments({"jx2": -1.0, "jy2": 1.0, "jz2": 1.0}, 10)


def test_scaling_run_validation():
    with pytest.raises(ValueError):
        ScalingRun(
            n_target=10,
            n_primes=(4, 4),
            bounds=(1.0, 2.0),
            bounds_per_n=(0.1, 0.2),
            extrapolated=0.2,
            plateau=False,
        )


def test_squeezing_convergence_small_chain():
    run = squeezing_convergence(0.85, 0.1514, [40, 80])
    assert run.certified
    assert run.n_primes == (40, 80)
    # the bound dominates the squeezing ratio N'/xi2 at every size and
    # decreases onto it as N' grows
    ref = 1.0 / 0.1514
    for per in run.bounds_per_n:
        assert ref * (1.0 - 1e-7) <= per < 1.01 * ref
    assert run.bounds_per_n[0] > run.bounds_per_n[1]


def test_dicke_extrapolation_perfect_chain():
    # a perfect half-excited Dicke target: every chain point rescales to
    # exactly (N+2)/2 per particle, here 5 for N = 8
    run = dicke_extrapolation(0.0, 8, 1.0, [4, 6, 8])
    assert run.bounds == pytest.approx((12.0, 24.0, 40.0), rel=1e-7)
    assert run.bounds_per_n == pytest.approx((5.0, 5.0, 5.0), rel=1e-7)
    assert run.extrapolated == pytest.approx(5.0, rel=1e-7)
    assert run.plateau
    assert run.gamma == 1.0
    assert not run.certified  # extrapolations never certify


def test_dicke_extrapolation_input_guards():
    with pytest.raises(ValueError):
        dicke_extrapolation(-1.0, 8, 1.0, [4])
    with pytest.raises(ValueError):
        dicke_extrapolation(1.0, 8, 0.0, [4])
    with pytest.raises(ValueError):
        dicke_extrapolation(30.0, 8, 1.0, [4])  # exceeds Casimir at n=8


def test_evaluate_record_ghz():
    rec = ExperimentRecord(name="g", n_qubits=6, family="GHZ", fidelity=(0.82, 0.01))
    row = evaluate_record(rec)
    assert row.name == "g" and row.n == 6 and row.family == "GHZ"
    want = ghz_bound(0.82, 6)
    assert row.bound == pytest.approx(want, rel=1e-12)
    assert row.bound_per_n2 == pytest.approx(want / 36.0, rel=1e-12)
    assert row.bound_per_n == pytest.approx(want / 6.0, rel=1e-12)
    assert row.depth_k == entanglement_depth(want, 6)
    assert row.certified


def test_evaluate_record_squeezed_moments():
    rec = ExperimentRecord(
        name="s",
        n_qubits=64,
        family="SqueezedMoments",
        moments={"jz": (27.2, None), "jx2": (2.42, None)},
    )
    row = evaluate_record(rec, n_primes=[32, 64])
    assert row.representation == "symmetric"
    assert row.certified  # chain reached the recorded size
    assert row.bound > 64.0  # witnesses entanglement beyond shot noise
    assert row.depth_k >= 2
