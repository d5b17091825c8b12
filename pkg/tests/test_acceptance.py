"""End-to-end acceptance checks for the bound engine and its applications.

Each test prints one pass/fail line through the terminal-summary hook in
conftest.py, with its headline measurement and runtime.  Tolerances are
pinned in the asserts, not configurable.
"""

import time

import numpy as np
import pytest

from conftest import random_density, record_acceptance
from qfibound.analytic import (
    boundary_scan,
    check_jx_reduction,
    dicke_threshold,
    ghz_bound,
)
from qfibound.bound import (
    BoundProblem,
    Constraint,
    OptimizerSettings,
    exact_qfi,
    legendre_qfi,
    lower_bound_multi,
    lower_bound_single,
)
from qfibound.experiments import (
    dicke_extrapolation,
    evaluate_record,
    load_records,
    squeezing_convergence,
    symmetrize_moments,
)
from qfibound.linalg import DensityMatrix, expectation
from qfibound.spin import (
    build_collective,
    dicke_state,
    full_representation,
    ghz_state,
    projector,
    symmetric_representation,
)


def _line(idx, name, ok, detail):
    status = "PASS" if ok else "FAIL"
    record_acceptance(f"[{idx:>2}/10] {name}: {status} ({detail})")


# -- 1: engine curve equals the closed form on the GHZ family -------------


def test_ghz_engine_matches_closed_form():
    t0 = time.perf_counter()
    fidelities = np.round(np.arange(0.0, 1.0001, 0.05), 10)
    worst = 0.0
    for n in range(3, 9):
        rep = symmetric_representation(n)
        ops = build_collective(rep)
        proj = projector(ghz_state(rep))
        for f in fidelities:
            got = lower_bound_single(proj, float(f), ops.jz, representation="symmetric").bound
            want = ghz_bound(float(f), n)
            if want == 0.0:
                assert abs(got) <= 1e-9
            else:
                worst = max(worst, abs(got - want) / want)
                assert got == pytest.approx(want, rel=1e-6)
    dt = time.perf_counter() - t0
    ok = dt < 60.0
    _line(1, "ghz engine vs closed form", ok, f"max rel diff {worst:.2e}; {dt:.1f}s < 60s")
    assert ok


# -- 2: published fidelity table reproduces ---------------------------------

# printed (bound/N^2, last-digit step, sigma) per record; the toth2010
# cell is printed as 0.351 +- 0.006 in the source, which contradicts the
# monotone fidelity curve through its neighbors (0.844 -> 0.358 and
# 0.8872 -> 0.420 bracket 0.873), so the curve-consistent value is
# pinned instead and the discrepancy is reported.
TABLE_ROWS = {
    "dicke4-kiesel2007": (0.358, 0.001, 0.011),
    "dicke4-chiuri2012": (0.281, 0.001, 0.059),
    "dicke4-krischek2011": (0.420, 0.001, 0.009),
    "dicke4-toth2010": (0.398, 0.001, 0.006),
    "dicke6-wieczorek2009": (0.141, 0.001, 0.019),
    "dicke6-prevedel2009": (0.0761, 0.0001, 0.012),
    "ghz4-zhao2003": (0.462, 0.001, 0.019),
    "ghz5-zhao2004": (0.130, 0.001, None),
    "ghz8-huang2011": (0.032, 0.001, 0.016),
    "ghz8-gao2010": (0.3047, 0.0001, 0.0134),
    "ghz10-gao2010": (0.015, 0.001, 0.011),
    "ghz3-leibfried2004": (0.608, 0.001, 0.097),
    "ghz4-sackett2000": (0.020, 0.001, 0.013),
    "ghz6-leibfried2005": (0.0003, 0.0001, 0.0003),
    "ghz8-monz2011": (0.402, 0.001, 0.010),
    "ghz10-monz2011": (0.064, 0.001, 0.006),
}


def test_published_fidelity_table_reproduces():
    t0 = time.perf_counter()
    records = load_records("data/table_s1.rec")
    assert len(records) == 16
    worst_step, worst_sig = 0.0, 0.0
    for rec in records:
        want, step, want_sigma = TABLE_ROWS[rec.name]
        row = evaluate_record(rec)
        diff = abs(row.bound_per_n2 - want)
        worst_step = max(worst_step, diff / step)
        assert diff <= step + 1e-12, rec.name
        if want_sigma is not None:
            got_sigma = row.bound_sigma / rec.n_qubits**2
            sig_err = abs(got_sigma - want_sigma) / want_sigma
            worst_sig = max(worst_sig, sig_err)
            assert sig_err <= 0.15, rec.name
    dt = time.perf_counter() - t0
    ok = dt < 120.0
    _line(
        2,
        "published fidelity table",
        ok,
        f"16/16 rows within last digit (worst {worst_step:.2f} steps), "
        f"sigmas within 15% (worst {worst_sig:.1%}); one source cell (0.351) "
        f"conflicts with its own curve, matched curve value 0.398; {dt:.1f}s < 120s",
    )
    assert ok


# -- 3: fidelity thresholds of the half-excited Dicke family ----------------


def test_dicke_fidelity_thresholds():
    t0 = time.perf_counter()
    assert dicke_threshold(6) == pytest.approx(0.3125, abs=1e-4)
    assert dicke_threshold(40) == pytest.approx(0.1254, abs=1e-4)
    for n in (6, 40):
        rep = symmetric_representation(n)
        ops = build_collective(rep)
        proj = projector(dicke_state(rep))
        thr = dicke_threshold(n)
        at = lower_bound_single(proj, thr, ops.jy, representation="symmetric").bound
        above = lower_bound_single(proj, thr + 0.01, ops.jy, representation="symmetric").bound
        assert at == 0.0
        assert above > 0.0
    dt = time.perf_counter() - t0
    ok = dt < 60.0
    _line(3, "dicke thresholds", ok, f"0.3125 / 0.1254, zero at threshold; {dt:.1f}s < 60s")
    assert ok


# -- 4: perfect fidelity recovers the exact QFI of the targets --------------


def test_perfect_state_values():
    t0 = time.perf_counter()
    for n in (2, 5, 11, 24, 40):
        rep = symmetric_representation(n)
        ops = build_collective(rep)
        res = lower_bound_single(projector(ghz_state(rep)), 1.0, ops.jz, representation="symmetric")
        assert res.bound == pytest.approx(float(n * n), rel=1e-6)
    for n in (2, 6, 14, 26, 40):
        rep = symmetric_representation(n)
        ops = build_collective(rep)
        res = lower_bound_single(projector(dicke_state(rep)), 1.0, ops.jy, representation="symmetric")
        assert res.bound == pytest.approx(n * (n + 2) / 2.0, rel=1e-6)
    dt = time.perf_counter() - t0
    _line(4, "perfect-state values", True, f"N^2 and N(N+2)/2 at F=1 up to N=40; {dt:.1f}s")


# -- 5: soundness on random mixed states ------------------------------------


def test_soundness_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(501)
    counts = {2: 67, 3: 67, 4: 66}
    worst = -np.inf
    for n, count in counts.items():
        rep = full_representation(n)
        ops = build_collective(rep)
        proj = projector(ghz_state(rep))
        for _ in range(count):
            rho = DensityMatrix(random_density(rng, rep.dim))
            fq_z = exact_qfi(rho, ops.jz)
            fval = expectation(proj, rho)
            b = lower_bound_single(proj, fval, ops.jz, representation="full").bound
            worst = max(worst, b - fq_z)
            assert b <= fq_z + 1e-6
            fq_y = exact_qfi(rho, ops.jy)
            cons = tuple(
                Constraint(ops.operator(k), expectation(ops.operator(k), rho), k)
                for k in ("jz", "jx2", "jx")
            )
            b = lower_bound_multi(BoundProblem(ops.jy, cons, representation="full")).bound
            worst = max(worst, b - fq_y)
            assert b <= fq_y + 1e-6
    dt = time.perf_counter() - t0
    ok = dt < 300.0
    _line(5, "soundness suite", ok, f"200 states, worst margin {worst:.2e}; {dt:.1f}s < 300s")
    assert ok


# -- 6: boundary-state relative difference ----------------------------------


def test_boundary_relative_difference():
    worst = 0.0
    for n, npts in ((4, 25), (20, 25)):
        pts = boundary_scan(n, "+", np.logspace(-2, 2.5, npts))
        worst = max(worst, max(p.rel_diff for p in pts))
    t0 = time.perf_counter()
    pts = boundary_scan(1000, "+", np.logspace(-2, 2.5, 15))
    dt_large = time.perf_counter() - t0
    worst = max(worst, max(p.rel_diff for p in pts))
    ok = worst < 0.03 and dt_large < 120.0
    _line(
        6,
        "boundary relative difference",
        ok,
        f"worst {worst:.2%} < 3% over N in (4, 20, 1000); N=1000 in {dt_large:.1f}s < 120s",
    )
    assert worst < 0.03
    assert dt_large < 120.0


# -- 7: squeezed-family plateau ----------------------------------------------


def test_squeezing_convergence_plateau():
    t0 = time.perf_counter()
    run = squeezing_convergence(0.85, 0.1514, [250, 500, 1000, 2300])
    dt = time.perf_counter() - t0
    worst = max(abs(per / 6.605 - 1.0) for per in run.bounds_per_n)
    ok = worst <= 0.005 and dt < 900.0 and run.plateau
    _line(
        7,
        "squeezing chain plateau",
        ok,
        f"bound/N' within {worst:.2e} of 6.605 up to N'=2300; {dt:.0f}s < 900s",
    )
    assert worst <= 0.005
    assert run.plateau
    assert dt < 900.0


# -- 8: moment-record extrapolation -------------------------------------------


def test_dicke_experiment_extrapolation():
    t0 = time.perf_counter()
    gamma, sym = symmetrize_moments({"jx2": 6e6, "jy2": 6e6, "jz2": 112.0}, 7900)
    assert gamma == pytest.approx(1.301, abs=1e-3)
    run = dicke_extrapolation(sym["jz2"], 7900, gamma, [400, 600, 800, 1000])
    dt = time.perf_counter() - t0
    tail = run.bounds_per_n[-3:]
    spread = (max(tail) - min(tail)) / run.extrapolated
    ok = abs(run.extrapolated - 2.94) <= 0.05 and spread < 0.02 and dt < 1200.0
    _line(
        8,
        "dicke moment extrapolation",
        ok,
        f"gamma {gamma:.4f}, bound/N {run.extrapolated:.4f} in 2.94+-0.05, "
        f"tail spread {spread:.2%} < 2%; {dt:.0f}s < 1200s",
    )
    assert abs(run.extrapolated - 2.94) <= 0.05
    assert run.plateau and spread < 0.02
    assert dt < 1200.0


# -- 9: the first-moment constraint is redundant ------------------------------


def test_first_moment_reduction():
    t0 = time.perf_counter()
    worst = 0.0
    for n, seed in ((3, 91), (4, 92)):
        report = check_jx_reduction(n, 10, seed=seed)
        worst = max(worst, report.max_rel_diff)
        assert report.max_rel_diff < 1e-5
    dt = time.perf_counter() - t0
    _line(9, "first-moment reduction", True, f"20 pairs, worst rel diff {worst:.2e}; {dt:.1f}s")


# -- 10: concavity and validity under restarts and early stops ----------------


def test_restart_and_early_stop_validity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)
    ops = build_collective(full_representation(3))
    names = ("jz", "jx2", "jx")
    over = -np.inf
    for _ in range(4):
        rho = DensityMatrix(random_density(rng, 8))
        fq = exact_qfi(rho, ops.jy)
        cons = tuple(
            Constraint(ops.operator(k), expectation(ops.operator(k), rho), k) for k in names
        )
        prob = BoundProblem(ops.jy, cons, representation="full")
        ref = lower_bound_multi(prob)
        tol = 1e-5 * max(1.0, abs(ref.bound))
        for _ in range(5):
            start = rng.uniform(-5.0, 5.0, size=3)
            res = lower_bound_multi(prob, OptimizerSettings(r_init=start))
            over = max(over, res.bound - ref.bound)
            assert res.bound <= ref.bound + tol
        for budget in (3, 12):
            res = lower_bound_multi(prob, OptimizerSettings(r_max_iters=budget))
            assert 0.0 <= res.bound <= fq + 1e-6

    # concavity along 100 random chords of the dual objective
    rho = DensityMatrix(random_density(rng, 8))
    cons = tuple(
        Constraint(ops.operator(k), expectation(ops.operator(k), rho), k)
        for k in ("jz", "jx2")
    )
    vals = np.array([c.value for c in cons])

    def obj(r):
        w = r[0] * cons[0].observable.matrix + r[1] * cons[1].observable.matrix
        return float(np.dot(r, vals)) - legendre_qfi(w, ops.jy)

    for _ in range(100):
        r1 = rng.uniform(-4, 4, size=2)
        r2 = rng.uniform(-4, 4, size=2)
        lam = float(rng.uniform())
        mid = obj(lam * r1 + (1 - lam) * r2)
        chord = lam * obj(r1) + (1 - lam) * obj(r2)
        assert mid >= chord - 1e-8 * max(1.0, abs(mid))
    dt = time.perf_counter() - t0
    _line(
        10,
        "restart and early-stop validity",
        True,
        f"restart excess {over:.2e} <= tol, early stops valid, 100 chords concave; {dt:.1f}s",
    )
