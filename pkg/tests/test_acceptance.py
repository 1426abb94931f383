"""End-to-end acceptance criteria.

Each test prints one ``PASS``/``FAIL`` line with the measured numbers, then
asserts.  Run alone with ``pytest -v -s tests/test_acceptance.py``; skip with
``--skip-acceptance``.
"""
import math
from fractions import Fraction

import numpy as np
import pytest

from perc.arms import (arm_probabilities, dual_separation, edge_arm_probability, edge_four_arm,
                       lemma3_estimator, pivotal_edges, pivotal_for_connection)
from perc.cli import main
from perc.clusters import cluster_of
from perc.config import SeedSpec
from perc.fitting import EmptyWindowError, fit_power_law, kappa_third_window
from perc.lattice import HORIZONTAL, Kind, LatticeSpec, encode_element
from perc.microcanonical import derivative_profile, kappa_derivative_profile, sweep
from perc.observables import (Exceeded, chi_f_estimate, correlation_length_L, crossing_event,
                              crossing_probability, kappa_estimate, kappa_matching_estimate, pi_profile,
                              schedule_gap)
from perc.oracle import ExactPoly, cluster_count_poly, exact_derivative, exact_expectation, matching_polynomial

pytestmark = pytest.mark.acceptance

BOND = Kind.SQUARE_BOND
TRI = Kind.TRIANGULAR_SITE
B1 = LatticeSpec(BOND, 1)
T1 = LatticeSpec(TRI, 1)
SCHEDULE = [8, 16, 32, 64, 128, 256]


def verdict(capsys, number, ok, message):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {message}")
    assert ok, message


def _finite_size(c):
    info = cluster_of(c, (0, 0))
    return 0 if info.touches_boundary else info.size


# ---------------------------------------------------------------------------


def test_criterion_01_oracle_gate(capsys):
    samples = 10 ** 6
    e = encode_element(B1, 0, 0, HORIZONTAL)
    cases = []
    for spec in (B1, T1):
        v = spec.vertex_count
        cases += [
            ("kappa", spec, cluster_count_poly(spec) / v, lambda s, p, n, sd: kappa_estimate(s, p, n, sd)),
            ("chi_f", spec, exact_expectation(spec, _finite_size), chi_f_estimate),
            ("sigma", spec, exact_expectation(spec, crossing_event),
             lambda s, p, n, sd: crossing_probability(s, p, samples=n, seed=sd)),
        ]
    cases += [
        ("edge_four_arm", B1, exact_expectation(B1, lambda c: edge_four_arm(c, e, 1)),
         lambda s, p, n, sd: edge_arm_probability(s, p, e, 1, n, sd)),
        ("D", B1, exact_expectation(B1, lambda c: Fraction(-sum(dual_separation(c, b) for b in range(12)),
                                                           B1.vertex_count)),
         lambda s, p, n, sd: lemma3_estimator(s, p, n, sd)),
    ]
    worst, bad = 0.0, []
    for k, (name, spec, poly, fn) in enumerate(cases):
        for j, p in enumerate((0.2, 0.5, 0.8)):
            est = fn(spec, p, samples, SeedSpec(101, (k * 3 + j) << 32))
            z = abs(est.mean - float(poly(p))) / est.stderr if est.stderr > 0 else \
                (0.0 if est.mean == float(poly(p)) else math.inf)
            worst = max(worst, z)
            if z > 4:
                bad.append(f"{name}/{spec.label()}/p={p}: z={z:.2f}")
    verdict(capsys, 1, not bad, f"{len(cases) * 3} estimates, max |z| = {worst:.2f}" + (f"; {bad}" if bad else ""))


def test_criterion_02_russo_exact(capsys):
    K = cluster_count_poly(B1)
    E = exact_expectation(B1, lambda c: sum(pivotal_for_connection(c, b) for b in range(B1.element_count)))
    cross = exact_expectation(B1, crossing_event)
    piv = exact_expectation(B1, lambda c: pivotal_edges(c, crossing_event).count)
    ok1 = exact_derivative(K, 1) == ExactPoly(()) - E
    ok2 = exact_derivative(cross, 1) == piv
    verdict(capsys, 2, ok1 and ok2, f"K' = -sum P(E(b)): {ok1}; dP(cross)/dp = sum P(pivotal): {ok2}")


def test_criterion_03_lemma3_vs_microcanonical(capsys):
    spec = LatticeSpec(BOND, 64)
    l3 = lemma3_estimator(spec, 0.3, 200000, SeedSpec(103, 0))
    mc = kappa_derivative_profile(spec, [0.3], 1, 4000, SeedSpec(103, 1 << 40))[0]
    err = math.hypot(l3.stderr, mc.stderr)
    z = abs(l3.mean - mc.value) / err
    verdict(capsys, 3, z <= 4, f"lemma3 {l3.mean:.6f} +- {l3.stderr:.1e}, microcanonical kappa' "
                               f"{mc.value:.6f} +- {mc.stderr:.1e}, |z| = {z:.2f}")


def test_criterion_04_one_arm_exponent(capsys):
    spec = LatticeSpec(TRI, 2 * SCHEDULE[-1])
    ests = pi_profile(spec, SCHEDULE, 0.5, 200000, SeedSpec(104, 0))
    fit = fit_power_law([(n, e.mean, e.stderr) for n, e in zip(SCHEDULE, ests)])
    target = -5 / 48
    verdict(capsys, 4, abs(fit.exponent - target) <= 0.03,
            f"pi slope {fit.exponent:.4f} +- {fit.stderr_exponent:.4f} (target {target:.4f} +- 0.03)")


@pytest.fixture(scope="module")
def arm_runs():
    spec = LatticeSpec(TRI, SCHEDULE[-1])
    return arm_probabilities(spec, 0.5, ["OV", "OVV", "OVOV"], 1, SCHEDULE, 20000, SeedSpec(105, 0))


def _arm_fit(runs, word):
    return fit_power_law([(n, runs[(word, n)].mean, runs[(word, n)].stderr) for n in SCHEDULE])


def _arm_detail(runs, word):
    q = [runs[(word, n)].mean for n in SCHEDULE]
    last = math.log(q[-1] / q[-2]) / math.log(SCHEDULE[-1] / SCHEDULE[-2]) if q[-1] > 0 else math.nan
    return f"Q = {[round(x, 5) for x in q]}, slope 128->256 {last:.3f}"


def test_criterion_05_four_arm_exponent(capsys, arm_runs):
    fit = _arm_fit(arm_runs, "OVOV")
    verdict(capsys, 5, abs(fit.exponent + 1.25) <= 0.15,
            f"alternating four-arm slope {fit.exponent:.4f} +- {fit.stderr_exponent:.4f} (target -1.25 +- 0.15); "
            f"{_arm_detail(arm_runs, 'OVOV')}")


def test_criterion_06_three_and_two_arm_exponents(capsys, arm_runs):
    f3 = _arm_fit(arm_runs, "OVV")
    f2 = _arm_fit(arm_runs, "OV")
    ok = abs(f3.exponent + 2 / 3) <= 0.10 and abs(f2.exponent + 0.25) <= 0.05
    verdict(capsys, 6, ok, f"three-arm slope {f3.exponent:.4f} +- {f3.stderr_exponent:.4f} (target -0.6667 +- 0.10); "
                           f"two-arm slope {f2.exponent:.4f} +- {f2.stderr_exponent:.4f} (target -0.25 +- 0.05); "
                           f"three-arm {_arm_detail(arm_runs, 'OVV')}")


def test_criterion_07_correlation_length(capsys):
    ps = [0.35, 0.38, 0.41, 0.44, 0.46, 0.48]
    pts, ls = [], []
    for i, p in enumerate(ps):
        L = correlation_length_L(TRI, p, 0.05, seed=SeedSpec(107, i << 48))
        ls.append(L)
        if not isinstance(L, Exceeded):
            pts.append((0.5 - p, float(L), schedule_gap(L)))
    if len(pts) < 3:
        verdict(capsys, 7, False, f"too few finite L values: {ls}")
    fit = fit_power_law(pts)
    verdict(capsys, 7, abs(fit.exponent + 4 / 3) <= 0.2,
            f"L = {ls}; slope {fit.exponent:.4f} +- {fit.stderr_exponent:.4f} (target -1.3333 +- 0.2)")


SIZES = (32, 64, 128)
REPLICATES = {32: 200000, 64: 100000, 128: 50000}
LOW = [round(0.40 + 0.01 * i, 2) for i in range(9)]
HIGH = [round(1 - p, 2) for p in reversed(LOW)]


@pytest.fixture(scope="module")
def third_derivative_curves():
    return [sweep(LatticeSpec(TRI, n), REPLICATES[n], SeedSpec(108, n << 40)) for n in SIZES]


def test_criterion_08_third_derivative_sign(capsys, third_derivative_curves):
    wrong, significant, total = [], 0, 0
    for n, curve in zip(SIZES, third_derivative_curves):
        for grid, sign in ((LOW, 1), (HIGH, -1)):
            for pt in derivative_profile(curve, grid, 3):
                total += 1
                if abs(pt.value) > 4 * pt.stderr:
                    significant += 1
                    if np.sign(pt.value) != sign:
                        wrong.append(f"n={n} p={pt.p}: {pt.value:.3g} +- {pt.stderr:.2g}")
    verdict(capsys, 8, not wrong, f"{significant}/{total} grid points beyond 4 sigma, "
                                  f"{len(wrong)} with the wrong sign" + (f": {wrong}" if wrong else ""))


def test_criterion_09_third_derivative_exponent(capsys, third_derivative_curves):
    specs = [LatticeSpec(TRI, n) for n in SIZES]
    try:
        res = kappa_third_window(specs, LOW, third_derivative_curves)
    except EmptyWindowError as exc:
        prof = derivative_profile(third_derivative_curves[-1], LOW, 3)
        steps = [(b.value - a.value) / math.hypot(a.stderr, b.stderr) for a, b in zip(prof, prof[1:])]
        mags = [abs(pt.value) for pt in prof]
        ok = all(b > a for a, b in zip(mags, mags[1:])) and all(s > 2 for s in steps)
        verdict(capsys, 9, ok, f"window empty ({exc}); fallback at n=128: |k'''| = "
                               f"{[round(m, 3) for m in mags]}, step z = {[round(s, 2) for s in steps]}")
        return
    verdict(capsys, 9, abs(res.fit.exponent + 1 / 3) <= 0.2,
            f"window {res.window}: exponent {res.fit.exponent:.4f} +- {res.fit.stderr_exponent:.4f} "
            f"(target -0.3333 +- 0.2), sign_ok {res.sign_ok}")


def test_criterion_10_matching_identity(capsys):
    res = matching_polynomial(TRI)
    g = res.polynomial
    exact_ok = g + g.reflect() == ExactPoly(()) and g(Fraction(1, 2)) == 0 and all(
        gl + gl.reflect() == ExactPoly(()) for gl in res.per_size.values())
    spec = LatticeSpec(TRI, 128)
    est = kappa_matching_estimate(spec, 0.6, 100000, SeedSpec(110, 0))
    allowance = 4 * est.stderr + 16 / (2 * spec.n + 1)
    dev = abs(est.mean - float(g(Fraction(3, 5))))
    verdict(capsys, 10, exact_ok and dev <= allowance,
            f"exact antisymmetry and g(1/2) = 0: {exact_ok}; MC {est.mean:.6f} vs g(0.6) = {float(g(Fraction(3, 5))):.6f}, "
            f"|dev| {dev:.2e} <= {allowance:.2e}")


def test_criterion_11_determinism(capsys, tmp_path, monkeypatch):
    argv = ["sweep", "--observable", "kappa", "--lattice", "square-bond,tri-site", "--n", "8,16",
            "--p", "0.3,0.5,0.7", "--samples", "20000", "--seed", "111"]
    monkeypatch.setenv("PERC_THREADS", "1")
    assert main(argv + ["--out", str(tmp_path / "w1")]) == 0
    outputs = {"w1": (tmp_path / "w1.csv").read_bytes()}
    monkeypatch.setenv("PERC_THREADS", "8")
    assert main(["sweep", "--replay", str(tmp_path / "w1.manifest.json"), "--out", str(tmp_path / "w8")]) == 0
    outputs["w8"] = (tmp_path / "w8.csv").read_bytes()
    monkeypatch.setenv("PERC_THREADS", "1")
    assert main(["sweep", "--replay", str(tmp_path / "w8.manifest.json"), "--out", str(tmp_path / "r1")]) == 0
    outputs["r1"] = (tmp_path / "r1.csv").read_bytes()
    capsys.readouterr()
    ok = len(set(outputs.values())) == 1
    verdict(capsys, 11, ok, f"12-cell sweep at 1 and 8 workers via manifest replay: "
                            f"{'byte-identical' if ok else 'outputs differ'}")
