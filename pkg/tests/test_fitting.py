import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perc.fitting import (NU, RHO, EmptyWindowError, PowerLawFit, fit_power_law, kappa_third_window,
                          predicted_alpha, predicted_beta, predicted_gamma, scaling_law_report, stable_window)
from perc.lattice import Kind, LatticeSpec

xs = st.lists(st.floats(0.01, 1000), min_size=3, max_size=12, unique=True).filter(
    lambda v: max(v) / min(v) > 1.5)


def test_exact_power_law():
    pts = [(x, 5 * x ** -1.25) for x in (2, 4, 8, 16, 32)]
    fit = fit_power_law(pts)
    assert fit.exponent == pytest.approx(-1.25, abs=1e-10)
    assert fit.amplitude == pytest.approx(5, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_constant_data():
    assert fit_power_law([(x, 3.0, 0.1) for x in (1, 2, 3, 4)]).exponent == pytest.approx(0.0, abs=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        fit_power_law([(1, 1), (2, 2)])
    with pytest.raises(ValueError):
        fit_power_law([(1, 1), (2, -2), (3, 3)])
    with pytest.raises(ValueError):
        fit_power_law([(0, 1), (2, 2), (3, 3)])


def test_noisy_points_excluded():
    pts = [(x, x ** -0.5, 0.01 * x ** -0.5) for x in (1, 2, 4, 8)] + [(16, 1.0, 0.9)]
    fit = fit_power_law(pts)
    assert fit.points_excluded == 1 and fit.exponent == pytest.approx(-0.5, abs=1e-10)


@given(xs, st.floats(-3, 3), st.floats(0.1, 10), st.floats(0.1, 10))
def test_scale_equivariance(x, s, a, c):
    pts = [(v, a * v ** s) for v in x]
    f1 = fit_power_law(pts)
    f2 = fit_power_law([(c * v, y) for v, y in pts])
    assert f1.exponent == pytest.approx(s, abs=1e-8)
    assert f2.exponent == pytest.approx(f1.exponent, abs=1e-8)
    assert f2.amplitude == pytest.approx(f1.amplitude * c ** -s, rel=1e-6)


@given(st.lists(st.floats(0.5, 500), min_size=6, max_size=10, unique=True).filter(lambda v: max(v) / min(v) > 2),
       st.floats(-2, 2), st.data())
def test_drop_one_point(x, s, data):
    pts = [(v, 2.0 * v ** s) for v in x]
    i = data.draw(st.integers(0, len(pts) - 1))
    rest = pts[:i] + pts[i + 1:]
    if len({v for v, _ in rest}) < 2:
        return
    assert fit_power_law(rest).exponent == pytest.approx(fit_power_law(pts).exponent, abs=1e-10)


def test_jackknife_error_reflects_scatter():
    rng = np.random.default_rng(0)
    x = np.array([8, 16, 32, 64, 128, 256.0])
    noisy = [(v, v ** -1.0 * math.exp(rng.normal(0, 0.05))) for v in x]
    fit = fit_power_law(noisy)
    assert 0 < fit.stderr_exponent < 0.1


def test_scaling_targets():
    assert predicted_beta(NU, RHO) == Fraction(5, 36)
    assert predicted_alpha(NU) == Fraction(-2, 3)
    assert predicted_gamma(NU, RHO) == Fraction(43, 18)
    rep = scaling_law_report({"nu": float(NU), "rho": float(RHO), "alpha": -2 / 3, "beta": 5 / 36,
                              "gamma": 43 / 18})
    assert not rep.missing and all(abs(c.residual) < 1e-12 for c in rep.checks)
    assert rep.targets["beta"] == pytest.approx(5 / 36)


def test_scaling_report_flags_and_missing():
    rep = scaling_law_report({"nu": (4 / 3, 0.01), "alpha": (0.5, 0.01)})
    assert [c.law for c in rep.checks] == ["alpha=2-2nu"]
    assert rep.checks[0].violated
    assert "beta=2nu/(rho+1)" in rep.missing and rep.missing["beta=2nu/(rho+1)"] == ["beta", "rho"]
    with pytest.raises(ValueError, match="missing"):
        scaling_law_report({"beta": 0.1})
    with pytest.raises(ValueError):
        scaling_law_report({"delta": 1.0})


def test_error_propagation():
    rep = scaling_law_report({"nu": (4 / 3, 0.1), "alpha": (-2 / 3, 0.0)})
    # d alpha / d nu = -2
    assert rep.checks[0].stderr == pytest.approx(0.2, rel=1e-6)
    assert not rep.checks[0].violated


def _profile(ps, f, err):
    return [(p, f(p), err) for p in ps]


def test_stable_window_and_fit():
    ps = [0.40, 0.42, 0.44, 0.46, 0.47, 0.48]
    law = lambda p: (0.5 - p) ** (-1 / 3)
    # the smaller size departs near 1/2
    small = [(p, law(p) * (1 if p < 0.455 else 0.5), 0.01) for p in ps]
    big = _profile(ps, law, 0.01)
    assert stable_window([small, big]) == [0, 1, 2]
    specs = [LatticeSpec(Kind.TRIANGULAR_SITE, 32), LatticeSpec(Kind.TRIANGULAR_SITE, 64)]
    res = kappa_third_window(specs, ps, [small, big])
    assert res.window == [0.40, 0.42, 0.44] and res.sign_ok
    assert res.fit.exponent == pytest.approx(-1 / 3, abs=1e-9)


def test_window_errors():
    ps = [0.40, 0.42, 0.44, 0.46]
    specs = [LatticeSpec(Kind.TRIANGULAR_SITE, 32), LatticeSpec(Kind.TRIANGULAR_SITE, 64)]
    a = _profile(ps, lambda p: 1.0, 0.01)
    b = _profile(ps, lambda p: 2.0, 0.01)
    with pytest.raises(EmptyWindowError):
        kappa_third_window(specs, ps, [a, b])
    with pytest.raises(ValueError):
        kappa_third_window(specs, [0.5, 0.6, 0.7], [_profile([0.5, 0.6, 0.7], lambda p: 1.0, 0.1)] * 2)
    # noisy points agree across sizes trivially but cannot be fitted
    noisy = _profile(ps, lambda p: 1.0, 0.8)
    with pytest.raises(EmptyWindowError):
        kappa_third_window(specs, ps, [noisy, noisy])
    neg = _profile(ps, lambda p: -1.0, 0.01)
    assert not kappa_third_window(specs, ps, [neg, neg]).sign_ok
