"""Power-law fits, scaling-law cross-checks and the third-derivative window fit."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

import numpy as np

MAX_RELATIVE_ERROR = 0.5


class PowerLawFit(NamedTuple):
    """``y ~ amplitude * x**exponent`` from weighted least squares in log-log coordinates."""

    exponent: float
    amplitude: float
    stderr_exponent: float
    r_squared: float
    window: tuple[float, float]
    points_used: int
    points_excluded: int


def _wls(lx, ly, w):
    W = w.sum()
    mx = (w * lx).sum() / W
    my = (w * ly).sum() / W
    sxx = (w * (lx - mx) ** 2).sum()
    sxy = (w * (lx - mx) * (ly - my)).sum()
    if sxx <= 0:
        raise ValueError("need at least two distinct x values")
    slope = sxy / sxx
    return slope, my - slope * mx


def fit_power_law(points: Sequence[Sequence[float]]) -> PowerLawFit:
    """Fit ``(x, y, y_stderr)`` triples (``y_stderr`` optional) by log-log weighted least squares.

    Weights are ``(y / y_stderr)**2``; points with ``y_stderr / y > 0.5`` are dropped.
    If any error is zero or missing the data are treated as exact and weighted
    equally.  The exponent error is a leave-one-out jackknife over points.
    """
    pts = [tuple(float(v) for v in p) for p in points]
    if len(pts) < 3:
        raise ValueError("a power-law fit needs at least 3 points")
    for p in pts:
        if p[0] <= 0 or p[1] <= 0:
            raise ValueError(f"power-law fit needs positive x and y, got {p[:2]}")
    errs = [p[2] if len(p) > 2 else 0.0 for p in pts]
    exact = any(not e > 0 for e in errs)
    keep = [i for i, p in enumerate(pts) if exact or errs[i] / p[1] <= MAX_RELATIVE_ERROR]
    if len(keep) < 3:
        raise ValueError(f"only {len(keep)} points have relative error <= {MAX_RELATIVE_ERROR}")
    x = np.array([pts[i][0] for i in keep])
    y = np.array([pts[i][1] for i in keep])
    lx, ly = np.log(x), np.log(y)
    w = np.ones_like(lx) if exact else np.array([(pts[i][1] / errs[i]) ** 2 for i in keep])
    slope, icpt = _wls(lx, ly, w)
    resid = ly - (icpt + slope * lx)
    my = (w * ly).sum() / w.sum()
    ss_tot = (w * (ly - my) ** 2).sum()
    ss_res = (w * resid ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    n = len(keep)
    loo = []
    for i in range(n):
        mask = np.arange(n) != i
        if np.unique(lx[mask]).size >= 2:
            loo.append(_wls(lx[mask], ly[mask], w[mask])[0])
    loo = np.array(loo)
    err = math.sqrt((loo.size - 1) / loo.size * float(((loo - loo.mean()) ** 2).sum())) if loo.size > 1 else float("nan")
    return PowerLawFit(float(slope), float(math.exp(icpt)), err, float(r2), (float(x.min()), float(x.max())),
                       n, len(pts) - n)


# ---------------------------------------------------------------------------
# scaling laws

NU = Fraction(4, 3)
RHO = Fraction(48, 5)


def size_rho(rho_radial):
    """Cluster-size tail exponent from the radial one-arm convention ``pi(n) ~ n^(-1/rho)``: ``2 rho - 1``."""
    return 2 * rho_radial - 1


def predicted_alpha(nu):
    return 2 - 2 * nu


def predicted_beta(nu, rho):
    rs = size_rho(rho)
    return 2 * nu / (rs + 1)


def predicted_gamma(nu, rho):
    rs = size_rho(rho)
    return 2 * nu * (rs - 1) / (rs + 1)


class LawCheck(NamedTuple):
    law: str
    measured: float
    predicted: float
    residual: float
    stderr: float
    violated: bool


class ScalingReport(NamedTuple):
    checks: list
    missing: dict
    targets: dict


_LAWS = {
    "alpha=2-2nu": ("alpha", ("nu",), lambda v: predicted_alpha(v["nu"])),
    "beta=2nu/(rho+1)": ("beta", ("nu", "rho"), lambda v: predicted_beta(v["nu"], v["rho"])),
    "gamma=2nu(rho-1)/(rho+1)": ("gamma", ("nu", "rho"), lambda v: predicted_gamma(v["nu"], v["rho"])),
}


def _value(entry):
    if isinstance(entry, PowerLawFit):
        return entry.exponent, entry.stderr_exponent
    if isinstance(entry, (tuple, list)):
        return float(entry[0]), float(entry[1])
    return float(entry), 0.0


def scaling_law_report(fits: Mapping[str, object], sigmas: float = 2.0) -> ScalingReport:
    """Residuals of the hyperscaling relations under measured exponents.

    ``fits`` maps any of ``alpha, beta, gamma, nu, rho`` to a value, a
    ``(value, stderr)`` pair or a :class:`PowerLawFit`.  ``rho`` is the radial
    one-arm exponent (``pi(n) ~ n^(-1/rho)``); the laws use the cluster-size
    version ``2 rho - 1``.  Errors are propagated to first order.
    """
    vals = {k: _value(v) for k, v in fits.items()}
    unknown = set(vals) - {"alpha", "beta", "gamma", "nu", "rho"}
    if unknown:
        raise ValueError(f"unknown exponents: {sorted(unknown)}")
    checks, missing = [], {}
    for name, (lhs, needs, f) in _LAWS.items():
        absent = [k for k in (lhs,) + needs if k not in vals]
        if absent:
            missing[name] = absent
            continue
        point = {k: vals[k][0] for k in needs}
        pred = float(f(point))
        var = vals[lhs][1] ** 2
        for k in needs:
            h = 1e-6 * max(1.0, abs(point[k]))
            up = dict(point, **{k: point[k] + h})
            dn = dict(point, **{k: point[k] - h})
            grad = (float(f(up)) - float(f(dn))) / (2 * h)
            var += (grad * vals[k][1]) ** 2
        res = vals[lhs][0] - pred
        err = math.sqrt(var)
        checks.append(LawCheck(name, vals[lhs][0], pred, res, err, abs(res) > sigmas * err if err > 0 else res != 0))
    if not checks:
        raise ValueError("no scaling law can be checked; missing " +
                         "; ".join(f"{law}: {', '.join(m)}" for law, m in missing.items()))
    targets = {}
    if "nu" in vals:
        targets["alpha"] = float(predicted_alpha(vals["nu"][0]))
        if "rho" in vals:
            targets["beta"] = float(predicted_beta(vals["nu"][0], vals["rho"][0]))
            targets["gamma"] = float(predicted_gamma(vals["nu"][0], vals["rho"][0]))
    return ScalingReport(checks, missing, targets)


# ---------------------------------------------------------------------------
# third-derivative window


class EmptyWindowError(ValueError):
    """No grid point is size-stable, so no exponent can be fitted."""


class KappaWindow(NamedTuple):
    fit: PowerLawFit | None
    window: list            # p values in the stable window
    sign_ok: bool           # kappa''' > 0 on every window point below 1/2
    halved: PowerLawFit | None
    sizes: tuple


def stable_window(profiles: Sequence[Sequence], sigmas: float = 2.0) -> list[int]:
    """Indices where the two largest sizes agree within ``sigmas`` combined standard errors.

    ``profiles[s][i]`` is a ``(p, value, stderr)`` triple for size ``s`` (sizes ascending).
    """
    if len(profiles) < 2:
        raise ValueError("size stability needs at least two sizes")
    a, b = profiles[-2], profiles[-1]
    out = []
    for i, (pa, pb) in enumerate(zip(a, b)):
        if pa[0] != pb[0]:
            raise ValueError("profiles must share the p grid")
        err = math.hypot(pa[2], pb[2])
        if abs(pa[1] - pb[1]) <= sigmas * err:
            out.append(i)
    return out


def kappa_third_window(spec_list: Sequence, p_grid: Sequence[float], curves: Sequence) -> KappaWindow:
    """Fit ``|kappa'''| ~ (1/2 - p)^s`` over the size-stable part of a grid below 1/2.

    ``curves`` are microcanonical curves (one per spec, sizes ascending) or
    precomputed profiles of ``(p, value, stderr)``.  The fit uses the largest
    size.  Raises :class:`EmptyWindowError` when fewer than 3 points are both
    stable and resolved (relative error at most ``MAX_RELATIVE_ERROR``).
    """
    from .microcanonical import derivative_profile
    if len(spec_list) != len(curves):
        raise ValueError("one curve per spec is required")
    order = np.argsort([s.n for s in spec_list], kind="stable")
    profiles = []
    for i in order:
        c = curves[i]
        prof = derivative_profile(c, p_grid, 3) if hasattr(c, "mean") else list(c)
        profiles.append([tuple(map(float, pt)) for pt in prof])
    if any(pt[0] >= 0.5 for pt in profiles[-1]):
        raise ValueError("the window fit uses p < 1/2")
    big = profiles[-1]
    # a point belongs to the window only if it is also resolved well enough to enter the fit
    idx = [i for i in stable_window(profiles) if big[i][2] <= MAX_RELATIVE_ERROR * abs(big[i][1])]
    sizes = tuple(spec_list[i].n for i in order)
    window = [big[i][0] for i in idx]
    if len(idx) < 3:
        raise EmptyWindowError(f"only {len(idx)} size-stable grid points (sizes {sizes})")
    sign_ok = all(big[i][1] > 0 for i in idx)
    pts = [(0.5 - big[i][0], abs(big[i][1]), big[i][2]) for i in idx]
    fit = fit_power_law(pts)
    half = sorted(pts)[: max(3, len(pts) // 2)]
    halved = fit_power_law(half) if len(half) < len(pts) else None
    return KappaWindow(fit, window, sign_ok, halved, sizes)
