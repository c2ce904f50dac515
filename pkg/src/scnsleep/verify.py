"""Reduced-scale oracle cross-checks behind ``scnsleep verify``.

Every check compares a model quantity with an independent estimate and
returns a plain dict, so the report serialises straight to JSON.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .geometry import lens_area, triple_overlap_area
from .load_model import (MomentSpec, fit_from_moments, first_moment, sample_origin_loads,
                         second_moment)


def _result(name, passed, value, reference, tolerance, **extra):
    out = {"name": name, "passed": bool(passed), "value": float(value),
           "reference": float(reference), "tolerance": float(tolerance)}
    out.update(extra)
    return out


def _uniform_disk(n, radius, rng):
    """Rejection sampling: independent of the sqrt-uniform radius trick."""
    pts = np.empty((0, 2))
    while len(pts) < n:
        cand = rng.uniform(-radius, radius, (2 * n, 2))
        pts = np.vstack([pts, cand[np.hypot(cand[:, 0], cand[:, 1]) <= radius]])
    return pts[:n]


def check_lens_area(rng, lens=lens_area, r_th=50.0, n=400_000):
    """Lens area against hit-or-miss Monte Carlo at several separations."""
    worst, ok = 0.0, True
    for r in (0.0, 20.0, 50.0, 80.0, 99.0):
        pts = _uniform_disk(n, r_th, rng)
        frac = np.mean(np.hypot(pts[:, 0] - r, pts[:, 1]) <= r_th)
        est = frac * math.pi * r_th**2
        se = math.sqrt(frac * (1 - frac) / n) * math.pi * r_th**2
        gap = abs(float(lens(r, r_th)) - est)
        ok &= gap <= 5 * se + 1e-9 * math.pi * r_th**2
        worst = max(worst, gap / (math.pi * r_th**2))
    return _result("lens_area_monte_carlo", ok, worst, 0.0, 0.0, unit="fraction of disk area")


def check_triple_area(rng, r_th=1.0, n=200_000):
    worst, ok = 0.0, True
    for r1, r2, phi in ((0.5, 0.7, 0.4), (0.9, 0.3, 2.5), (1.0, 1.0, 1.2)):
        pts = _uniform_disk(n, r_th, rng)
        u1 = np.array([r1, 0.0])
        u2 = np.array([r2 * math.cos(phi), r2 * math.sin(phi)])
        hit = (np.hypot(*(pts - u1).T) <= r_th) & (np.hypot(*(pts - u2).T) <= r_th)
        frac = hit.mean()
        se = math.sqrt(frac * (1 - frac) / n) * math.pi * r_th**2
        gap = abs(float(triple_overlap_area(r1, r2, phi, r_th)) - frac * math.pi * r_th**2)
        ok &= gap <= 5 * se
        worst = max(worst, gap / (math.pi * r_th**2))
    return _result("triple_area_monte_carlo", ok, worst, 0.0, 0.0, unit="fraction of disk area")


def check_radial_density(rng, n=50_000, alpha=1e-3):
    """Radii of uniform points in a disk follow P(r <= x) = x^2 / R^2."""
    pts = _uniform_disk(n, 1.0, rng)
    r = np.hypot(pts[:, 0], pts[:, 1])
    p = stats.kstest(r, lambda x: np.clip(x, 0, 1) ** 2).pvalue
    return _result("radial_density", p > alpha, p, alpha, alpha, statistic="ks p-value")


def check_angle_distribution(rng, n=50_000, alpha=1e-3):
    """The angle between two independent uniform points is uniform on [0, pi]."""
    a, b = _uniform_disk(n, 1.0, rng), _uniform_disk(n, 1.0, rng)
    d = np.abs(np.arctan2(a[:, 1], a[:, 0]) - np.arctan2(b[:, 1], b[:, 0]))
    phi = np.where(d > math.pi, 2 * math.pi - d, d)
    p = stats.kstest(phi, stats.uniform(0, math.pi).cdf).pvalue
    return _result("angle_distribution", p > alpha, p, alpha, alpha, statistic="ks p-value")


def check_moments(rng, nu=3.0, n=200_000, e2_samples=50_000):
    """Analytic moments against brute-force deployment sampling."""
    spec = MomentSpec(nu_u=nu, nu_c=nu, e2_samples=e2_samples)
    m1, m2 = first_moment(spec), second_moment(spec).value
    loads = sample_origin_loads(nu, nu, n, rng)
    s1, s2 = loads.mean(), np.mean(loads**2)
    e1, e2 = abs(m1 / s1 - 1), abs(m2 / s2 - 1)
    return [
        _result(f"first_moment_nu{nu:g}", e1 <= 0.01, m1, s1, 0.01, rel_error=e1),
        _result(f"second_moment_nu{nu:g}", e2 <= 0.02, m2, s2, 0.02, rel_error=e2),
    ]


def check_first_moment_closed_form(nu_u=3.0, nu_c=2.0):
    """Series-plus-quadrature mean against nu_u (1 - exp(-nu_c)) / nu_c."""
    m1 = first_moment(MomentSpec(nu_u=nu_u, nu_c=nu_c))
    ref = nu_u * (1 - math.exp(-nu_c)) / nu_c
    return _result("first_moment_closed_form", abs(m1 - ref) <= 1e-6 * ref, m1, ref, 1e-6)


def check_conditional_fit(nu=3.0):
    """The mixture fit keeps both input moments; a Gamma fit ignoring the void mass does not."""
    m1, m2 = 1.0, 1.8
    fit = fit_from_moments(m1, m2, nu)
    gap = max(abs(fit.mean - m1), abs(fit.second_moment - m2))
    # an unconditional Gamma fit has mean m1; mixing it with the void mass shrinks that
    naive_mean = (1 - fit.p0) * m1
    naive_gap = abs(naive_mean - m1)
    ok = gap <= 1e-9 and naive_gap > 1e-6
    return _result("conditional_fit_moments", ok, gap, 0.0, 1e-9, unconditional_mean_gap=naive_gap)


def run_checks(seed=0, lens=lens_area, moments=True) -> dict:
    """Run every check; ``lens`` is injectable so a broken formula can be shown to fail."""
    rng = np.random.default_rng(seed)
    checks = [
        check_lens_area(rng, lens=lens),
        check_triple_area(rng),
        check_radial_density(rng),
        check_angle_distribution(rng),
        check_first_moment_closed_form(),
        check_conditional_fit(),
    ]
    if moments:
        checks.extend(check_moments(rng))
    return {"passed": all(c["passed"] for c in checks), "seed": seed, "checks": checks}
