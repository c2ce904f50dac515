"""Per-SBS load values and the Gamma-mixture model of their distribution.

A UE served by ``n`` awake SBSs spreads a load factor ``1/n`` to each of
them; an SBS's load is the sum of the factors of the UEs in its range.  The
load of a typical SBS is modelled as a point mass ``p0 = exp(-nu_u)`` at zero
(no UE in range) plus a Gamma-distributed positive part whose parameters are
matched to the first two moments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, special, stats

from .geometry import Deployment, lens_area, two_ue_partition

SMALL_SAMPLE = 30


class MomentComputationError(RuntimeError):
    pass


class FitError(ValueError):
    pass


# --------------------------------------------------------------------------
# Instantaneous loads
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LoadSnapshot:
    """Loads of every SBS (zero for sleeping ones) and per-UE load factors."""

    loads: np.ndarray
    factors: np.ndarray
    awake: np.ndarray

    @property
    def served_ue_count(self) -> int:
        return int(np.count_nonzero(self.factors))


def _awake_mask(n_sbs, awake_sbs) -> np.ndarray:
    if awake_sbs is None:
        return np.ones(n_sbs, dtype=bool)
    awake_sbs = np.asarray(awake_sbs)
    if awake_sbs.dtype == bool:
        if awake_sbs.shape != (n_sbs,):
            raise ValueError("awake mask has wrong length")
        return awake_sbs.copy()
    mask = np.zeros(n_sbs, dtype=bool)
    idx = awake_sbs.astype(int).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n_sbs):
        raise IndexError("awake SBS index out of range")
    mask[idx] = True
    return mask


def loads_from_adjacency(in_range: np.ndarray, awake: np.ndarray):
    """Load factors and loads given a UE x SBS coverage matrix and awake mask."""
    cover = in_range & awake[None, :]
    n = cover.sum(axis=1)
    factors = np.zeros(len(n))
    np.divide(1.0, n, out=factors, where=n > 0)
    loads = factors @ cover
    return factors, loads


def compute_loads(deployment: Deployment, awake_sbs=None) -> LoadSnapshot:
    """Evaluate load factors and load values against the awake SBSs.

    ``awake_sbs`` may be a boolean mask or an iterable of SBS indices; None
    means every SBS is awake.
    """
    awake = _awake_mask(deployment.n_sbs, awake_sbs)
    factors, loads = loads_from_adjacency(deployment.in_range, awake)
    return LoadSnapshot(loads=loads, factors=factors, awake=awake)


# --------------------------------------------------------------------------
# Analytic moments
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentSpec:
    """Inputs for the analytic moments of the load of a typical SBS.

    nu_u and nu_c are the mean UE and SBS counts in a disk of radius r_th.
    """

    nu_u: float
    nu_c: float
    r_th: float = 1.0
    series_tail_tol: float = 1e-9
    quad_tol: float = 1e-6
    e2_samples: int = 200_000
    seed: int = 0
    quad_limit: int = 200

    def __post_init__(self):
        if self.nu_u < 0 or self.nu_c < 0:
            raise ValueError("densities must be non-negative")
        if not self.r_th > 0:
            raise ValueError("r_th must be positive")
        for name in ("series_tail_tol", "quad_tol"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.e2_samples < 2:
            raise ValueError("e2_samples must be >= 2")

    @classmethod
    def from_densities(cls, rho_u, rho_c, r_th, **kw) -> "MomentSpec":
        area = math.pi * r_th**2
        return cls(nu_u=rho_u * area, nu_c=rho_c * area, r_th=r_th, **kw)


class SecondMoment(NamedTuple):
    value: float
    e1: float
    e2: float
    e2_stderr: float


def poisson_cutoff(mu: float, tol: float) -> int:
    """Smallest n with P{Poisson(mu) > n} <= tol."""
    if mu <= 0:
        return 0
    return int(stats.poisson.isf(tol, mu))


def _pois_table(mu, n_max):
    """Poisson pmf rows for each rate in ``mu`` over 0..n_max."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    k = np.arange(n_max + 1)
    out = stats.poisson.pmf(k[None, :], mu[:, None])
    out[mu == 0] = 0.0
    out[mu == 0, 0] = 1.0
    return out


def _reciprocal_table(n_rows, n_cols, power=1):
    i = np.arange(n_rows)[:, None]
    j = np.arange(n_cols)[None, :]
    return 1.0 / (i + j + 1.0) ** power


def _single_ue_factor(u, nu_c, tol, power):
    """E[w**power | UE at distance u*r_th], summed over the SBS count in the disk.

    Expands the in-disk SBS count binomially between the overlap and the
    rest of the disk, and the SBSs in the exclusion area as Poisson.
    """
    p_o = lens_area(u, 1.0) / math.pi
    nu_e = nu_c * (1.0 - p_o)
    i_max = poisson_cutoff(nu_c, tol)
    v_max = poisson_cutoff(nu_e, tol)
    pv = _pois_table(nu_e, v_max)[0]
    # g[k] = sum_v P{v} / (k + v + 1)**power
    g = _reciprocal_table(i_max + 1, v_max + 1, power) @ pv
    i = np.arange(i_max + 1)
    k = np.arange(i_max + 1)
    binom = stats.binom.pmf(k[None, :], i[:, None], p_o)
    pc = _pois_table(nu_c, i_max)[0]
    return float(pc @ (binom @ g))


def _radial_integral(spec: MomentSpec, power: int) -> float:
    def integrand(u):
        return _single_ue_factor(u, spec.nu_c, spec.series_tail_tol, power) * 2.0 * u

    res = integrate.quad(integrand, 0.0, 1.0, epsrel=spec.quad_tol, limit=spec.quad_limit, full_output=1)
    if len(res) > 3:
        raise MomentComputationError(f"radial quadrature did not converge: {res[3]}")
    return res[0]


def first_moment(spec: MomentSpec) -> float:
    """Mean load of a typical SBS."""
    if spec.nu_u == 0:
        return 0.0
    return spec.nu_u * _radial_integral(spec, power=1)


def e2_kernel(partition: dict, nu_c: float, r_th: float, tol: float) -> np.ndarray:
    """E[w_1 w_2] for two UEs given the region areas of their configuration.

    The SBS counts in the cells of the origin disk are multinomial given
    their total, which is Poisson(nu_c); the counts in the exclusion areas
    are Poisson.  Poisson-multinomial counts are independent Poissons, so
    the sum over the cell counts and exclusion counts is carried out on the
    shared count (cells covered by both UEs) and one private count per UE.
    """
    full = math.pi * r_th**2
    scale = nu_c / full
    mu_c = scale * (partition["s1"] + partition["a_ec"])
    mu_1 = scale * (partition["s2"] + partition["a_e1"])
    mu_2 = scale * (partition["s3"] + partition["a_e2"])
    n_max = poisson_cutoff(nu_c, tol)
    recip = _reciprocal_table(n_max + 1, n_max + 1)
    p_c = _pois_table(mu_c, n_max)
    h1 = _pois_table(mu_1, n_max) @ recip
    h2 = _pois_table(mu_2, n_max) @ recip
    return np.sum(p_c * h1 * h2, axis=1)


def e2_kernel_expanded(partition: dict, nu_c: float, r_th: float, tol: float) -> float:
    """Reference evaluation of E[w_1 w_2] by explicit multinomial expansion.

    Sums over the SBS total ``i`` in the origin disk, every split
    ``(m1..m4)`` of it over the four cells, and the Poisson exclusion counts.
    Slow; used to cross-check :func:`e2_kernel` at scalar configurations.
    """
    full = math.pi * r_th**2
    cells = np.array([float(partition[k]) for k in ("s1", "s2", "s3", "s4")]) / full
    nu_ec, nu_e1, nu_e2 = (nu_c * float(partition[k]) / full for k in ("a_ec", "a_e1", "a_e2"))
    i_max = poisson_cutoff(nu_c, tol)
    v_max = poisson_cutoff(nu_c, tol)
    n_top = i_max + 2 * v_max + 2
    g1 = _reciprocal_table(n_top, v_max + 1) @ _pois_table(nu_e1, v_max)[0]
    g2 = _reciprocal_table(n_top, v_max + 1) @ _pois_table(nu_e2, v_max)[0]
    p_vc = _pois_table(nu_ec, v_max)[0]
    vc = np.arange(v_max + 1)

    log_p = np.log(np.where(cells > 0, cells, 1.0))
    total = 0.0
    for i in range(i_max + 1):
        w_i = stats.poisson.pmf(i, nu_c)
        m = np.array([(a, b, c, i - a - b - c)
                      for a in range(i + 1) for b in range(i + 1 - a) for c in range(i + 1 - a - b)])
        feasible = np.all((m == 0) | (cells[None, :] > 0), axis=1)
        m = m[feasible]
        log_pmf = special.gammaln(i + 1) - special.gammaln(m + 1).sum(axis=1) + (m * log_p).sum(axis=1)
        pmf = np.exp(log_pmf)
        n_o1 = m[:, 0] + m[:, 1]
        n_o2 = m[:, 0] + m[:, 2]
        k = (p_vc[None, :] * g1[n_o1[:, None] + vc[None, :]] * g2[n_o2[:, None] + vc[None, :]]).sum(axis=1)
        total += w_i * float(pmf @ k)
    return total


def second_moment(spec: MomentSpec) -> SecondMoment:
    """Second moment of the load of a typical SBS.

    The single-UE term is evaluated by series and quadrature; the pair term
    by Monte Carlo integration over the two UE radii and their angular
    separation, whose standard error is reported.
    """
    if spec.nu_u == 0:
        return SecondMoment(0.0, 0.0, 0.0, 0.0)
    e1 = spec.nu_u * _radial_integral(spec, power=2)
    rng = np.random.default_rng(spec.seed)
    n = spec.e2_samples
    r1 = spec.r_th * np.sqrt(rng.random(n))
    r2 = spec.r_th * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, math.pi, n)
    chunk = 20_000
    vals = np.empty(n)
    for lo in range(0, n, chunk):
        sl = slice(lo, lo + chunk)
        part = two_ue_partition(r1[sl], r2[sl], phi[sl], spec.r_th)
        vals[sl] = e2_kernel(part, spec.nu_c, spec.r_th, spec.series_tail_tol)
    nu2 = spec.nu_u**2
    e2 = nu2 * float(vals.mean())
    e2_se = nu2 * float(vals.std(ddof=1)) / math.sqrt(n)
    return SecondMoment(e1 + e2, e1, e2, e2_se)


# --------------------------------------------------------------------------
# Gamma mixture
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaMixtureFit:
    """Zero-inflated Gamma: mass ``p0`` at zero, Gamma(alpha, rate beta) otherwise."""

    alpha: float
    beta: float
    p0: float
    n_samples: int | None = None
    zero_fraction: float | None = None

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise FitError("alpha and beta must be positive")
        if not 0 <= self.p0 <= 1:
            raise FitError("p0 must lie in [0, 1]")

    @property
    def small_sample(self) -> bool:
        return self.n_samples is not None and self.n_samples < SMALL_SAMPLE

    @property
    def mean(self) -> float:
        return (1 - self.p0) * self.alpha / self.beta

    @property
    def second_moment(self) -> float:
        return (1 - self.p0) * self.alpha * (1 + self.alpha) / self.beta**2

    def cdf(self, x):
        return load_cdf(x, self)

    def pdf(self, x):
        return load_pdf(x, self)


def fit_from_moments(m1: float, m2: float, nu_u: float) -> GammaMixtureFit:
    """Moment-match the positive part of the load given E[L], E[L^2] and nu_u."""
    p0 = math.exp(-nu_u)
    if not m1 > 0 or p0 >= 1:
        raise FitError("mean load must be positive")
    m1c = m1 / (1 - p0)
    m2c = m2 / (1 - p0)
    var = m2c - m1c * m1c
    if not var > 0:
        raise FitError("non-positive conditional variance; Gamma fit undefined")
    beta = m1c / var
    return GammaMixtureFit(alpha=float(beta * m1c), beta=float(beta), p0=p0)


def fit_empirical(samples, nu_u: float) -> GammaMixtureFit:
    """Fit the mixture from observed loads.

    Moments of the positive samples give the Gamma part; the void mass is
    the analytic ``exp(-nu_u)``.  The observed zero fraction and sample size
    are kept on the result for diagnostics.
    """
    x = np.asarray(samples, dtype=float).ravel()
    pos = x[x > 0]
    if pos.size < 2:
        raise FitError("need at least two positive load samples")
    p0 = math.exp(-nu_u)
    fit = fit_from_moments((1 - p0) * pos.mean(), (1 - p0) * np.mean(pos * pos), nu_u)
    return GammaMixtureFit(fit.alpha, fit.beta, fit.p0,
                           n_samples=int(pos.size), zero_fraction=float(np.mean(x == 0)))


def load_cdf(x, fit: GammaMixtureFit):
    """P{L <= x}; equals p0 at x = 0."""
    xa = np.asarray(x, dtype=float)
    g = stats.gamma.cdf(np.maximum(xa, 0.0), fit.alpha, scale=1.0 / fit.beta)
    out = np.where(xa < 0, 0.0, fit.p0 + (1 - fit.p0) * g)
    return float(out) if out.ndim == 0 else out


def load_pdf(x, fit: GammaMixtureFit):
    """Gamma density scaled by 1 - p0 for x > 0; the point mass p0 at x = 0."""
    xa = np.asarray(x, dtype=float)
    dens = (1 - fit.p0) * stats.gamma.pdf(np.where(xa > 0, xa, 1.0), fit.alpha, scale=1.0 / fit.beta)
    out = np.where(xa > 0, dens, np.where(xa == 0, fit.p0, 0.0))
    return float(out) if out.ndim == 0 else out


def dlb_should_stop(l_min: float, n_next_hop_idle: int, kappa: float, fit: GammaMixtureFit) -> bool:
    """True when finding a lower load among the next hop's idle SBSs is unlikely.

    The chance that at least one of ``n_next_hop_idle`` independent loads
    falls below ``l_min`` is compared with ``kappa``.
    """
    if n_next_hop_idle <= 0:
        return True
    f = 1.0 if math.isinf(l_min) else load_cdf(l_min, fit)
    return 1.0 - (1.0 - f) ** n_next_hop_idle < kappa


# --------------------------------------------------------------------------
# Deployment-sampling reference
# --------------------------------------------------------------------------

def sample_origin_loads(nu_u: float, nu_c: float, n: int, rng: np.random.Generator,
                        chunk: int = 50_000) -> np.ndarray:
    """Load of an SBS at the origin over ``n`` independent random deployments.

    Works in units of r_th.  UEs are drawn in the unit disk and the other
    SBSs in the radius-2 disk, which holds every SBS able to serve them.
    """
    out = np.empty(n)
    for lo in range(0, n, chunk):
        b = min(chunk, n - lo)
        n_ue = rng.poisson(nu_u, b)
        n_bs = rng.poisson(4.0 * nu_c, b)
        u_max, s_max = int(n_ue.max(initial=0)), int(n_bs.max(initial=0))
        if u_max == 0:
            out[lo:lo + b] = 0.0
            continue
        ur = np.sqrt(rng.random((b, u_max)))
        ua = rng.uniform(0, 2 * math.pi, (b, u_max))
        sr = 2.0 * np.sqrt(rng.random((b, s_max)))
        sa = rng.uniform(0, 2 * math.pi, (b, s_max))
        ue_ok = np.arange(u_max)[None, :] < n_ue[:, None]
        bs_ok = np.arange(s_max)[None, :] < n_bs[:, None]
        ux, uy = ur * np.cos(ua), ur * np.sin(ua)
        sx, sy = sr * np.cos(sa), sr * np.sin(sa)
        d2 = (ux[:, :, None] - sx[:, None, :]) ** 2 + (uy[:, :, None] - sy[:, None, :]) ** 2
        n_serv = 1 + np.sum((d2 <= 1.0) & bs_ok[:, None, :], axis=2)
        out[lo:lo + b] = np.sum(np.where(ue_ok, 1.0 / n_serv, 0.0), axis=1)
    return out


def ks_distance(samples, fit: GammaMixtureFit) -> float:
    """Largest gap between the fitted CDF and the empirical CDF of ``samples``.

    Both CDFs are compared on each side of every jump, which handles the
    atom at zero correctly.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("no samples")
    vals, counts = np.unique(x, return_counts=True)
    ecdf_right = np.cumsum(counts) / x.size
    ecdf_left = ecdf_right - counts / x.size
    f_right = np.atleast_1d(load_cdf(vals, fit))
    # the fitted CDF is continuous except at zero
    f_left = np.where(vals == 0, 0.0, f_right)
    return float(max(np.max(np.abs(f_right - ecdf_right)), np.max(np.abs(f_left - ecdf_left))))
