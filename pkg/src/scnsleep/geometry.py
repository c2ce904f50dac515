"""Spatial sampling and circle-overlap areas for small-cell deployments.

All circles handled here share one radius, the service threshold distance
``r_th``: an SBS at distance <= r_th from a UE can serve it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# Relative tolerance used for case predicates and coincidence tests.
EPS = 1e-12


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Deployment:
    """SBS and UE positions inside a disk of radius ``region_radius``.

    Positions are stored as ``(n, 2)`` float arrays.
    """

    sbs_positions: np.ndarray
    ue_positions: np.ndarray
    r_th: float
    region_radius: float
    ue_sbs_dist: np.ndarray = field(init=False, repr=False, compare=False)
    sbs_sbs_dist: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sbs = np.asarray(self.sbs_positions, dtype=float).reshape(-1, 2)
        ues = np.asarray(self.ue_positions, dtype=float).reshape(-1, 2)
        if not self.r_th > 0:
            raise ValueError("r_th must be positive")
        if self.region_radius < self.r_th:
            raise ValueError("region_radius must be >= r_th")
        for name, pts in (("sbs", sbs), ("ue", ues)):
            if not np.all(np.isfinite(pts)):
                raise ValueError(f"non-finite {name} coordinate")
            if len(pts) and np.max(np.hypot(pts[:, 0], pts[:, 1])) > self.region_radius * (1 + 1e-9):
                raise ValueError(f"{name} position outside region")
        object.__setattr__(self, "sbs_positions", sbs)
        object.__setattr__(self, "ue_positions", ues)
        object.__setattr__(self, "ue_sbs_dist", pairwise_distances(ues, sbs))
        object.__setattr__(self, "sbs_sbs_dist", pairwise_distances(sbs, sbs))

    @property
    def n_sbs(self) -> int:
        return len(self.sbs_positions)

    @property
    def n_ue(self) -> int:
        return len(self.ue_positions)

    @property
    def in_range(self) -> np.ndarray:
        """Boolean ``(n_ue, n_sbs)`` matrix of UE-SBS pairs within r_th."""
        return self.ue_sbs_dist <= self.r_th

    @classmethod
    def sample(cls, rho_c, rho_u, region_radius, r_th, rng) -> "Deployment":
        sbs = sample_hppp(rho_c, region_radius, rng)
        ues = sample_hppp(rho_u, region_radius, rng)
        return cls(sbs, ues, r_th, region_radius)


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    diff = a[:, None, :] - b[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def sample_hppp(density: float, region_radius: float, rng: np.random.Generator) -> np.ndarray:
    """Sample a homogeneous Poisson point process in a disk centred at the origin.

    Returns an ``(n, 2)`` array; ``n ~ Poisson(density * pi * region_radius**2)``.
    """
    if density < 0:
        raise ValueError("density must be non-negative")
    if not region_radius > 0:
        raise ValueError("region_radius must be positive")
    n = rng.poisson(density * math.pi * region_radius**2) if density > 0 else 0
    if n == 0:
        return np.empty((0, 2))
    rad = region_radius * np.sqrt(rng.random(n))
    ang = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))


def lens_area(r, r_th):
    """Intersection area of two disks of radius ``r_th`` whose centres are ``r`` apart.

    Accepts scalars or arrays; ``r`` must lie in ``[0, 2 r_th]``.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(r_arr > 2 * r_th * (1 + EPS)):
        raise ValueError("lens_area requires 0 <= r <= 2*r_th")
    x = np.clip(r_arr / (2 * r_th), 0.0, 1.0)
    area = 2 * r_th**2 * np.arccos(x) - 0.5 * r_arr * np.sqrt(np.maximum(4 * r_th**2 - r_arr**2, 0.0))
    area = np.maximum(area, 0.0)
    return float(area) if area.ndim == 0 else area


def exclusion_area(r, r_th):
    """Part of a UE's service disk lying outside the disk of an SBS ``r`` away."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr > r_th * (1 + EPS)):
        raise ValueError("exclusion_area requires 0 <= r <= r_th")
    return math.pi * r_th**2 - lens_area(r, r_th)


@dataclass(frozen=True)
class TwoUeAreas:
    """Partition of the origin SBS disk induced by the service disks of two UEs.

    ``triple`` is the region covered by all three disks.  ``constituent_areas``
    lists the non-degenerate cells of the origin disk (4 for cases I and II,
    3 for case III).
    """

    case_id: str
    a_ec: float
    a_o1: float
    a_o2: float
    a_e1: float
    a_e2: float
    triple: float
    constituent_areas: tuple
    ue_distance: float


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def triple_overlap_area(r1, r2, phi, r_th):
    """Area common to the disks around the origin and the two UEs (vectorised).

    UE 1 sits at polar ``(r1, 0)`` and UE 2 at ``(r2, phi)``.  The boundary
    of the intersection is made of arcs; each circle contributes the part of
    its circumference lying inside the two other disks, and the area follows
    from Green's theorem along those arcs.
    """
    r1, r2, phi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r1, r2, phi)))
    R = float(r_th)
    cx = np.stack([np.zeros_like(r1), r1, r2 * np.cos(phi)])
    cy = np.stack([np.zeros_like(r1), np.zeros_like(r1), r2 * np.sin(phi)])

    area = np.zeros_like(r1)
    pairs = ((0, 1, 2), (1, 0, 2), (2, 0, 1))
    for a, b, c in pairs:
        dxb, dyb = cx[b] - cx[a], cy[b] - cy[a]
        dxc, dyc = cx[c] - cx[a], cy[c] - cy[a]
        db, dc = np.hypot(dxb, dyb), np.hypot(dxc, dyc)
        hb = np.arccos(np.clip(db / (2 * R), 0.0, 1.0))
        hc = np.arccos(np.clip(dc / (2 * R), 0.0, 1.0))
        tb = np.arctan2(dyb, dxb)
        delta = _wrap(np.arctan2(dyc, dxc) - tb)
        lo = np.maximum(-hb, delta - hc)
        hi = np.minimum(hb, delta + hc)
        # coincident centres: the other circle covers this whole circumference
        same_b = db <= EPS * R
        same_c = dc <= EPS * R
        lo = np.where(same_b, delta - hc, lo)
        hi = np.where(same_b, delta + hc, hi)
        lo = np.where(same_c & ~same_b, -hb, lo)
        hi = np.where(same_c & ~same_b, hb, hi)
        a0, a1 = tb + lo, tb + np.maximum(hi, lo)
        both = same_b & same_c
        a0 = np.where(both, 0.0, a0)
        a1 = np.where(both, 2 * np.pi, a1)
        contrib = 0.5 * (
            R * R * (a1 - a0)
            + R * cx[a] * (np.sin(a1) - np.sin(a0))
            - R * cy[a] * (np.cos(a1) - np.cos(a0))
        )
        area = area + contrib

    # two coincident circles share a boundary that Green's sum counts twice;
    # the intersection then reduces to a single lens
    d12 = np.hypot(cx[1] - cx[2], cy[1] - cy[2])
    full = math.pi * R * R
    lens_r1 = lens_area(np.minimum(r1, 2 * R), R)
    lens_r2 = lens_area(np.minimum(r2, 2 * R), R)
    z1, z2, z12 = r1 <= EPS * R, r2 <= EPS * R, d12 <= EPS * R
    area = np.where(z1, lens_r2, area)
    area = np.where(z2 & ~z1, lens_r1, area)
    area = np.where(z12 & ~z1 & ~z2, lens_r1, area)
    area = np.where(z1 & z2, full, area)
    area = np.clip(area, 0.0, full)
    return float(area) if area.ndim == 0 else area


def ue_distance(r1, r2, phi):
    """Distance between two UEs at radii r1, r2 with angular separation phi."""
    return np.sqrt(np.maximum(r1 * r1 + r2 * r2 - 2 * r1 * r2 * np.cos(phi), 0.0))


def _check_two_ue_domain(r1, r2, phi, r_th):
    r1, r2, phi = (np.asarray(v, dtype=float) for v in (r1, r2, phi))
    tol = r_th * EPS
    if np.any(r1 < 0) or np.any(r2 < 0) or np.any(r1 > r_th + tol) or np.any(r2 > r_th + tol):
        raise ValueError("UE radii must lie in [0, r_th]")
    if np.any(phi < -EPS) or np.any(phi > math.pi + EPS):
        raise ValueError("phi must lie in [0, pi]")


def two_ue_partition(r1, r2, phi, r_th):
    """Vectorised region areas for the two-UE configuration.

    Returns a dict of arrays: ``s1`` (all three disks), ``s2`` (origin and
    UE 1 only), ``s3`` (origin and UE 2 only), ``s4`` (origin only),
    ``a_ec`` (both UEs, outside origin disk), ``a_e1``, ``a_e2`` (one UE only)
    and ``d12``.
    """
    _check_two_ue_domain(r1, r2, phi, r_th)
    r1 = np.minimum(np.asarray(r1, dtype=float), r_th)
    r2 = np.minimum(np.asarray(r2, dtype=float), r_th)
    phi = np.clip(np.asarray(phi, dtype=float), 0.0, math.pi)
    full = math.pi * r_th**2
    d12 = np.minimum(ue_distance(r1, r2, phi), 2 * r_th)
    t = triple_overlap_area(r1, r2, phi, r_th)
    l1, l2, l12 = lens_area(r1, r_th), lens_area(r2, r_th), lens_area(d12, r_th)
    pos = lambda v: np.maximum(v, 0.0)  # noqa: E731
    return {
        "s1": t,
        "s2": pos(l1 - t),
        "s3": pos(l2 - t),
        "s4": pos(full - l1 - l2 + t),
        "a_ec": pos(l12 - t),
        "a_e1": pos(full - l1 - l12 + t),
        "a_e2": pos(full - l2 - l12 + t),
        "d12": d12,
    }


def two_ue_areas(r1: float, r2: float, phi: float, r_th: float) -> TwoUeAreas:
    """Classify a two-UE orientation and return all overlap/exclusion areas.

    Case III: one UE's overlap with the origin disk lies inside the other
    UE's disk, leaving three cells.  Case II: the two UE disks overlap only
    inside the origin disk (no common exclusion).  Case I: everything else,
    where all three circles bound the common region.
    """
    p = {k: float(v) for k, v in two_ue_partition(r1, r2, phi, r_th).items()}
    tol = EPS * math.pi * r_th**2 * 10
    s1, s2, s3, s4 = p["s1"], p["s2"], p["s3"], p["s4"]
    if s3 <= tol:
        case, cells = "III", (s1, s2, s4)
    elif s2 <= tol:
        case, cells = "III", (s1, s3, s4)
    elif p["a_ec"] <= tol:
        case, cells = "II", (s1, s2, s3, s4)
    else:
        case, cells = "I", (s1, s2, s3, s4)
    return TwoUeAreas(
        case_id=case,
        a_ec=p["a_ec"],
        a_o1=s1 + s2,
        a_o2=s1 + s3,
        a_e1=p["a_e1"],
        a_e2=p["a_e2"],
        triple=s1,
        constituent_areas=cells,
        ue_distance=p["d12"],
    )
