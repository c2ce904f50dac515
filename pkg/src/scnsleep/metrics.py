"""Blocking probability, per-user throughput and energy efficiency."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Z95 = 1.959963984540054


def blocking_probability(blocked: int, total: int) -> float:
    if blocked < 0 or total < 0:
        raise ValueError("counts must be non-negative")
    if blocked > total:
        raise ValueError("more blocked requests than requests")
    return blocked / total if total else 0.0


def average_throughput(total_bits: float, n_users: int, sim_time: float) -> float:
    """Delivered bits per user per second."""
    if n_users <= 0 or sim_time <= 0:
        raise ValueError("n_users and sim_time must be positive")
    return total_bits / (n_users * sim_time)


def energy_efficiency(r_scn: float, total_energy: float) -> float:
    """Throughput per unit energy, energy given in P_max * seconds."""
    if not total_energy > 0:
        raise ValueError("total energy must be positive")
    return r_scn / total_energy


@dataclass(frozen=True)
class MetricStat:
    mean: float
    std: float
    half_width: float
    n: int

    @property
    def ci(self) -> tuple:
        return (self.mean - self.half_width, self.mean + self.half_width)

    @property
    def degenerate(self) -> bool:
        return self.n < 2


@dataclass(frozen=True)
class MetricsReport:
    p_block: float
    r_scn: float
    ee: float | None
    request_count: int
    blocked_count: int
    total_bits: float
    total_energy: float
    mode_time: dict = field(default_factory=dict)
    n_users: int = 0
    duration: float = 0.0
    stats: dict | None = None

    @classmethod
    def from_counts(cls, *, requests, blocked, total_bits, total_energy, n_users, duration,
                    mode_time=None) -> "MetricsReport":
        r_scn = average_throughput(total_bits, n_users, duration) if n_users > 0 else 0.0
        ee = energy_efficiency(r_scn, total_energy) if total_energy > 0 else None
        return cls(
            p_block=blocking_probability(blocked, requests),
            r_scn=r_scn,
            ee=ee,
            request_count=requests,
            blocked_count=blocked,
            total_bits=total_bits,
            total_energy=total_energy,
            mode_time=dict(mode_time or {}),
            n_users=n_users,
            duration=duration,
        )


def _stat(values) -> MetricStat | None:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return None
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return MetricStat(float(v.mean()), std, Z95 * std / math.sqrt(v.size), int(v.size))


AGGREGATED = ("p_block", "r_scn", "ee", "total_energy", "total_bits")


def aggregate(reports) -> MetricsReport:
    """Replication means with sample std and normal-approximation 95% CIs.

    The result does not depend on the order of ``reports`` beyond
    floating-point summation order, which is fixed by sorting.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to aggregate")
    stats = {}
    for name in AGGREGATED:
        vals = [getattr(r, name) for r in reports]
        vals = sorted(vals, key=lambda x: (x is None, x if x is not None else 0.0))
        stats[name] = _stat(vals)
    modes = sorted({k for r in reports for k in r.mode_time})
    mode_time = {k: float(np.mean(sorted(r.mode_time.get(k, 0.0) for r in reports))) for k in modes}
    ee = stats["ee"].mean if stats["ee"] is not None else None
    return MetricsReport(
        p_block=stats["p_block"].mean,
        r_scn=stats["r_scn"].mean,
        ee=ee,
        request_count=sum(r.request_count for r in reports),
        blocked_count=sum(r.blocked_count for r in reports),
        total_bits=stats["total_bits"].mean,
        total_energy=stats["total_energy"].mean,
        mode_time=mode_time,
        n_users=int(round(np.mean([r.n_users for r in reports]))),
        duration=reports[0].duration,
        stats=stats,
    )
