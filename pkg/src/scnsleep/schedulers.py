"""On/off scheduling policies.

Each time a sleeping SBS wakes up on its own, the policy picks an idle SBS
to turn off so the sleeping fraction stays fixed:

* ROO picks uniformly at random.
* CLB picks the idle SBS with the smallest load over the whole network.
* DLB lets the waking SBS search idle neighbours hop by hop (hop k covers
  k * r_th) and stops once a lower load further out is unlikely under the
  fitted load distribution.
* WUC turns off like CLB, and may also wake a sleeping SBS early to serve
  a waiting request.

All ties go to the lowest SBS id.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .load_model import GammaMixtureFit, dlb_should_stop
from .power import DEFAULT_PROFILE, Mode, PowerProfile


class Kind(str, enum.Enum):
    ROO = "ROO"
    CLB = "CLB"
    DLB = "DLB"
    WUC = "WUC"


@dataclass(frozen=True)
class SchedulerPolicy:
    kind: Kind
    kappa: float = 0.3
    max_hops: int = 3
    load_fit: GammaMixtureFit | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.DLB:
            if not 0 < self.kappa < 1:
                raise ValueError("DLB needs kappa in (0, 1)")
            if self.max_hops < 1:
                raise ValueError("DLB needs max_hops >= 1")

    @property
    def load_based_init(self) -> bool:
        return self.kind in (Kind.CLB, Kind.DLB)


def _argmin_by_id(values: np.ndarray, mask: np.ndarray):
    if not mask.any():
        return None
    masked = np.where(mask, values, np.inf)
    best = np.flatnonzero(masked == masked.min())
    return int(best[0])


def sleep_count(n_sbs: int, on_ratio: float) -> int:
    return int(math.floor((1.0 - on_ratio) * n_sbs + 0.5))


def initial_sleepers(policy: SchedulerPolicy, loads: np.ndarray, on_ratio: float,
                     rng: np.random.Generator) -> np.ndarray:
    """SBS ids to put to sleep at time zero.

    Load-based policies take the lowest-load SBSs; the others a random subset.
    """
    if not 0 < on_ratio <= 1:
        raise ValueError("on_ratio must lie in (0, 1]")
    n = len(loads)
    k = sleep_count(n, on_ratio)
    if k == 0:
        return np.empty(0, dtype=int)
    if policy.load_based_init:
        order = np.lexsort((np.arange(n), loads))
        return np.sort(order[:k])
    return np.sort(rng.choice(n, size=k, replace=False))


def roo_pick(idle: np.ndarray, rng: np.random.Generator):
    ids = np.flatnonzero(idle)
    if ids.size == 0:
        return None
    return int(ids[rng.integers(ids.size)])


def clb_pick(idle: np.ndarray, loads: np.ndarray):
    return _argmin_by_id(loads, idle)


def dlb_pick(decision_maker: int, idle: np.ndarray, loads: np.ndarray, sbs_dist: np.ndarray,
             r_th: float, policy: SchedulerPolicy):
    """Hop-limited minimum-load search around ``decision_maker``."""
    if policy.load_fit is None:
        raise ValueError("DLB needs a load distribution fit")
    dist = sbs_dist[decision_maker]
    best = None
    l_min = math.inf
    k = 1
    while True:
        best_k = _argmin_by_id(loads, idle & (dist <= k * r_th))
        if best_k is not None:
            best, l_min = best_k, float(loads[best_k])
        if k >= policy.max_hops:
            break
        ring = idle & (dist > k * r_th) & (dist <= (k + 1) * r_th)
        if dlb_should_stop(l_min, int(ring.sum()), policy.kappa, policy.load_fit):
            break
        k += 1
    return best


def wuc_pick(ue_dist: np.ndarray, modes: np.ndarray, reserved: np.ndarray, r_th: float,
             now: float, deadline: float, profile: PowerProfile = DEFAULT_PROFILE):
    """Nearest unreserved sleeping SBS in range that can boot before ``deadline``."""
    boot = np.full(len(modes), math.inf)
    for m in (Mode.STANDBY, Mode.SLEEP, Mode.OFF):
        boot[modes == m] = profile.boot_time[m]
    ok = (ue_dist <= r_th) & ~reserved & (now + boot <= deadline)
    return _argmin_by_id(ue_dist, ok)
