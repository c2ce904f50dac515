"""Discrete-event simulation of a small-cell network with delayed access.

A UE with a new request connects to the nearest idle SBS in range.  If
there is none it waits up to ``w_t`` seconds for one to become idle and is
otherwise blocked (handed to the macro tier).  Each SBS serves one UE at a
time at the Shannon rate fixed when the session starts.
"""
from __future__ import annotations

import enum
import heapq
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import schedulers as sched
from .geometry import Deployment
from .load_model import FitError, MomentSpec, fit_empirical, fit_from_moments, first_moment, \
    loads_from_adjacency, second_moment
from .metrics import MetricsReport
from .power import DEFAULT_PROFILE, EnergyLedger, Mode, SbsState, begin_sleep, finish_boot, \
    start_boot, wake_order

BITS_PER_MB = 8e6


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key, msg):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass(frozen=True)
class SimConfig:
    rho_c: float = 5e-4
    rho_u: float = 5e-4
    region_radius: float = 250.0
    r_th: float = 50.0
    lambda_u: float = 0.001
    mean_file_size: float = 1 * BITS_PER_MB
    lambda_s: float = 0.001
    w_t: float = 0.0
    on_ratio: float = 1.0
    bandwidth: float = 1e6
    snr_db: float = 20.0
    path_loss_exp: float = 4.0
    sim_time: float = 10_000.0
    replications: int = 1
    seed: int = 0
    scheduler: str = "CLB"
    kappa: float = 0.3
    dlb_max_hops: int = 3
    raw_distance_sinr: bool = False
    warmup: float = 0.0
    load_fit: str = "empirical"
    utilization_label: str = ""

    def __post_init__(self):
        nonneg = ("rho_c", "rho_u", "lambda_u", "lambda_s", "w_t", "warmup", "bandwidth")
        for key in nonneg:
            v = getattr(self, key)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ConfigError(key, "must be a finite non-negative number")
        for key in ("region_radius", "r_th", "mean_file_size", "sim_time", "path_loss_exp"):
            v = getattr(self, key)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(key, "must be a finite positive number")
        if self.region_radius < self.r_th:
            raise ConfigError("region_radius", "must be >= r_th")
        if not 0 < self.on_ratio <= 1:
            raise ConfigError("on_ratio", "must lie in (0, 1]")
        if not 0 < self.kappa < 1:
            raise ConfigError("kappa", "must lie in (0, 1)")
        if int(self.dlb_max_hops) != self.dlb_max_hops or self.dlb_max_hops < 1:
            raise ConfigError("dlb_max_hops", "must be an integer >= 1")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigError("replications", "must be an integer >= 1")
        if self.warmup >= self.sim_time:
            raise ConfigError("warmup", "must be shorter than sim_time")
        try:
            sched.Kind(self.scheduler)
        except ValueError:
            raise ConfigError("scheduler", f"unknown scheduler {self.scheduler!r}") from None
        if self.load_fit not in ("empirical", "analytic"):
            raise ConfigError("load_fit", "must be 'empirical' or 'analytic'")

    @property
    def nu_u(self) -> float:
        return self.rho_u * math.pi * self.r_th**2

    @property
    def nu_c(self) -> float:
        return self.rho_c * math.pi * self.r_th**2

    @property
    def noise(self) -> float:
        return 10 ** (-self.snr_db / 10)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> tuple:
        return tuple(f.name for f in fields(cls))


class EventKind(enum.IntEnum):
    # value doubles as the tie-break priority at equal times
    SERVICE_COMPLETE = 0
    SLEEP_EXPIRE = 1
    BOOT_COMPLETE = 2
    BOOT_START = 3
    WAIT_DEADLINE = 4
    REQUEST_ARRIVAL = 5


@dataclass(order=True, frozen=True)
class Event:
    time: float
    kind: EventKind
    sequence: int
    target: int = field(compare=False)
    token: int = field(compare=False, default=0)


@dataclass
class PendingRequest:
    rid: int
    ue_id: int
    arrival_time: float
    deadline: float
    file_size: float
    wake_sbs: int | None = None


@dataclass
class Session:
    ue_id: int
    sbs_id: int
    start: float
    rate: float
    remaining: float
    request: PendingRequest = field(repr=False)


@dataclass
class ReplicationResult:
    report: MetricsReport
    ledger: EnergyLedger
    served_sizes: list
    dlb_decisions: int = 0
    dlb_agree_clb: int = 0
    dlb_same_load: int = 0
    deficit_events: int = 0
    trace: list | None = None
    transitions: list | None = None


def child_seeds(seq: np.random.SeedSequence, n: int) -> list:
    """The children ``seq.spawn(n)`` would give on first use, without mutating ``seq``."""
    return [np.random.SeedSequence(seq.entropy, spawn_key=seq.spawn_key + (i,), pool_size=seq.pool_size)
            for i in range(n)]


def shannon_rate(bandwidth, sinr):
    return bandwidth * math.log2(1.0 + sinr)


def link_sinr(d_serv: float, d_interf, config: SimConfig) -> float:
    """SINR of a link with distances in meters (clamped to >= 1 m).

    Distances are normalised by r_th unless ``raw_distance_sinr`` is set, so
    a cell-edge link without interference sees exactly the configured SNR.
    """
    scale = 1.0 if config.raw_distance_sinr else config.r_th
    a = config.path_loss_exp
    signal = (max(d_serv, 1.0) / scale) ** -a
    di = np.maximum(np.asarray(d_interf, dtype=float), 1.0) / scale
    interference = float(np.sum(di ** -a)) if di.size else 0.0
    return signal / (interference + config.noise)


_analytic_fit_cache: dict = {}


def analytic_load_fit(nu_u: float, nu_c: float, e2_samples: int = 20_000):
    key = (round(nu_u, 12), round(nu_c, 12), e2_samples)
    if key not in _analytic_fit_cache:
        spec = MomentSpec(nu_u=nu_u, nu_c=nu_c, e2_samples=e2_samples)
        _analytic_fit_cache[key] = fit_from_moments(first_moment(spec), second_moment(spec).value, nu_u)
    return _analytic_fit_cache[key]


class Simulator:
    """One replication: a single-threaded event loop owning all mutable state."""

    def __init__(self, config: SimConfig, deployment: Deployment, seed_seq: np.random.SeedSequence,
                 profile=DEFAULT_PROFILE, trace: bool = False):
        self.cfg = config
        self.dep = deployment
        self.profile = profile
        streams = child_seeds(seed_seq, 3)
        traffic_seqs = child_seeds(streams[0], max(deployment.n_ue, 1))
        self.ue_rng = [np.random.default_rng(s) for s in traffic_seqs[:deployment.n_ue]]
        self.sleep_rng = np.random.default_rng(streams[1])
        self.policy_rng = np.random.default_rng(streams[2])

        n = deployment.n_sbs
        self.in_range = deployment.in_range
        self.states = [SbsState() for _ in range(n)]
        self.modes = np.full(n, Mode.IDLE, dtype=int)
        self.reserved = np.zeros(n, dtype=bool)
        self.epoch = np.zeros(n, dtype=np.int64)
        self.last_change = np.zeros(n)
        self.sessions: dict = {}
        self.waiting: dict = {}
        self.requests: dict = {}
        self.pending_compensation: set = set()
        self.deficit = 0
        self.ledger = EnergyLedger(n, profile)
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self._rid = 0

        self.n_requests = 0
        self.n_blocked = 0
        self.served_sizes: list = []
        self.dlb_decisions = 0
        self.dlb_agree = 0
        self.dlb_same_load = 0
        self.deficit_events = 0
        self.trace = [] if trace else None
        self.transitions = [] if trace else None
        self.policy = sched.SchedulerPolicy(config.scheduler, config.kappa, config.dlb_max_hops)
        # optional callback(sim, event) run after each handled event, for invariant checks
        self.observer = None

    # -- bookkeeping -------------------------------------------------------

    def _push(self, time, kind, target, token=0):
        if time < self.now:
            raise RuntimeError("event scheduled in the past")
        heapq.heappush(self._heap, Event(time, kind, self._seq, target, token))
        self._seq += 1

    def _account(self, sbs, now):
        start = max(self.last_change[sbs], self.cfg.warmup)
        if now > start:
            self.ledger.accrue(sbs, Mode(self.modes[sbs]), now - start)
        self.last_change[sbs] = max(now, self.last_change[sbs])

    def _set_state(self, sbs, state: SbsState):
        self._account(sbs, self.now)
        old = Mode(self.modes[sbs])
        if self.transitions is not None:
            self.transitions.append((self.now, sbs, old, state.mode))
        self.states[sbs] = state
        self.modes[sbs] = state.mode
        self.reserved[sbs] = state.reserved

    def idle_mask(self):
        return self.modes == Mode.IDLE

    def awake_mask(self):
        return (self.modes == Mode.IDLE) | (self.modes == Mode.ACTIVE)

    def loads(self):
        return loads_from_adjacency(self.in_range, self.awake_mask())[1]

    def _counted(self, req):
        return req.arrival_time >= self.cfg.warmup

    # -- sleeping ----------------------------------------------------------

    def _sleep_time(self):
        if self.cfg.lambda_s == 0:
            return math.inf
        return float(self.sleep_rng.exponential(1.0 / self.cfg.lambda_s))

    def turn_off(self, sbs):
        state = begin_sleep(self.states[sbs], self.now, self._sleep_time(), self.profile)
        self._set_state(sbs, state)
        self.epoch[sbs] += 1
        if math.isfinite(state.sleep_expiry):
            self._push(state.boot_start, EventKind.BOOT_START, sbs, self.epoch[sbs])
            self._push(state.sleep_expiry, EventKind.SLEEP_EXPIRE, sbs, self.epoch[sbs])

    def _pick_to_sleep(self, woken, rule=None):
        idle = self.idle_mask()
        rule = rule or self.policy.kind
        if rule is sched.Kind.ROO:
            return sched.roo_pick(idle, self.policy_rng)
        loads = self.loads()
        if rule is sched.Kind.DLB:
            pick = sched.dlb_pick(woken, idle, loads, self.dep.sbs_sbs_dist, self.cfg.r_th, self.policy)
            ref = sched.clb_pick(idle, loads)
            self.dlb_decisions += 1
            self.dlb_agree += int(pick == ref)
            self.dlb_same_load += int(pick is not None and ref is not None and loads[pick] == loads[ref])
            return pick
        return sched.clb_pick(idle, loads)

    def _rebalance(self, woken, rule=None, owed=1):
        """Turn off ``owed`` SBSs plus any outstanding deficit."""
        todo = owed + self.deficit
        done = 0
        while done < todo:
            pick = self._pick_to_sleep(woken, rule)
            if pick is None:
                break
            self.turn_off(pick)
            done += 1
        if done < todo:
            self.deficit_events += 1
        self.deficit = todo - done

    # -- initialisation ----------------------------------------------------

    def _init_topology(self):
        all_loads = loads_from_adjacency(self.in_range, np.ones(self.dep.n_sbs, dtype=bool))[1]
        sleepers = sched.initial_sleepers(self.policy, all_loads, self.cfg.on_ratio, self.policy_rng)
        for sbs in sleepers:
            self.turn_off(int(sbs))
        if self.policy.kind is sched.Kind.DLB:
            self.policy = sched.SchedulerPolicy(self.policy.kind, self.policy.kappa,
                                                self.policy.max_hops, self._load_fit())

    def _load_fit(self):
        awake = self.awake_mask()
        if self.cfg.load_fit == "empirical":
            try:
                return fit_empirical(self.loads()[awake], self.cfg.nu_u)
            except FitError:
                pass
        nu_c_awake = self.cfg.nu_c * float(awake.mean()) if awake.size else self.cfg.nu_c
        return analytic_load_fit(self.cfg.nu_u, max(nu_c_awake, 1e-9))

    # -- traffic -----------------------------------------------------------

    def _schedule_next_request(self, ue):
        if self.cfg.lambda_u <= 0:
            return
        gap = float(self.ue_rng[ue].exponential(1.0 / self.cfg.lambda_u))
        self._push(self.now + gap, EventKind.REQUEST_ARRIVAL, ue)

    def _draw_size(self, ue):
        return float(self.ue_rng[ue].exponential(self.cfg.mean_file_size))

    def _resolve(self, req, blocked):
        self.requests.pop(req.ue_id, None)
        self.waiting.pop(req.rid, None)
        if self._counted(req):
            self.n_requests += 1
            self.n_blocked += int(blocked)
            if not blocked:
                self.served_sizes.append(req.file_size)
        self._schedule_next_request(req.ue_id)

    def compute_rate(self, ue, sbs):
        active = np.flatnonzero(self.modes == Mode.ACTIVE)
        active = active[active != sbs]
        d = self.dep.ue_sbs_dist[ue]
        return shannon_rate(self.cfg.bandwidth, link_sinr(d[sbs], d[active], self.cfg))

    def _start_session(self, sbs, req):
        rate = self.compute_rate(req.ue_id, sbs)
        self.waiting.pop(req.rid, None)
        state = self.states[sbs]
        if state.mode is not Mode.IDLE:
            raise RuntimeError("session on a non-idle SBS")
        self._set_state(sbs, SbsState(mode=Mode.ACTIVE))
        self.sessions[sbs] = Session(req.ue_id, sbs, self.now, rate, req.file_size, req)
        self._push(self.now + req.file_size / rate, EventKind.SERVICE_COMPLETE, sbs)

    def _try_associate(self, req):
        cand = self.in_range[req.ue_id] & self.idle_mask()
        if cand.any():
            d = np.where(cand, self.dep.ue_sbs_dist[req.ue_id], np.inf)
            self._start_session(int(np.argmin(d)), req)
            return True
        return False

    def _on_sbs_idle(self, sbs):
        if self.modes[sbs] != Mode.IDLE or not self.waiting:
            return
        best = None
        for req in self.waiting.values():
            if self.in_range[req.ue_id, sbs]:
                if best is None or (req.arrival_time, req.ue_id) < (best.arrival_time, best.ue_id):
                    best = req
        if best is not None:
            self._start_session(sbs, best)

    def _wuc_wake(self, req):
        pick = sched.wuc_pick(self.dep.ue_sbs_dist[req.ue_id], self.modes, self.reserved,
                              self.cfg.r_th, self.now, req.deadline, self.profile)
        if pick is None:
            return
        state = wake_order(self.states[pick], self.now, self.profile)
        self._set_state(pick, state)
        self.epoch[pick] += 1
        req.wake_sbs = pick
        self._push(state.boot_complete, EventKind.BOOT_COMPLETE, pick, self.epoch[pick])

    # -- event handlers ----------------------------------------------------

    def _on_request(self, ue):
        self._rid += 1
        size = self._draw_size(ue)
        req = PendingRequest(self._rid, ue, self.now, self.now + self.cfg.w_t, size)
        self.requests[ue] = req
        if self._try_associate(req):
            return
        if self.cfg.w_t <= 0:
            self._resolve(req, blocked=True)
            return
        self.waiting[req.rid] = req
        self._push(req.deadline, EventKind.WAIT_DEADLINE, req.rid)
        if self.policy.kind is sched.Kind.WUC:
            self._wuc_wake(req)

    def _on_service_complete(self, sbs):
        sess = self.sessions.pop(sbs)
        self._set_state(sbs, SbsState(mode=Mode.IDLE))
        self._resolve(sess.request, blocked=False)
        self._on_sbs_idle(sbs)
        if sbs in self.pending_compensation:
            self.pending_compensation.discard(sbs)
            self._rebalance(sbs, sched.Kind.CLB)

    def _on_boot_start(self, sbs, token):
        if token != self.epoch[sbs]:
            return
        self._set_state(sbs, start_boot(self.states[sbs], self.now))

    def _on_sleep_expire(self, sbs, token):
        if token != self.epoch[sbs]:
            return
        self._set_state(sbs, finish_boot(self.states[sbs]))
        self._on_sbs_idle(sbs)
        rule = sched.Kind.CLB if self.policy.kind is sched.Kind.WUC else None
        self._rebalance(sbs, rule)

    def _on_boot_complete(self, sbs, token):
        if token != self.epoch[sbs]:
            return
        self._set_state(sbs, finish_boot(self.states[sbs]))
        req = next((r for r in self.waiting.values() if r.wake_sbs == sbs), None)
        if req is not None:
            self._start_session(sbs, req)
            self.pending_compensation.add(sbs)
            return
        self._on_sbs_idle(sbs)
        self._rebalance(sbs, sched.Kind.CLB)

    def _on_deadline(self, rid):
        req = self.waiting.get(rid)
        if req is not None:
            self._resolve(req, blocked=True)

    # -- main loop ---------------------------------------------------------

    def run(self) -> ReplicationResult:
        self._init_topology()
        for ue in range(self.dep.n_ue):
            self._schedule_next_request(ue)
        horizon = self.cfg.sim_time
        handlers = {
            EventKind.SERVICE_COMPLETE: lambda e: self._on_service_complete(e.target),
            EventKind.SLEEP_EXPIRE: lambda e: self._on_sleep_expire(e.target, e.token),
            EventKind.BOOT_COMPLETE: lambda e: self._on_boot_complete(e.target, e.token),
            EventKind.BOOT_START: lambda e: self._on_boot_start(e.target, e.token),
            EventKind.WAIT_DEADLINE: lambda e: self._on_deadline(e.target),
            EventKind.REQUEST_ARRIVAL: lambda e: self._on_request(e.target),
        }
        while self._heap and self._heap[0].time <= horizon:
            ev = heapq.heappop(self._heap)
            self.now = ev.time
            if self.trace is not None:
                self.trace.append((ev.time, ev.kind, ev.target))
            handlers[ev.kind](ev)
            if self.observer is not None:
                self.observer(self, ev)
        self.now = horizon
        for sbs in range(self.dep.n_sbs):
            self._account(sbs, horizon)

        duration = horizon - self.cfg.warmup
        report = MetricsReport.from_counts(
            requests=self.n_requests,
            blocked=self.n_blocked,
            total_bits=float(sum(self.served_sizes)),
            total_energy=self.ledger.total_energy,
            n_users=self.dep.n_ue,
            duration=duration,
            mode_time=self.ledger.mode_totals(),
        )
        return ReplicationResult(report, self.ledger, list(self.served_sizes), self.dlb_decisions,
                                 self.dlb_agree, self.dlb_same_load, self.deficit_events, self.trace,
                                 self.transitions)


def replication_seeds(seed: int, n: int):
    return np.random.SeedSequence(seed).spawn(n)


def run_replication(config: SimConfig, seed_seq: np.random.SeedSequence, trace: bool = False,
                    deployment: Deployment | None = None) -> ReplicationResult:
    """Sample a deployment (unless given) and simulate it.

    The deployment and traffic depend only on ``seed_seq``, so runs that
    differ only in scheduler or sleep settings see the same network.
    """
    dep_seq, sim_seq = child_seeds(seed_seq, 2)
    if deployment is None:
        deployment = Deployment.sample(config.rho_c, config.rho_u, config.region_radius,
                                       config.r_th, np.random.default_rng(dep_seq))
    return Simulator(config, deployment, sim_seq, trace=trace).run()


def run(config: SimConfig, seed: int | None = None, workers: int = 1) -> tuple:
    """Run all replications; returns (aggregate report, per-replication results)."""
    from .metrics import aggregate

    seed = config.seed if seed is None else seed
    seqs = replication_seeds(seed, int(config.replications))
    if workers > 1 and len(seqs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_replication, [config] * len(seqs), seqs))
    else:
        results = [run_replication(config, s) for s in seqs]
    return aggregate([r.report for r in results]), results
