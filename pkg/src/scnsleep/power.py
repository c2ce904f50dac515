"""SBS power states, sleep-state choice and energy bookkeeping.

Energy is measured in units of P_max * seconds, P_max being the power drawn
in the Active state.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np


class Mode(enum.IntEnum):
    ACTIVE = 0
    IDLE = 1
    STANDBY = 2
    SLEEP = 3
    OFF = 4
    BOOTING = 5

    @property
    def sleeping(self) -> bool:
        return self in (Mode.STANDBY, Mode.SLEEP, Mode.OFF)

    @property
    def awake(self) -> bool:
        return self in (Mode.ACTIVE, Mode.IDLE)


@dataclass(frozen=True)
class PowerProfile:
    """Power fraction of P_max and boot-up time for each mode."""

    power: dict = field(default_factory=lambda: {
        Mode.ACTIVE: 1.0,
        Mode.IDLE: 0.5,
        Mode.STANDBY: 0.5,
        Mode.SLEEP: 0.15,
        Mode.OFF: 0.0,
        Mode.BOOTING: 0.5,
    })
    boot_time: dict = field(default_factory=lambda: {
        Mode.ACTIVE: 0.0,
        Mode.IDLE: 0.0,
        Mode.STANDBY: 0.5,
        Mode.SLEEP: 10.0,
        Mode.OFF: 30.0,
    })

    def __post_init__(self):
        if any(not 0 <= p <= 1 for p in self.power.values()):
            raise ValueError("power fractions must lie in [0, 1]")
        if any(t < 0 for t in self.boot_time.values()):
            raise ValueError("boot times must be non-negative")

    @property
    def power_vector(self) -> np.ndarray:
        return np.array([self.power[m] for m in Mode])


DEFAULT_PROFILE = PowerProfile()


def select_sleep_state(t_s: float, profile: PowerProfile = DEFAULT_PROFILE) -> Mode:
    """Deepest state that still lets the SBS be idle again after ``t_s`` seconds.

    Up to the Sleep boot time only Standby fits; up to the Off boot time,
    Sleep.  Beyond that the cheaper of Sleep and Off over the window wins
    (ties go to Off).
    """
    if not t_s > 0:
        raise ValueError("sleep time must be positive")
    t_sleep = profile.boot_time[Mode.SLEEP]
    t_off = profile.boot_time[Mode.OFF]
    if t_s <= t_sleep:
        return Mode.STANDBY
    if t_s <= t_off:
        return Mode.SLEEP
    if math.isinf(t_s):
        return Mode.OFF
    p_boot = profile.power[Mode.BOOTING]
    p_sleep = profile.power[Mode.SLEEP]
    if t_sleep * p_boot + (t_s - t_sleep) * p_sleep < t_off * p_boot:
        return Mode.SLEEP
    return Mode.OFF


def window_energy(mode: Mode, t_s: float, profile: PowerProfile = DEFAULT_PROFILE) -> float:
    """Energy over a sleep window of length ``t_s`` spent in ``mode`` then booting."""
    boot = min(profile.boot_time[mode], t_s)
    return (t_s - boot) * profile.power[mode] + boot * profile.power[Mode.BOOTING]


@dataclass(frozen=True)
class SbsState:
    """Power-state record of one SBS.

    ``sleep_expiry`` is the absolute time a sleeping SBS is due back to
    Idle; ``boot_start`` when it starts booting; ``boot_complete`` when a
    boot in progress ends.  ``reserved`` marks an SBS woken on demand.
    """

    mode: Mode = Mode.IDLE
    sleep_expiry: float = math.nan
    boot_start: float = math.nan
    boot_complete: float = math.nan
    reserved: bool = False


def begin_sleep(state: SbsState, now: float, t_s: float,
                profile: PowerProfile = DEFAULT_PROFILE) -> SbsState:
    """Put an idle SBS to sleep for ``t_s`` seconds.

    Booting is scheduled to end exactly at ``now + t_s``.
    """
    if state.mode is not Mode.IDLE:
        raise ValueError(f"only an idle SBS can be turned off, not {state.mode.name}")
    mode = select_sleep_state(t_s, profile)
    expiry = now + t_s
    boot_start = max(now, expiry - profile.boot_time[mode])
    return SbsState(mode=mode, sleep_expiry=expiry, boot_start=boot_start, boot_complete=expiry)


def start_boot(state: SbsState, now: float) -> SbsState:
    if not state.mode.sleeping:
        raise ValueError(f"cannot boot from {state.mode.name}")
    return replace(state, mode=Mode.BOOTING)


def finish_boot(state: SbsState) -> SbsState:
    if state.mode is not Mode.BOOTING:
        raise ValueError(f"cannot finish boot from {state.mode.name}")
    return SbsState(mode=Mode.IDLE)


def wake_order(state: SbsState, now: float, profile: PowerProfile = DEFAULT_PROFILE) -> SbsState:
    """Boot a sleeping SBS immediately and reserve it for the requesting UE."""
    if state.reserved:
        raise ValueError("SBS already holds a wake-up order")
    if not state.mode.sleeping:
        raise ValueError(f"wake order needs a sleeping SBS, not {state.mode.name}")
    done = now + profile.boot_time[state.mode]
    return SbsState(mode=Mode.BOOTING, sleep_expiry=math.nan, boot_start=now,
                    boot_complete=done, reserved=True)


@dataclass
class EnergyLedger:
    """Accumulated energy and per-mode time of each SBS."""

    n_sbs: int
    profile: PowerProfile = DEFAULT_PROFILE
    energy: np.ndarray = field(init=False)
    mode_time: np.ndarray = field(init=False)

    def __post_init__(self):
        self.energy = np.zeros(self.n_sbs)
        self.mode_time = np.zeros((self.n_sbs, len(Mode)))

    def accrue(self, sbs: int, mode: Mode, duration: float) -> "EnergyLedger":
        if duration < 0:
            raise ValueError("negative duration")
        self.energy[sbs] += duration * self.profile.power[mode]
        self.mode_time[sbs, mode] += duration
        return self

    @property
    def total_energy(self) -> float:
        return float(self.energy.sum())

    def mode_totals(self) -> dict:
        return {m.name.lower(): float(self.mode_time[:, m].sum()) for m in Mode}

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        out = EnergyLedger(self.n_sbs + other.n_sbs, self.profile)
        out.energy = np.concatenate([self.energy, other.energy])
        out.mode_time = np.vstack([self.mode_time, other.mode_time])
        return out


def accrue(ledger: EnergyLedger, sbs: int, mode: Mode, duration: float) -> EnergyLedger:
    return ledger.accrue(sbs, mode, duration)
