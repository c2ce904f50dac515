import math

import numpy as np
import pytest

from scnsleep.power import (DEFAULT_PROFILE, EnergyLedger, Mode, SbsState, accrue, begin_sleep,
                            finish_boot, select_sleep_state, start_boot, wake_order, window_energy)

# Sleep beats Off while 10 * 0.5 + (t - 10) * 0.15 < 30 * 0.5, i.e. t < 10 + 10 / 0.15
CROSSOVER = 10 + 10 / 0.15


@pytest.mark.parametrize("t_s,mode", [
    (5, Mode.STANDBY), (10, Mode.STANDBY), (20, Mode.SLEEP), (30, Mode.SLEEP),
    (50, Mode.SLEEP), (76, Mode.SLEEP), (78, Mode.OFF), (100, Mode.OFF), (math.inf, Mode.OFF),
])
def test_select_sleep_state_table(t_s, mode):
    assert select_sleep_state(t_s) is mode


def test_crossover():
    assert CROSSOVER == pytest.approx(76.6667, abs=1e-4)
    assert select_sleep_state(CROSSOVER - 1e-6) is Mode.SLEEP
    assert select_sleep_state(CROSSOVER + 1e-6) is Mode.OFF


def test_window_energy_at_100s():
    assert window_energy(Mode.OFF, 100) == pytest.approx(15.0)
    assert window_energy(Mode.SLEEP, 100) == pytest.approx(18.5)


def test_choice_minimises_window_energy():
    for t_s in np.linspace(30.01, 300, 500):
        chosen = select_sleep_state(t_s)
        other = Mode.SLEEP if chosen is Mode.OFF else Mode.OFF
        assert window_energy(chosen, t_s) <= window_energy(other, t_s) + 1e-12


def test_select_rejects_nonpositive():
    with pytest.raises(ValueError):
        select_sleep_state(0)


def test_begin_sleep_windows():
    s = begin_sleep(SbsState(), 100.0, 20.0)
    assert (s.mode, s.boot_start, s.sleep_expiry) == (Mode.SLEEP, 110.0, 120.0)
    s = begin_sleep(SbsState(), 0.0, 5.0)
    assert (s.mode, s.boot_start, s.sleep_expiry) == (Mode.STANDBY, 4.5, 5.0)
    s = begin_sleep(SbsState(), 0.0, 100.0)
    assert (s.mode, s.boot_start) == (Mode.OFF, 70.0)


def test_begin_sleep_requires_idle():
    with pytest.raises(ValueError):
        begin_sleep(SbsState(mode=Mode.ACTIVE), 0.0, 20.0)


def test_boot_cycle():
    s = begin_sleep(SbsState(), 0.0, 20.0)
    s = start_boot(s, 10.0)
    assert s.mode is Mode.BOOTING
    assert finish_boot(s).mode is Mode.IDLE
    with pytest.raises(ValueError):
        finish_boot(SbsState())
    with pytest.raises(ValueError):
        start_boot(SbsState(), 0.0)


@pytest.mark.parametrize("mode,delay", [(Mode.SLEEP, 10.0), (Mode.OFF, 30.0), (Mode.STANDBY, 0.5)])
def test_wake_order(mode, delay):
    s = wake_order(SbsState(mode=mode, sleep_expiry=500.0), 42.0)
    assert s.mode is Mode.BOOTING and s.reserved
    assert s.boot_complete == pytest.approx(42.0 + delay)
    with pytest.raises(ValueError):
        wake_order(s, 43.0)


def test_wake_order_rejects_awake():
    with pytest.raises(ValueError):
        wake_order(SbsState(), 0.0)


def test_ledger_examples():
    led = EnergyLedger(2)
    accrue(led, 0, Mode.ACTIVE, 10.0)
    assert led.total_energy == pytest.approx(10.0)
    accrue(led, 1, Mode.OFF, 10.0)
    assert led.total_energy == pytest.approx(10.0)
    led2 = EnergyLedger(1)
    accrue(led2, 0, Mode.SLEEP, 90.0)
    accrue(led2, 0, Mode.BOOTING, 10.0)
    assert led2.total_energy == pytest.approx(18.5)
    totals = led2.mode_totals()
    assert totals["sleep"] == 90.0 and totals["booting"] == 10.0
    with pytest.raises(ValueError):
        led2.accrue(0, Mode.IDLE, -1.0)
    merged = led.merge(led2)
    assert merged.n_sbs == 3 and merged.total_energy == pytest.approx(28.5)


def test_profile_validation():
    from scnsleep.power import PowerProfile

    with pytest.raises(ValueError):
        PowerProfile(power={m: 2.0 for m in Mode})
    assert DEFAULT_PROFILE.power_vector.tolist() == [1.0, 0.5, 0.5, 0.15, 0.0, 0.5]
