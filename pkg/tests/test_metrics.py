import numpy as np
import pytest

from scnsleep.metrics import (MetricsReport, aggregate, average_throughput, blocking_probability,
                              energy_efficiency)


def test_blocking_probability():
    assert blocking_probability(2, 10) == 0.2
    assert blocking_probability(0, 7) == 0.0
    assert blocking_probability(7, 7) == 1.0
    assert blocking_probability(0, 0) == 0.0
    with pytest.raises(ValueError):
        blocking_probability(3, 2)


def test_average_throughput():
    assert average_throughput(8e6, 1, 1000) == 8000.0
    assert average_throughput(8e6, 2, 1000) == 4000.0
    with pytest.raises(ValueError):
        average_throughput(1.0, 0, 10)
    with pytest.raises(ValueError):
        average_throughput(1.0, 1, 0)


def test_energy_efficiency():
    # one SBS idle for 100 s: energy 0.5 * 100; 8e5 bits to one user over 100 s
    r = average_throughput(8e5, 1, 100)
    assert energy_efficiency(r, 0.5 * 100) == pytest.approx(160.0)
    assert energy_efficiency(3 * r, 50.0) == pytest.approx(3 * 160.0)
    with pytest.raises(ValueError):
        energy_efficiency(1.0, 0.0)


def test_report_zero_energy_and_no_users():
    rep = MetricsReport.from_counts(requests=0, blocked=0, total_bits=0.0, total_energy=0.0,
                                    n_users=0, duration=100.0)
    assert rep.ee is None and rep.r_scn == 0.0 and rep.p_block == 0.0


def _rep(p, bits, energy):
    return MetricsReport.from_counts(requests=100, blocked=int(p * 100), total_bits=bits,
                                     total_energy=energy, n_users=10, duration=100.0,
                                     mode_time={"idle": 50.0})


def test_aggregate_single_and_identical():
    one = aggregate([_rep(0.1, 1e6, 50.0)])
    assert one.stats["p_block"].degenerate and one.stats["p_block"].half_width == 0.0
    same = aggregate([_rep(0.1, 1e6, 50.0)] * 5)
    assert same.stats["r_scn"].std == 0.0
    assert same.request_count == 500


def test_aggregate_ci_and_order_invariance():
    reps = [_rep(p, b, e) for p, b, e in [(0.1, 1e6, 50), (0.2, 2e6, 60), (0.05, 1.5e6, 40)]]
    a = aggregate(reps)
    b = aggregate(reps[::-1])
    assert a == b
    vals = np.array([r.p_block for r in reps])
    assert a.p_block == pytest.approx(vals.mean())
    assert a.stats["p_block"].half_width == pytest.approx(1.959964 * vals.std(ddof=1) / np.sqrt(3), rel=1e-6)
    lo, hi = a.stats["p_block"].ci
    assert lo < a.p_block < hi
    with pytest.raises(ValueError):
        aggregate([])
