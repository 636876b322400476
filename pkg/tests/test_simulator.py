import numpy as np
import pytest

from retrial_jsq import oracle
from retrial_jsq.model import new_params
from retrial_jsq.simulator import SimConfig, replication_seeds, simulate


@pytest.fixture(scope="module")
def est():
    cfg = SimConfig(new_params(2, 10, 3), horizon=2e5, warmup=1e3, replications=8, seed=4)
    return simulate(cfg, (4, 4), workers=2)


def test_config_validation():
    p = new_params(2, 10, 3)
    with pytest.raises(ValueError):
        SimConfig(p, horizon=10, warmup=10)
    with pytest.raises(ValueError):
        SimConfig(p, horizon=10, warmup=-1)
    with pytest.raises(ValueError):
        SimConfig(p, horizon=10, replications=0)


def test_deterministic_given_seed():
    cfg = SimConfig(new_params(2, 10, 3), horizon=2e4, replications=3, seed=99)
    a = simulate(cfg, (3, 3))
    b = simulate(cfg, (3, 3), workers=3)
    np.testing.assert_array_equal(a.q, b.q)
    assert a.P_busy == b.P_busy and a.join_rate == b.join_rate


def test_seeds_distinct():
    seeds = replication_seeds(0, 10)
    assert len(set(seeds)) == 10


def test_estimates_in_range(est):
    assert np.all((est.q >= 0) & (est.q <= 1))
    assert np.all(est.q_halfwidth >= 0)
    assert est.stable


def test_busy_fraction(est):
    lo, hi = est.busy_interval(0.999)
    assert lo <= 0.2 <= hi
    assert est.P_busy_halfwidth < 2e-3


def test_flow_balance(est):
    # in steady state every job that joins an orbit eventually leaves it
    se = np.hypot(est.join_rate_stderr, est.success_rate_stderr)
    assert abs(est.join_rate - est.success_rate) < 4 * se + 1e-4
    # blocked arrivals join at rate lam * P_busy
    assert est.join_rate == pytest.approx(2.0 * 0.2, rel=0.02)


def test_exchange_symmetry(est):
    d = est.orig - est.orig.transpose(1, 0, 2)
    se = np.hypot(est.orig_stderr, est.orig_stderr.transpose(1, 0, 2))
    mask = se > 0
    assert np.all(np.abs(d[mask]) < 5 * se[mask] + 1e-12)
    assert abs(est.mean_orbit1 - est.mean_orbit2) < 0.02


def test_light_traffic_matches_oracle():
    p = new_params(0.5, 50, 5)
    sol = oracle.solve(p, 20)
    e = simulate(SimConfig(p, horizon=5e4, replications=6, seed=1), (2, 2))
    assert e.q[0, 0, 0] == pytest.approx(sol.probs[0, 0, 0], abs=5 * e.q_stderr[0, 0, 0] + 1e-4)
    assert e.q[0, 0, 0] > 0.98


def test_unstable_run_reports_divergence():
    p = new_params(10, 1, 1)
    e = simulate(SimConfig(p, horizon=2e3, replications=2, seed=3), (2, 2))
    assert not e.stable
    assert e.final_orbit_total > 1000
