import numpy as np
import pytest

from prtune.evalsim import (
    TrackingConfig,
    evaluate,
    overshoot,
    settling_time,
    simulate_tracking,
)
from prtune.identify import analytic_point
from prtune.lti import TransferFunction
from prtune.tuner import PRController, tune

GA = TransferFunction([1], [1, 2, 1], 1.0)
GB = TransferFunction([1], [1, 2, 1])
GC = TransferFunction([1], [1, 1])


def test_internal_model_tracking():
    c = PRController(3.82, 1.14, -0.108, 0.169)
    cfg = TrackingConfig(omega_r=0.169)
    run = simulate_tracking(GB, c, cfg, periods=60)
    last = run.t >= run.t[-1] - cfg.period
    assert np.max(np.abs(run.e[last])) <= 1e-3
    assert not run.unstable
    assert np.allclose(run.r, np.sin(0.169 * run.t))
    assert np.allclose(run.e, run.r - run.y)
    assert run.as_array().shape == (run.t.size, 5)


def test_final_cycle_error_shrinks_with_length():
    c = PRController(1.71, 1.66, -0.0479, 0.168)
    cfg = TrackingConfig(omega_r=0.168)
    peaks = []
    for periods in (20, 40, 80):
        run = simulate_tracking(GC, c, cfg, periods)
        peaks.append(np.max(np.abs(run.e[run.t >= run.t[-1] - cfg.period])))
    assert peaks[0] > peaks[1] > peaks[2]
    assert peaks[-1] < cfg.epsilon


def test_class_c_table_row():
    rep = evaluate(GC, PRController(1.71, 1.66, -0.0479, 0.168), TrackingConfig(omega_r=0.168))
    assert rep.t_s == pytest.approx(93.9, rel=0.10)
    assert rep.converged and rep.stable


def test_class_c_high_ratio_has_no_overshoot():
    rep = evaluate(GC, PRController(0.332, 0.319, -0.751, 1.51), TrackingConfig(omega_r=1.51))
    assert rep.m_o == pytest.approx(0.0, abs=2.0)


def test_class_b_overshoot():
    rep = evaluate(GB, PRController(3.82, 1.14, -0.108, 0.169), TrackingConfig(omega_r=0.169))
    assert rep.m_o == pytest.approx(7.9, abs=2.0)


def test_delay_plant_table_row():
    rep = evaluate(GA, PRController(1.01, 0.0699, -0.0174, 0.132), TrackingConfig(omega_r=0.132))
    assert rep.t_s == pytest.approx(125.7, rel=0.10)
    assert rep.m_o == pytest.approx(9.9, abs=2.0)


def test_settling_time_zero_error():
    cfg = TrackingConfig()
    t = np.linspace(0, 300, 3001)
    assert settling_time(t, np.zeros_like(t), cfg) == (0.0, True)


def _dense_oracle(f, eps):
    tf = np.linspace(0, 10, 10_000_001)
    out = np.flatnonzero(np.abs(f(tf)) >= eps)
    return 0.0 if out.size == 0 else tf[out[-1]]


@pytest.mark.parametrize("shape", [np.sin, np.cos], ids=["sin", "cos"])
def test_settling_time_damped_sinusoid(shape):
    cfg = TrackingConfig(a_r=2.0, omega_r=1.0)
    t = np.linspace(0, 60 * np.pi, 600001)
    e = 0.05 * cfg.a_r * np.exp(-t) * shape(t)
    t_s, settled = settling_time(t, e, cfg)
    ref = _dense_oracle(lambda x: 0.05 * np.exp(-x) * shape(x), 0.02)
    assert settled
    assert t_s == pytest.approx(ref, abs=1e-3)
    # the bare envelope would leave the band at ln(2.5)
    assert t_s <= np.log(2.5)


def test_settling_time_unsettled():
    cfg = TrackingConfig()
    t = np.linspace(0, 300, 3001)
    t_s, settled = settling_time(t, 0.5 * np.sin(t), cfg)
    assert not settled


def test_ns_identity():
    rep = evaluate(GB, PRController(0.740, 0.220, -1.69, 1.52), TrackingConfig(omega_r=1.52))
    assert rep.n_s == 1.52 * rep.t_s / (2 * np.pi)
    assert 26.3 * 1.52 / (2 * np.pi) == pytest.approx(6.4, abs=0.05)


def test_overshoot_examples():
    cfg = TrackingConfig(omega_r=1.0)
    t = np.linspace(0, 40 * 2 * np.pi, 20001)
    y = (1 - np.exp(-t)) * np.sin(t)
    m_o, y_r = overshoot(t, y, 10.0, cfg)
    assert m_o == 0.0 and y_r == pytest.approx(1.0, abs=1e-3)
    y = (1 + 0.5 * np.exp(-t / 4)) * np.sin(t)
    m_o, _ = overshoot(t, y, 30.0, cfg)
    ref = (np.max(np.abs(y[t < 30])) - 1) * 100
    assert m_o == pytest.approx(ref, rel=1e-3)


def test_unstable_loop_is_reported():
    c = PRController(5.0, 0.0, -0.05, 0.1)
    rep = evaluate(GA, c, TrackingConfig(omega_r=0.1))
    assert not rep.stable and not rep.converged
    assert np.isnan(rep.t_s) and np.isnan(rep.m_o)


@pytest.mark.parametrize("G", [GA, GB, GC], ids=["Ga", "Gb", "Gc"])
def test_step_halving(G):
    pt = analytic_point(G)
    w_r = 0.3 * pt.omega_nu
    c = tune(pt, w_r)
    cfg = TrackingConfig(omega_r=w_r)
    base, run = evaluate(G, c, cfg, return_run=True)
    fine = evaluate(G, c, TrackingConfig(omega_r=w_r, h=run.h / 2))
    assert base.converged and fine.converged
    assert abs(base.t_s - fine.t_s) < cfg.period
    assert abs(base.m_o - fine.m_o) < 0.5


def test_config_validation():
    with pytest.raises(ValueError):
        TrackingConfig(a_r=0)
    with pytest.raises(ValueError):
        TrackingConfig(epsilon=1.0)
    with pytest.raises(ValueError):
        TrackingConfig(total_periods=10)
    with pytest.raises(ValueError):
        TrackingConfig(h=-1.0)
    with pytest.raises(ValueError):
        simulate_tracking(TransferFunction([1, 1], [1, 2]), PRController(1, 0, 0, 1), TrackingConfig())
