"""Closed-loop sinusoidal tracking and its performance metrics.

The loop is ``e = r - y``, ``u = C e``, ``y = G u`` with
``r(t) = a_r sin(omega_r t)`` and zero initial state.  Settling time is the
last instant where ``|e|/a_r`` reaches ``epsilon``; overshoot compares the
peak output before that instant with the steady peak measured on a trailing
window.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .lti import TransferFunction, dominant_time_constants, to_state_space
from .tuner import PRController, pr_transfer_function

__all__ = [
    "TrackingConfig",
    "TrackingRun",
    "PerformanceReport",
    "simulate_tracking",
    "settling_time",
    "overshoot",
    "evaluate",
]

BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class TrackingConfig:
    """Tracking experiment settings.

    ``h=None`` picks ``min(T_r/1000, 0.01 tau_min)``, shrunk so that the
    plant delay is a whole number of steps.  ``max_periods`` caps the
    adaptive horizon used by :func:`evaluate`.
    """

    a_r: float = 1.0
    omega_r: float = 1.0
    epsilon: float = 0.02
    h: Optional[float] = None
    total_periods: float = 40.0
    steady_window_periods: float = 5.0
    max_periods: float = 1280.0

    def __post_init__(self):
        if not self.a_r > 0:
            raise ValueError("a_r must be > 0")
        if not self.omega_r > 0:
            raise ValueError("omega_r must be > 0")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.total_periods < 20:
            raise ValueError("total_periods must be >= 20")
        if not 0 < self.steady_window_periods < self.total_periods:
            raise ValueError("steady_window_periods must lie in (0, total_periods)")
        if self.h is not None and not self.h > 0:
            raise ValueError("step h must be > 0")

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega_r


@dataclass(frozen=True)
class TrackingRun:
    """Sampled closed-loop trajectory."""

    t: np.ndarray
    r: np.ndarray
    e: np.ndarray
    u: np.ndarray
    y: np.ndarray
    h: float
    unstable: bool

    def as_array(self) -> np.ndarray:
        """Columns ``t, r, e, u, y``."""
        return np.column_stack([self.t, self.r, self.e, self.u, self.y])


@dataclass(frozen=True)
class PerformanceReport:
    """Tracking metrics.  Undefined quantities are NaN.

    Attributes
    ----------
    t_s : float
        Settling time in seconds.
    n_s : float
        Settling time in reference periods, ``omega_r t_s / (2 pi)``.
    m_o : float
        Overshoot in percent.
    y_r : float
        Steady-state output peak.
    converged : bool
        The error stayed inside the band over the whole trailing window.
    stable : bool
        No divergence was detected.
    horizon : float
        Simulated length in seconds.
    """

    t_s: float
    n_s: float
    m_o: float
    y_r: float
    converged: bool
    stable: bool
    horizon: float

    def to_dict(self) -> dict:
        return {"t_s": self.t_s, "n_s": self.n_s, "m_o": self.m_o, "y_r": self.y_r,
                "converged": self.converged, "stable": self.stable, "horizon": self.horizon}


def _step(G: TransferFunction, cfg: TrackingConfig) -> "tuple[float, int]":
    """Step size and delay in whole steps."""
    h = cfg.h
    if h is None:
        h = min(cfg.period / 1000.0, 0.01 * dominant_time_constants(G)[0])
    nd = 0
    if G.delay > 0:
        nd = int(np.ceil(G.delay / h - 1e-9))
        h = G.delay / nd
    return float(h), nd


def simulate_tracking(G: TransferFunction, C: PRController, cfg: TrackingConfig,
                      periods: Optional[float] = None) -> TrackingRun:
    """Integrate the tracking loop for ``periods`` reference periods (default ``cfg.total_periods``).

    Divergence beyond ``1e6 a_r`` stops the run and sets ``unstable``.
    """
    if not G.is_strictly_proper:
        raise ValueError("plant must be strictly proper")
    if periods is None:
        periods = cfg.total_periods
    h, nd = _step(G, cfg)
    n_steps = int(np.ceil(periods * cfg.period / h))
    cs = to_state_space(pr_transfer_function(C))
    gs = to_state_space(TransferFunction(G.num, G.den))
    n_done, unstable, rec = _kernels.tracking_loop(
        np.ascontiguousarray(cs.A), np.ascontiguousarray(cs.B[:, 0]),
        np.ascontiguousarray(cs.C[0]), float(cs.D),
        np.ascontiguousarray(gs.A), np.ascontiguousarray(gs.B[:, 0]),
        np.ascontiguousarray(gs.C[0]), nd, h, cfg.a_r, cfg.omega_r, n_steps,
        BLOWUP_FACTOR * cfg.a_r)
    return TrackingRun(rec[:, 0], rec[:, 1], rec[:, 2], rec[:, 3], rec[:, 4], h, bool(unstable))


def settling_time(t, e, cfg: TrackingConfig) -> "tuple[float, bool]":
    """Last instant where ``|e|/a_r >= epsilon``, and whether the run settled.

    The crossing back into the band is located by linear interpolation.  The
    run counts as settled when that instant precedes the trailing window of
    ``steady_window_periods`` periods.
    """
    t = np.asarray(t, dtype=float)
    z = np.abs(np.asarray(e, dtype=float)) / cfg.a_r
    out = np.flatnonzero(z >= cfg.epsilon)
    if out.size == 0:
        return 0.0, True
    k = out[-1]
    if k == z.size - 1:
        return float(t[-1]), False
    frac = (z[k] - cfg.epsilon) / (z[k] - z[k + 1])
    t_s = float(t[k] + frac * (t[k + 1] - t[k]))
    window_start = t[-1] - cfg.steady_window_periods * cfg.period
    return t_s, t_s < window_start


def overshoot(t, y, t_s: float, cfg: TrackingConfig) -> "tuple[float, float]":
    """``(m_o, y_r)``: percent overshoot of ``|y|`` before ``t_s`` over the steady peak."""
    t = np.asarray(t, dtype=float)
    ya = np.abs(np.asarray(y, dtype=float))
    steady = t >= t[-1] - cfg.steady_window_periods * cfg.period
    y_r = float(np.max(ya[steady]))
    before = t < t_s
    if not np.any(before) or y_r <= 0:
        return 0.0, y_r
    y_max = float(np.max(ya[before]))
    return max((y_max - y_r) / y_r, 0.0) * 100.0, y_r


def evaluate(G: TransferFunction, C: PRController, cfg: TrackingConfig,
             return_run: bool = False):
    """Simulate and compute the performance report.

    The horizon starts at ``cfg.total_periods`` and doubles while the error
    has not settled or ``t_s`` lies in the second half of the horizon, up to
    ``cfg.max_periods``.
    """
    periods = cfg.total_periods
    while True:
        run = simulate_tracking(G, C, cfg, periods)
        if run.unstable:
            report = PerformanceReport(np.nan, np.nan, np.nan, np.nan, False, False,
                                       float(run.t[-1]))
            break
        t_s, settled = settling_time(run.t, run.e, cfg)
        horizon = float(run.t[-1])
        if (settled and t_s <= 0.5 * horizon) or periods * 2 > cfg.max_periods:
            if settled:
                m_o, y_r = overshoot(run.t, run.y, t_s, cfg)
                n_s = cfg.omega_r * t_s / (2 * np.pi)
                report = PerformanceReport(t_s, n_s, m_o, y_r, True, True, horizon)
            else:
                y_r = overshoot(run.t, run.y, t_s, cfg)[1]
                report = PerformanceReport(np.nan, np.nan, np.nan, y_r, False, True, horizon)
            break
        periods *= 2
    return (report, run) if return_run else report

