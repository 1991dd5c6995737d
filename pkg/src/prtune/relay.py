"""Relay feedback experiment with an adjustable-phase element.

The loop is ``e = r - y``, ``u = d*sign(e) + b``, ``y = (F*G)(u)``.  It is
integrated with fixed-step RK4 until a symmetric limit cycle settles, then
the cycle amplitude (half peak-to-peak of ``y``) and period are reported.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .foi import PhaseElement
from .lti import TransferFunction, dominant_time_constants, series, to_state_space

__all__ = [
    "RelayConfig",
    "LimitCycle",
    "RelayRun",
    "NoOscillation",
    "simulate_relay_loop",
    "run_relay",
    "detect_cycles",
    "estimate_crossover",
]


class NoOscillation(RuntimeError):
    """The relay loop did not settle into a limit cycle at this relay phase."""

    def __init__(self, message, reason="timeout", run=None):
        super().__init__(message)
        self.reason = reason
        self.run = run


@dataclass(frozen=True)
class RelayConfig:
    """Relay experiment settings.  ``None`` fields are filled by :meth:`resolve`.

    ``b0`` defaults to ``r / (F*G)(0)`` (0 when that gain is infinite) and
    ``bias_gain`` to ``0.5 / |(F*G)(0)|`` (0 for an integrating loop, where
    the integrator centers the cycle by itself).  ``start_hold`` keeps the
    relay at ``+d`` for an initial interval, a quarter of the estimated
    period by default; starting from rest without it, loops whose phase
    stays just below -180 deg at high frequency can lock into chattering
    about the origin.
    """

    d: float = 1.0
    b0: Optional[float] = None
    r: float = 0.0
    h: Optional[float] = None
    max_time: Optional[float] = None
    settle_cycles: int = 5
    cycle_tol: float = 1e-3
    bias_gain: Optional[float] = None
    min_cycle_steps: int = 20
    start_hold: Optional[float] = None

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("relay amplitude d must be > 0")
        if self.h is not None and not self.h > 0:
            raise ValueError("step h must be > 0")
        if self.max_time is not None and not self.max_time > 0:
            raise ValueError("max_time must be > 0")
        if self.settle_cycles < 3:
            raise ValueError("settle_cycles must be >= 3")
        if not 0 < self.cycle_tol < 0.1:
            raise ValueError("cycle_tol must lie in (0, 0.1)")
        if self.start_hold is not None and not self.start_hold >= 0:
            raise ValueError("start_hold must be >= 0")

    def resolve(self, F: PhaseElement, G: TransferFunction) -> "RelayConfig":
        """Concrete config for the loop ``F*G`` with every default filled in."""
        loop = series(F.tf, G)
        k0 = loop.dc_gain()
        finite = np.isfinite(k0) and k0 != 0
        b0 = self.b0
        if b0 is None:
            b0 = self.r / k0 if finite else 0.0
        bias_gain = self.bias_gain
        if bias_gain is None:
            bias_gain = 0.5 / abs(k0) if finite else 0.0
        tau_fast, tau_slow = dominant_time_constants(G)
        w_est = estimate_crossover(loop)
        if w_est is None:
            w_est = 1.0 / tau_slow
        h = self.h
        if h is None:
            h = min(1e-3 * 2 * np.pi / w_est, 0.01 * tau_fast)
            # RK4 stability margin for the fast modes of the phase element
            lam = np.max(np.abs(F.tf.poles)) if F.tf.poles.size else 0.0
            if lam > 0:
                h = min(h, 1.0 / lam)
        max_time = self.max_time
        if max_time is None:
            max_time = max(200.0 * tau_slow, 200.0 * 2 * np.pi / w_est) + G.delay
        start_hold = self.start_hold
        if start_hold is None:
            start_hold = 0.25 * 2 * np.pi / w_est
        return replace(self, b0=float(b0), bias_gain=float(bias_gain), h=float(h),
                       max_time=float(max_time), start_hold=float(start_hold))


@dataclass(frozen=True)
class LimitCycle:
    """Measured relay oscillation: amplitude and period averaged over the settled cycles."""

    amplitude: float
    period: float
    bias_final: float
    cycles_used: int
    converged: bool

    @property
    def omega(self) -> float:
        return 2 * np.pi / self.period


@dataclass
class RelayRun:
    """Raw outcome of one relay simulation."""

    config: RelayConfig
    status: str
    cycles: np.ndarray          # rows (t_end, period, amplitude, mean_e, bias)
    bias: float
    series: Optional[np.ndarray]  # rows (t, r, e, u, y) when recorded
    cycle: Optional[LimitCycle]


_STATUS = {
    _kernels.TIMEOUT: "timeout",
    _kernels.CONVERGED: "converged",
    _kernels.DECAYED: "decayed",
    _kernels.CHATTER: "chattering",
}


def estimate_crossover(loop: TransferFunction, lo=1e-4, hi=1e4, n=2000) -> Optional[float]:
    """Lowest frequency where the unwrapped loop phase crosses -180 deg, or None."""
    w = np.logspace(np.log10(lo), np.log10(hi), n)
    ph = loop.phase(w) + 180.0
    idx = np.flatnonzero((ph[:-1] > 0) & (ph[1:] <= 0))
    if idx.size == 0:
        return None
    i = idx[0]
    return float(np.sqrt(w[i] * w[i + 1]))


def _loop_period_estimate(F, G):
    w = estimate_crossover(series(F.tf, G))
    if w is None:
        w = 1.0 / dominant_time_constants(G)[1]
    return 2 * np.pi / w


def run_relay(F: PhaseElement, G: TransferFunction, cfg: RelayConfig = RelayConfig(),
              record: bool = False) -> RelayRun:
    """Simulate the relay loop and return the raw run (never raises NoOscillation)."""
    if not G.is_strictly_proper:
        raise ValueError("plant must be strictly proper")
    cfg = cfg.resolve(F, G)
    loop = series(F.tf, G)
    ss = to_state_space(TransferFunction(loop.num, loop.den))
    A = np.ascontiguousarray(ss.A)
    B = np.ascontiguousarray(ss.B[:, 0])
    C = np.ascontiguousarray(ss.C[0, :])
    max_steps = int(np.ceil(cfg.max_time / cfg.h))
    k0 = G.dc_gain()
    # startup chattering about the origin can grow into a genuine cycle
    grace = min(0.25 * cfg.max_time, 20 * _loop_period_estimate(F, G))
    decay_floor = 1e-6 * cfg.d * (abs(k0) if np.isfinite(k0) and k0 != 0 else 1.0)
    status, n_steps, cycles, b, rec = _kernels.relay_loop(
        A, B, C, loop.delay, cfg.h, cfg.r, cfg.d, cfg.b0, cfg.bias_gain, max_steps,
        cfg.settle_cycles, cfg.cycle_tol, cfg.min_cycle_steps, decay_floor, grace,
        cfg.start_hold, record)
    status = _STATUS[int(status)]
    series_out = None
    if record:
        series_out = np.column_stack([rec[:, 0], np.full(rec.shape[0], cfg.r), rec[:, 1],
                                      rec[:, 2], rec[:, 3]])
    cycle = None
    if status == "converged":
        last = cycles[-cfg.settle_cycles:]
        cycle = LimitCycle(amplitude=float(np.mean(last[:, 2])),
                           period=float(np.mean(last[:, 1])),
                           bias_final=float(b), cycles_used=int(cycles.shape[0]),
                           converged=True)
    return RelayRun(cfg, status, cycles, float(b), series_out, cycle)


def simulate_relay_loop(F: PhaseElement, G: TransferFunction,
                        cfg: RelayConfig = RelayConfig()) -> LimitCycle:
    """Run the relay experiment and return the settled limit cycle.

    Raises
    ------
    NoOscillation
        If no symmetric limit cycle settles within ``cfg.max_time``, or the
        oscillation decays away or degenerates into step-level chattering.
    """
    run = run_relay(F, G, cfg)
    if run.cycle is None:
        raise NoOscillation(f"no limit cycle at relay phase {F.gamma:g} deg ({run.status})",
                            reason=run.status, run=run)
    return run.cycle


def detect_cycles(signal, h: float):
    """Split a uniformly sampled oscillation into cycles.

    Cycles are delimited by upward crossings of the signal through its local
    mean (a centered moving average over one period estimate).  Crossing
    instants are linearly interpolated between samples; a sample lying on
    the mean counts as the crossing.

    Returns
    -------
    list of (amplitude, period, mean)
        ``amplitude`` is half the peak-to-peak excursion within the cycle.
    """
    x = np.asarray(signal, dtype=float)
    if x.size < 3:
        return []

    def upward(level):
        dev = x - level
        # a sample sitting on the level (to rounding) counts as the crossing itself
        dev[np.abs(dev) <= 1e-9 * np.max(np.abs(dev))] = 0.0
        idx = np.flatnonzero((dev[:-1] <= 0) & (dev[1:] > 0))
        frac = dev[idx] / (dev[idx] - dev[idx + 1])
        return idx, (idx + frac) * h

    idx, tc = upward(np.full_like(x, np.mean(x)))
    if idx.size < 2:
        return []
    win = max(1, int(round(np.median(np.diff(tc)) / h)))
    if win < x.size:
        kernel = np.ones(win) / win
        level = np.convolve(x, kernel, mode="same")
        half = win // 2
        level[:half] = level[half]
        level[x.size - half:] = level[x.size - half - 1]
        idx, tc = upward(level)
    out = []
    for (i0, i1, t0, t1) in zip(idx[:-1], idx[1:], tc[:-1], tc[1:]):
        seg = x[i0 + 1:i1 + 1]
        if seg.size == 0:
            continue
        amp = 0.5 * (seg.max() - seg.min())
        out.append((float(amp), float(t1 - t0), float(np.mean(seg))))
    return out
