"""Bode/Nyquist samples and stability margins of a loop transfer function.

Undamped resonant poles make the magnitude unbounded at ``omega_r``; sweeps
drop a narrow window ``omega_r (1 +- 1e-6)`` around every pole on the jw axis
and report the excluded frequencies.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lti import FrequencyPoint, TransferFunction

__all__ = ["FrequencySweep", "MarginReport", "NoCrossover", "sweep", "margins", "nyquist_data"]

EXCLUSION_RTOL = 1e-6
CROSSING_RTOL = 1e-9


class NoCrossover(ValueError):
    """The loop magnitude never crosses unity."""


@dataclass(frozen=True)
class FrequencySweep:
    """Sampled frequency response; ``phase`` in degrees, unwrapped."""

    omega: np.ndarray
    magnitude: np.ndarray
    phase: np.ndarray
    excluded: tuple = ()

    def __len__(self):
        return self.omega.size

    def __iter__(self):
        for w, m, p in zip(self.omega, self.magnitude, self.phase):
            yield FrequencyPoint(float(w), float(m), float(p))

    @property
    def magnitude_db(self) -> np.ndarray:
        return 20.0 * np.log10(self.magnitude)

    @property
    def value(self) -> np.ndarray:
        return self.magnitude * np.exp(1j * np.radians(self.phase))


@dataclass(frozen=True)
class MarginReport:
    """Gain and phase margins.

    Attributes
    ----------
    phase_margin : float
        ``180 + angle(L(j w_c))`` in degrees at the first unity crossing above ``omega_r``.
    gain_crossover : float
        That crossing frequency ``w_c`` in rad/s.
    gain_margin : float or None
        ``-20 log10 |L(j w_pc)|`` in dB at the first -180 deg crossing above
        ``omega_r``; None when the phase never crosses.
    phase_crossover : float or None
    crossover_unique : bool
        Exactly one unity crossing lies above ``omega_r``.
    crossovers : tuple of float
        All unity crossings above ``omega_r``.
    """

    phase_margin: float
    gain_crossover: float
    gain_margin: Optional[float]
    phase_crossover: Optional[float]
    crossover_unique: bool
    crossovers: tuple = ()

    def to_dict(self) -> dict:
        return {"phase_margin": self.phase_margin, "gain_crossover": self.gain_crossover,
                "gain_margin": self.gain_margin, "phase_crossover": self.phase_crossover,
                "crossover_unique": self.crossover_unique, "crossovers": list(self.crossovers)}


def _jw_pole_freqs(L: TransferFunction) -> np.ndarray:
    p = L.poles
    return np.unique(np.abs(p[p.real == 0].imag))


def _grid(band, n, poles):
    lo, hi = map(float, band)
    if not 0 < lo < hi:
        raise ValueError("band must satisfy 0 < lo < hi")
    if n < 2:
        raise ValueError("n must be >= 2")
    w = np.logspace(np.log10(lo), np.log10(hi), int(n))
    keep = np.ones(w.size, bool)
    excluded = []
    for wp in poles:
        near = np.abs(w - wp) <= EXCLUSION_RTOL * max(wp, 1e-300)
        if wp == 0:
            near = w == 0
        if lo <= wp <= hi:
            excluded.append(float(wp))
        keep &= ~near
    return w[keep], tuple(excluded)


def sweep(L: TransferFunction, band=(1e-2, 1e2), n: int = 500) -> FrequencySweep:
    """Log-spaced frequency response of ``L`` over ``band``.

    Samples inside the exclusion window of a jw-axis pole are dropped; the
    pole frequencies inside the band are listed in ``excluded``.
    """
    w, excluded = _grid(band, n, _jw_pole_freqs(L))
    return FrequencySweep(w, np.asarray(L.magnitude(w)), np.asarray(L.phase(w)), excluded)


def nyquist_data(L: TransferFunction, band=(1e-2, 1e2), n: int = 500) -> np.ndarray:
    """Rows ``(re, im)`` of ``L(j omega)`` over the sweep grid."""
    v = sweep(L, band, n).value
    return np.column_stack([v.real, v.imag])


def _segments(w, poles):
    """Split a sorted grid into runs that do not straddle a jw-axis pole."""
    side = np.searchsorted(np.sort(poles), w)
    cuts = np.flatnonzero(np.diff(side)) + 1
    return np.split(np.arange(w.size), cuts)


def _bisect(f, a, b):
    fa = f(a)
    for _ in range(200):
        if b - a <= CROSSING_RTOL * b:
            break
        m = np.sqrt(a * b)
        fm = f(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return float(np.sqrt(a * b))


def _crossings(f, w, segs):
    out = []
    for seg in segs:
        if seg.size < 2:
            continue
        v = f(w[seg])
        idx = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)
        for i in idx:
            out.append(_bisect(f, w[seg[i]], w[seg[i + 1]]))
    return sorted(out)


def _default_band(L):
    r = np.concatenate([L.poles, L.zeros])
    r = np.abs(r[r != 0])
    if r.size == 0:
        return 1e-4, 1e4
    return 1e-3 * r.min(), 1e3 * r.max()


def margins(L: TransferFunction, omega_r: Optional[float] = None, band=None,
            n: int = 20000) -> MarginReport:
    """Phase and gain margins of the loop ``L``.

    Parameters
    ----------
    L : TransferFunction
        Proper loop transfer function.
    omega_r : float, optional
        Only crossings above this frequency count.  Defaults to the highest
        jw-axis pole of ``L`` (the resonance), or 0.
    band : (float, float), optional
        Search band; defaults to three decades around the poles and zeros.

    Raises
    ------
    NoCrossover
        If ``|L|`` never crosses 1 above ``omega_r``.
    """
    if not L.is_proper:
        raise ValueError("loop must be proper")
    poles = _jw_pole_freqs(L)
    if omega_r is None:
        omega_r = float(poles.max()) if poles.size else 0.0
    lo, hi = band if band is not None else _default_band(L)
    lo = max(lo, omega_r * (1 + 10 * EXCLUSION_RTOL)) if omega_r > 0 else lo
    w, _ = _grid((lo, hi), n, poles)
    segs = _segments(w, poles)

    def logmag(x):
        return np.log(L.magnitude(x))

    def wrapped(x):
        return np.mod(L.phase(x) + 180.0 + 180.0, 360.0) - 180.0

    gc = [x for x in _crossings(logmag, w, segs) if x > omega_r]
    if not gc:
        raise NoCrossover("no gain crossover")
    wc = gc[0]
    pm = 180.0 + float(L.phase(wc))

    # -180 (mod 360) crossings, ignoring the +-180 wrap discontinuity
    pc = None
    ph = wrapped(w)
    for seg in segs:
        v = ph[seg]
        idx = np.flatnonzero((np.sign(v[:-1]) * np.sign(v[1:]) < 0) & (np.abs(np.diff(v)) < 90.0))
        if idx.size:
            cand = _bisect(wrapped, w[seg[idx[0]]], w[seg[idx[0] + 1]])
            if pc is None or cand < pc:
                pc = cand
    gm = None if pc is None else float(-20.0 * np.log10(L.magnitude(pc)))
    return MarginReport(pm, wc, gm, pc, len(gc) == 1, tuple(gc))
