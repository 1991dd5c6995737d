"""Fixed-phase elements for the adjustable-phase relay experiment.

Two 11th-order rational approximations of the fractional integrator
``1/s^m`` (m = 1/3 and m = 2/3) are embedded as constants.  They are valid
between 1e-3 and 1e3 rad/s.  The -120 deg element is the m = 1/3 set in
series with a pure integrator.
"""

from dataclasses import dataclass

import numpy as np

from .lti import TransferFunction, series

__all__ = ["PhaseElement", "make_phase_element", "phase_flatness", "VALID_BAND", "RELAY_PHASES"]

VALID_BAND = (1e-3, 1e3)
RELAY_PHASES = (0.0, -60.0, -120.0)

# Coefficients of s^k, k = 0..11 (ascending powers).
_FOI_ONE_THIRD_DEN = (0.0, 111.1, 8.49e4, 1.15e7, 3.232e8, 1.942e9, 2.509e9,
                      6.986e8, 4.195e7, 5.462e5, 1569.0, 1.0)
_FOI_ONE_THIRD_NUM = (0.3452, 1309.0, 5.4e5, 4.302e7, 7.22e8, 2.598e9, 2.013e9,
                      3.36e8, 1.211e7, 9.508e4, 167.8, 0.06905)
_FOI_TWO_THIRDS_DEN = (0.0, 11.11, 1.097e4, 1.918e6, 6.963e7, 5.403e8, 9.016e8,
                       3.24e8, 2.506e7, 4.164e5, 1466.0, 1.0)
_FOI_TWO_THIRDS_NUM = (0.7152, 1446.0, 4.387e5, 2.678e7, 3.473e8, 9.672e8, 5.799e8,
                       7.487e7, 2.08e6, 1.238e4, 15.45, 0.003576)


def _from_ascending(num, den):
    return TransferFunction(num[::-1], den[::-1])


@dataclass(frozen=True)
class PhaseElement:
    """Relay phase element ``F(s)`` with nominal constant phase ``gamma`` (deg)."""

    gamma: float
    tf: TransferFunction
    valid_band: tuple = VALID_BAND

    def response(self, omega):
        """Complex ``F(j*omega)``."""
        return self.tf(1j * np.asarray(omega, dtype=float))


def make_phase_element(gamma: float) -> PhaseElement:
    """Return the phase element for relay phase ``gamma`` in {0, -60, -120} degrees."""
    g = float(gamma)
    if g == 0.0:
        tf = TransferFunction([1.0], [1.0])
    elif g == -60.0:
        tf = _from_ascending(_FOI_TWO_THIRDS_NUM, _FOI_TWO_THIRDS_DEN)
    elif g == -120.0:
        tf = series(_from_ascending(_FOI_ONE_THIRD_NUM, _FOI_ONE_THIRD_DEN),
                    TransferFunction([1.0], [1.0, 0.0]))
    else:
        raise ValueError(f"unsupported relay phase {gamma!r}; expected one of {RELAY_PHASES}")
    return PhaseElement(g, tf)


def phase_flatness(element: PhaseElement, band=(1e-2, 1e2), n_points: int = 1000) -> float:
    """Largest deviation (deg) of the element phase from ``gamma`` on a log grid."""
    lo, hi = map(float, band)
    vlo, vhi = element.valid_band
    if not (vlo <= lo < hi <= vhi):
        raise ValueError(f"band {band} is not inside the valid band {element.valid_band}")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    w = np.logspace(np.log10(lo), np.log10(hi), int(n_points))
    return float(np.max(np.abs(element.tf.phase(w) - element.gamma)))


def flatness_table(element: PhaseElement, band=(1e-2, 1e2), n_points: int = 1000):
    """Rows ``(omega, magnitude_dB, phase_deg)`` of the element on a log grid."""
    lo, hi = map(float, band)
    w = np.logspace(np.log10(lo), np.log10(hi), int(n_points))
    mag_db = 20.0 * np.log10(element.tf.magnitude(w))
    return np.column_stack([w, mag_db, element.tf.phase(w)])
