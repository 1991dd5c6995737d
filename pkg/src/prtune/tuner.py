"""PR controller tuning from one identified frequency-response point.

The controller is

    C(s) = Kp + (Kr1 s + Kr2) / (s^2 + 2 xi wr s + wr^2).

Its gains are fixed by two conditions: ``C(j w_nu) G(j w_nu) = p`` for a
design point ``p`` chosen per plant class, and the product of the controller
zeros equals ``(eta wr)^2``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .identify import IdentifiedPoint
from .lti import TransferFunction

__all__ = [
    "DesignPoint",
    "PRController",
    "PerformanceWarning",
    "design_point_for",
    "tune_generic",
    "tune",
    "pr_transfer_function",
    "verify_tuning_equation",
]


class PerformanceWarning(UserWarning):
    """Resonance frequency close to the identified frequency; expect poor tracking."""


@dataclass(frozen=True)
class DesignPoint:
    """Target loop response ``p = m_rho * exp(j*rho)`` at the identified frequency."""

    m_rho: float
    rho: float

    def __post_init__(self):
        if not self.m_rho > 0:
            raise ValueError("m_rho must be > 0")

    @property
    def value(self) -> complex:
        return self.m_rho * np.exp(1j * np.radians(self.rho))


def design_point_for(plant_class: str, ratio: float) -> DesignPoint:
    """Design point for a plant class and ``ratio = omega_r / omega_nu``.

    Class A uses a small gain margin (|p| = 0.4) with the phase a few degrees
    past -180: -183 deg below ratio 0.5 and -181 deg from 0.5 up.  Class B
    targets a 50 deg phase margin and class C a 90 deg one.
    """
    if plant_class == "A":
        return DesignPoint(0.4, -183.0 if ratio < 0.5 else -181.0)
    if plant_class == "B":
        return DesignPoint(1.0, -130.0)
    if plant_class == "C":
        return DesignPoint(1.0, -90.0)
    raise ValueError(f"unknown plant class {plant_class!r}")


@dataclass(frozen=True)
class PRController:
    """Proportional-resonant controller gains.

    Attributes
    ----------
    kp, kr1, kr2 : float
    omega_r : float
        Resonance frequency in rad/s.
    xi : float
        Damping of the resonant poles; 0 places them on the jw axis.
    eta : float
        Zero-product factor: the numerator constant equals ``(eta omega_r)^2 kp``.
    """

    kp: float
    kr1: float
    kr2: float
    omega_r: float
    xi: float = 0.0
    eta: float = 0.1

    def __post_init__(self):
        if not self.omega_r > 0:
            raise ValueError("omega_r must be > 0")
        if not self.xi >= 0:
            raise ValueError("xi must be >= 0")

    def response(self, omega):
        """Complex ``C(j*omega)``."""
        s = 1j * np.asarray(omega, dtype=float)
        wr = self.omega_r
        return self.kp + (self.kr1 * s + self.kr2) / (s * s + 2 * self.xi * wr * s + wr * wr)

    def to_dict(self) -> dict:
        return {"kp": self.kp, "kr1": self.kr1, "kr2": self.kr2, "omega_r": self.omega_r,
                "xi": self.xi, "eta": self.eta}

    @classmethod
    def from_dict(cls, data: dict) -> "PRController":
        try:
            return cls(float(data["kp"]), float(data["kr1"]), float(data["kr2"]),
                       float(data["omega_r"]), float(data.get("xi", 0.0)),
                       float(data.get("eta", 0.1)))
        except KeyError as exc:
            raise ValueError(f"controller definition is missing {exc}") from None


def tune_generic(m_nu: float, omega_nu: float, nu: float, p: DesignPoint, omega_r: float,
                 xi: float = 0.0, eta: float = 0.1) -> PRController:
    """Closed-form PR gains placing ``C(j w_nu) = p / G(j w_nu)``.

    Parameters
    ----------
    m_nu, omega_nu, nu : float
        Identified point: magnitude, frequency (rad/s) and phase (deg).
    p : DesignPoint
    omega_r : float
        Resonance frequency, ``0 < omega_r < omega_nu``.
    xi : float
        Resonant-pole damping, ``>= 0``.
    eta : float
        Zero-product factor in (0, 1).

    Raises
    ------
    ValueError
        If ``omega_r >= omega_nu`` ("resonance above identified frequency"),
        or the inputs are otherwise out of range.
    """
    if not m_nu > 0:
        raise ValueError("m_nu must be > 0")
    if not omega_r > 0:
        raise ValueError("omega_r must be > 0")
    if omega_r >= omega_nu:
        raise ValueError(f"resonance above identified frequency: omega_r={omega_r:g} >= omega_nu={omega_nu:g}")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if not xi >= 0:
        raise ValueError("xi must be >= 0")
    wr, wn = float(omega_r), float(omega_nu)
    den = eta**2 * wr**2 - wn**2
    if den == 0:
        raise ValueError("singular tuning denominator: eta*omega_r == omega_nu")
    phi = np.radians(p.rho - nu)
    c, s = np.cos(phi), np.sin(phi)
    g = p.m_rho / m_nu
    q = wr**2 - wn**2
    e2 = eta**2 - 1.0
    kp = g * (q * c - 2 * wn * xi * wr * s) / den
    kr2 = g * (q * c * e2 * wr**2 - 2 * wn * xi * wr**3 * s * e2) / den
    kr1 = g * (2 * wn * xi * wr**3 * e2 * c + (q * den + 4 * xi**2 * wn**2 * wr**2) * s) / (wn * den)
    return PRController(float(kp), float(kr1), float(kr2), wr, float(xi), float(eta))


def tune(point: IdentifiedPoint, omega_r: float, xi: float = 0.0, eta: float = 0.1) -> PRController:
    """Tune a PR controller for an identified point using its class design point.

    Emits :class:`PerformanceWarning` when ``omega_r > 0.9 * omega_nu``.
    """
    ratio = omega_r / point.omega_nu
    p = design_point_for(point.plant_class, ratio)
    c = tune_generic(point.m_nu, point.omega_nu, point.nu, p, omega_r, xi, eta)
    if ratio > 0.9:
        warnings.warn(f"omega_r/omega_nu = {ratio:.3g} > 0.9: tracking performance degrades "
                      "near the identified frequency", PerformanceWarning, stacklevel=2)
    return c


def pr_transfer_function(c: PRController) -> TransferFunction:
    """Biproper rational form of the controller."""
    wr = c.omega_r
    a1 = 2 * c.xi * wr
    num = [c.kp, a1 * c.kp + c.kr1, c.kr2 + c.kp * wr**2]
    den = [1.0, a1, wr**2]
    return TransferFunction(num, den)


def verify_tuning_equation(c: PRController, point: IdentifiedPoint, p: DesignPoint) -> float:
    """``|C(j w_nu) - (M_rho/M_nu) exp(j(rho - nu))|``."""
    target = p.m_rho / point.m_nu * np.exp(1j * np.radians(p.rho - point.nu))
    return float(abs(c.response(point.omega_nu) - target))
