"""Plant classification and frequency-point identification.

The relay route runs the adjustable-phase relay experiment at 0, -60 and
-120 deg in turn and keeps the first stage that oscillates.  The analytic
route is the exact reference: it searches the unwrapped plant phase for the
first crossing of the target phase.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .foi import VALID_BAND, PhaseElement, make_phase_element
from .lti import TransferFunction, check_plant
from .relay import LimitCycle, NoOscillation, RelayConfig, simulate_relay_loop

__all__ = [
    "IdentifiedPoint",
    "NotReached",
    "IdentificationError",
    "CLASS_TABLE",
    "rap_identify",
    "point_from_cycle",
    "analytic_identify",
    "analytic_point",
    "identify",
]

# plant class -> (nu, relay phase gamma), with gamma = -180 - nu
CLASS_TABLE = {"A": (-180.0, 0.0), "B": (-120.0, -60.0), "C": (-60.0, -120.0)}
_GAMMA_TO_CLASS = {g: c for c, (_, g) in CLASS_TABLE.items()}


class IdentificationError(RuntimeError):
    """The plant could not be identified."""


@dataclass(frozen=True)
class IdentifiedPoint:
    """One identified point ``G(j*omega_nu) = m_nu * exp(j*nu)``.

    Attributes
    ----------
    plant_class : {"A", "B", "C"}
    nu : float
        Nominal phase of the point in degrees (-180, -120 or -60).
    omega_nu : float
        Frequency in rad/s.
    m_nu : float
        Plant magnitude at ``omega_nu``.
    method : {"relay", "analytic"}
    gamma_used : float
        Relay phase in degrees that produced the point.
    phase : float
        Phase actually attributed to the point in degrees.  For the relay
        route this is ``-180 - angle(F(j*omega))`` with the realized element,
        so it can differ slightly from ``nu``.
    cycle : LimitCycle or None
        The measured relay oscillation, when ``method == "relay"``.
    """

    plant_class: str
    nu: float
    omega_nu: float
    m_nu: float
    method: str
    gamma_used: float
    phase: float
    cycle: Optional[LimitCycle] = None

    def __post_init__(self):
        if self.plant_class not in CLASS_TABLE:
            raise ValueError(f"unknown plant class {self.plant_class!r}")
        nu, gamma = CLASS_TABLE[self.plant_class]
        if (self.nu, self.gamma_used) != (nu, gamma):
            raise ValueError(f"class {self.plant_class} requires nu={nu:g}, gamma={gamma:g}")
        if not self.m_nu > 0:
            raise ValueError("m_nu must be > 0")
        if not self.omega_nu > 0:
            raise ValueError("omega_nu must be > 0")
        if self.method not in ("relay", "analytic"):
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        return {"class": self.plant_class, "nu_deg": self.nu, "omega": self.omega_nu,
                "magnitude": self.m_nu, "method": self.method, "gamma_deg": self.gamma_used,
                "phase_deg": self.phase}


@dataclass(frozen=True)
class NotReached:
    """Returned by :func:`analytic_identify` when the phase never attains ``nu``."""

    nu: float
    phase_min: float


def point_from_cycle(cycle: LimitCycle, d: float, F: PhaseElement):
    """Convert a relay limit cycle into ``(omega, magnitude, phase)`` of the plant.

    First-harmonic balance of the ideal relay gives
    ``|F G| = pi A / (4 d)`` and ``angle(F G) = -180 deg`` at ``omega = 2 pi / T``.
    The realized (not ideal) response of ``F`` is divided out.
    """
    if not cycle.converged:
        raise ValueError("limit cycle did not converge")
    omega = 2.0 * np.pi / cycle.period
    lo, hi = F.valid_band
    if not lo <= omega <= hi:
        raise IdentificationError(
            f"identified frequency outside approximation band: {omega:g} rad/s not in [{lo:g}, {hi:g}]")
    mag_f = F.tf.magnitude(omega)
    magnitude = np.pi * cycle.amplitude / (4.0 * d * mag_f)
    phase = -180.0 - F.tf.phase(omega)
    return float(omega), float(magnitude), float(phase)


def rap_identify(G: TransferFunction, cfg: RelayConfig = RelayConfig()) -> IdentifiedPoint:
    """Staged relay identification: try relay phases 0, -60, -120 deg in order.

    Raises
    ------
    IdentificationError
        "unclassifiable plant" when no stage oscillates, or when the
        oscillation frequency falls outside the phase-element band.
    """
    check_plant(G)
    reasons = []
    for plant_class in ("A", "B", "C"):
        nu, gamma = CLASS_TABLE[plant_class]
        F = make_phase_element(gamma)
        try:
            cycle = simulate_relay_loop(F, G, cfg)
        except NoOscillation as exc:
            reasons.append(f"{gamma:g} deg: {exc.reason}")
            continue
        omega, magnitude, phase = point_from_cycle(cycle, cfg.d, F)
        return IdentifiedPoint(plant_class, nu, omega, magnitude, "relay", gamma, phase, cycle)
    raise IdentificationError("unclassifiable plant (" + "; ".join(reasons) + ")")


def analytic_identify(G: TransferFunction, nu: float, lo: float = 1e-4, hi: float = 1e4,
                      n: int = 4000, tol: float = 1e-8) -> Union["tuple[float, float]", NotReached]:
    """Lowest frequency where the unwrapped phase of ``G`` reaches ``nu``.

    Returns
    -------
    (omega_nu, m_nu) or NotReached
    """
    nu = float(nu)
    if nu not in (-180.0, -120.0, -60.0):
        raise ValueError("nu must be one of -180, -120, -60")
    w = np.logspace(np.log10(lo), np.log10(hi), n)
    dev = G.phase(w) - nu
    idx = np.flatnonzero(dev <= 0)
    if idx.size == 0:
        return NotReached(nu, float(np.min(dev) + nu))
    i = idx[0]
    if i == 0:
        return NotReached(nu, float(dev[0] + nu))
    a, b = w[i - 1], w[i]
    # bisection on the bracket (dev(a) > 0 >= dev(b))
    for _ in range(200):
        m = 0.5 * (a + b)
        dm = G.phase(m) - nu
        if abs(dm) <= tol or b - a <= 1e-15 * b:
            break
        if dm > 0:
            a = m
        else:
            b = m
    m = 0.5 * (a + b)
    return float(m), float(G.magnitude(m))


def analytic_point(G: TransferFunction) -> IdentifiedPoint:
    """Classify ``G`` and return its exact identified point.

    The class is set by the first of -180, -120, -60 deg that the phase reaches.
    """
    check_plant(G)
    for plant_class in ("A", "B", "C"):
        nu, gamma = CLASS_TABLE[plant_class]
        res = analytic_identify(G, nu)
        if isinstance(res, NotReached):
            continue
        omega, magnitude = res
        return IdentifiedPoint(plant_class, nu, omega, magnitude, "analytic", gamma, nu)
    raise IdentificationError("unclassifiable plant (phase never reaches -60 deg)")


def identify(G: TransferFunction, method: str = "relay",
             cfg: RelayConfig = RelayConfig()) -> IdentifiedPoint:
    """Dispatch to :func:`rap_identify` or :func:`analytic_point`."""
    if method == "relay":
        return rap_identify(G, cfg)
    if method == "analytic":
        return analytic_point(G)
    raise ValueError(f"unknown method {method!r}; expected 'relay' or 'analytic'")
