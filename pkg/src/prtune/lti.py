"""Rational SISO transfer functions with dead time.

Coefficients are stored in descending powers of ``s``.  Phase is computed
from the arguments of the individual poles and zeros so that it is unwrapped
(continuous in frequency) instead of being folded into (-180, 180].
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TransferFunction",
    "FrequencyPoint",
    "StateSpace",
    "SingularFrequencyError",
    "freq_response",
    "series",
    "to_state_space",
]

# Relative tolerance used to snap nearly imaginary roots onto the jw axis.
ROOT_RTOL = 1e-10


class SingularFrequencyError(ValueError):
    """Raised when a transfer function is evaluated at one of its jw-axis poles."""


def _trim(coeffs, name):
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1:
        raise ValueError(f"{name} must be a 1-D coefficient list")
    if not np.all(np.isfinite(c)):
        raise ValueError(f"{name} has non-finite coefficients")
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[nz[0]:].copy()


def _snap(roots):
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return roots
    re = np.where(np.abs(roots.real) <= ROOT_RTOL * np.abs(roots), 0.0, roots.real)
    im = np.where(np.abs(roots.imag) <= ROOT_RTOL * np.abs(roots), 0.0, roots.imag)
    return re + 1j * im


def _root_args(omega, roots):
    """Sum over roots of a branch-continuous ``arg(j*omega - r)`` in degrees."""
    total = np.zeros_like(omega)
    for r in roots:
        a = np.degrees(np.arctan2(omega - r.imag, -r.real))
        if r.real > 0:
            # right half-plane root: keep the angle in (0, 360) so it stays
            # continuous while omega sweeps past Im(r)
            a = np.where(a < 0, a + 360.0, a)
        elif r.real == 0 and r.imag == 0:
            a = np.full_like(omega, 90.0)
        total = total + a
    return total


@dataclass(frozen=True)
class FrequencyPoint:
    """One sample of a frequency response; ``phase`` is in degrees, unwrapped."""

    omega: float
    magnitude: float
    phase: float

    @property
    def value(self) -> complex:
        return self.magnitude * np.exp(1j * np.radians(self.phase))


@dataclass(frozen=True)
class StateSpace:
    """Controllable canonical realization ``x' = Ax + Bu, y = Cx + Du``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    @property
    def order(self) -> int:
        return self.A.shape[0]


class TransferFunction:
    """``num(s)/den(s) * exp(-delay*s)`` with real coefficients.

    Parameters
    ----------
    num, den : sequence of float
        Polynomial coefficients in descending powers of ``s``.  Leading zeros
        are stripped.
    delay : float, optional
        Pure dead time in seconds (default 0).

    Instances are immutable.  Poles and zeros are computed once, lazily.
    """

    def __init__(self, num, den, delay: float = 0.0, *, _zeros=None, _poles=None):
        num = _trim(num, "num")
        den = _trim(den, "den")
        if not np.any(den):
            raise ValueError("denominator is identically zero")
        delay = float(delay)
        if not np.isfinite(delay) or delay < 0:
            raise ValueError(f"delay must be a finite number >= 0, got {delay}")
        num.flags.writeable = False
        den.flags.writeable = False
        self._num = num
        self._den = den
        self._delay = delay
        self._zeros = None if _zeros is None else _snap(_zeros)
        self._poles = None if _poles is None else _snap(_poles)

    @classmethod
    def from_dict(cls, data: dict) -> "TransferFunction":
        """Build from the plant-file mapping ``{"num", "den", "delay"}``."""
        try:
            return cls(data["num"], data["den"], data.get("delay", 0.0))
        except KeyError as exc:
            raise ValueError(f"plant definition is missing {exc}") from None

    def to_dict(self) -> dict:
        return {"num": self._num.tolist(), "den": self._den.tolist(), "delay": self._delay}

    num = property(lambda self: self._num)
    den = property(lambda self: self._den)
    delay = property(lambda self: self._delay)

    @property
    def zeros(self) -> np.ndarray:
        if self._zeros is None:
            self._zeros = _snap(np.roots(self._num)) if self._num.size > 1 else np.zeros(0, complex)
        return self._zeros

    @property
    def poles(self) -> np.ndarray:
        if self._poles is None:
            self._poles = _snap(np.roots(self._den)) if self._den.size > 1 else np.zeros(0, complex)
        return self._poles

    @property
    def relative_degree(self) -> int:
        return (self._den.size - 1) - (self._num.size - 1)

    @property
    def is_strictly_proper(self) -> bool:
        return self.relative_degree > 0

    @property
    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    def dc_gain(self) -> float:
        """``G(0)``; ``inf`` (signed) for a pole at the origin, 0 for a zero there."""
        k_num = self._num.size - 1 - np.flatnonzero(self._num)[-1] if np.any(self._num) else 0
        k_den = self._den.size - 1 - np.flatnonzero(self._den)[-1]
        if not np.any(self._num) or k_num > k_den:
            return 0.0
        ratio = self._num[self._num.size - 1 - k_num] / self._den[self._den.size - 1 - k_den]
        if k_num < k_den:
            return float(np.copysign(np.inf, ratio))
        return float(ratio)

    def __call__(self, s):
        """Evaluate at complex ``s`` (array-like), including the delay."""
        s = np.asarray(s, dtype=complex)
        return np.polyval(self._num, s) / np.polyval(self._den, s) * np.exp(-self._delay * s)

    def _check_singular(self, omega):
        jw_poles = self.poles[self.poles.real == 0]
        if jw_poles.size:
            dist = np.abs(omega[:, None] - jw_poles.imag[None, :])
            scale = np.maximum(1.0, np.abs(jw_poles.imag))[None, :]
            if np.any(dist <= 1e-12 * scale):
                bad = omega[np.any(dist <= 1e-12 * scale, axis=1)][0]
                raise SingularFrequencyError(f"singular frequency: pole on the jw axis at omega={bad:g}")
        if np.any(np.polyval(self._den, 1j * omega) == 0):
            raise SingularFrequencyError("singular frequency: denominator vanishes")

    def magnitude(self, omega):
        """``|G(j*omega)|`` for array-like ``omega``."""
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        self._check_singular(w)
        mag = np.abs(np.polyval(self._num, 1j * w)) / np.abs(np.polyval(self._den, 1j * w))
        return mag if np.ndim(omega) else float(mag[0])

    def phase(self, omega):
        """Unwrapped phase of ``G(j*omega)`` in degrees for ``omega >= 0``.

        The branch is chosen from the pole/zero argument sums, anchored at
        ``omega -> 0+`` by the low-frequency asymptote ``K s^k``; the value
        itself is then taken from the directly evaluated complex response so
        that root-finding error does not leak into the result.
        """
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        if np.any(w < 0):
            raise ValueError("omega must be >= 0")
        self._check_singular(w)
        z, p = self.zeros, self.poles
        lead = self._num[0] / self._den[0]
        branch = _root_args(w, z) - _root_args(w, p) + (180.0 if lead < 0 else 0.0)
        # anchor at 0+: G ~ K0 s^k with k = (#zeros at 0) - (#poles at 0)
        k = int(np.sum(z == 0)) - int(np.sum(p == 0))
        n_low = self._num[np.flatnonzero(self._num)[-1]]
        d_low = self._den[np.flatnonzero(self._den)[-1]]
        target0 = 90.0 * k + (0.0 if n_low / d_low > 0 else -180.0)
        zero = np.zeros(1)
        at0 = _root_args(zero, z) - _root_args(zero, p) + (180.0 if lead < 0 else 0.0)
        branch = branch + 360.0 * np.round((target0 - at0[0]) / 360.0)
        branch = branch - np.degrees(w * self._delay)
        val = np.polyval(self._num, 1j * w) / np.polyval(self._den, 1j * w)
        wrapped = np.degrees(np.angle(val)) - np.degrees(w * self._delay)
        ph = wrapped + 360.0 * np.round((branch - wrapped) / 360.0)
        return ph if np.ndim(omega) else float(ph[0])

    def __repr__(self):
        d = f", delay={self._delay:g}" if self._delay else ""
        return f"TransferFunction(num={self._num.tolist()}, den={self._den.tolist()}{d})"

    def __eq__(self, other):
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return (np.array_equal(self._num, other._num) and np.array_equal(self._den, other._den)
                and self._delay == other._delay)

    def __hash__(self):
        return hash((self._num.tobytes(), self._den.tobytes(), self._delay))


def freq_response(G: TransferFunction, omega: float) -> FrequencyPoint:
    """Magnitude and unwrapped phase of ``G`` at a single frequency.

    Raises
    ------
    SingularFrequencyError
        If ``omega`` coincides with a pole on the imaginary axis.
    """
    omega = float(omega)
    if omega < 0:
        raise ValueError("omega must be >= 0")
    return FrequencyPoint(omega, G.magnitude(omega), G.phase(omega))


def series(G1: TransferFunction, G2: TransferFunction) -> TransferFunction:
    """Cascade ``G1*G2``.  No pole/zero cancellation is attempted."""
    num = np.convolve(G1.num, G2.num)
    den = np.convolve(G1.den, G2.den)
    # carry the factored roots along so repeated roots stay exact
    return TransferFunction(num, den, G1.delay + G2.delay,
                            _zeros=np.concatenate([G1.zeros, G2.zeros]),
                            _poles=np.concatenate([G1.poles, G2.poles]))


def to_state_space(G: TransferFunction) -> StateSpace:
    """Controllable canonical form of the rational part of ``G``.

    The delay is ignored; simulators handle it separately.  For a biproper
    ``G`` the direct term is split off first.
    """
    if not G.is_proper:
        raise ValueError("improper transfer function has no state-space realization")
    a = G.den / G.den[0]
    b = G.num / G.den[0]
    n = a.size - 1
    b = np.concatenate([np.zeros(n + 1 - b.size), b])
    D = float(b[0])
    rem = b[1:] - D * a[1:]
    A = np.zeros((n, n))
    if n:
        A[0, :] = -a[1:]
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    if n:
        B[0, 0] = 1.0
    C = rem.reshape(1, n)
    return StateSpace(A, B, C, D)


def dominant_time_constants(G: TransferFunction) -> "tuple[float, float]":
    """(fastest, slowest) time constants of the stable, nonzero poles of ``G``.

    The slowest uses ``1/|Re p|`` so lightly damped pairs count as slow.
    """
    p = G.poles
    p = p[p != 0]
    if p.size == 0:
        return 1.0, 1.0
    fast = 1.0 / np.max(np.abs(p))
    re = np.abs(p.real)
    slow = 1.0 / np.min(re[re > 0]) if np.any(re > 0) else 1.0 / np.min(np.abs(p))
    return float(fast), float(slow)


def check_plant(G: TransferFunction, name: str = "plant") -> None:
    """Validate the standing plant assumptions: strictly proper, BIBO-stable."""
    if not G.is_strictly_proper:
        raise ValueError(f"{name} must be strictly proper")
    if np.any(G.poles.real >= 0):
        raise ValueError(f"{name} must be BIBO-stable (all poles in the open left half-plane)")

