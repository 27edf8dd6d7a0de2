"""Polarization-mode linear optics for coherent and photon-number pulses.

Conventions used throughout the package:

* Jones vectors are (H, V) amplitudes in units of sqrt(photons), so the mean
  photon number of a coherent pulse is ``|h|**2 + |v|**2``.
* ``rotate(p, x)`` multiplies the Jones vector by ``[[cos x, -sin x], [sin x, cos x]]``.
* Beamsplitters use the real orthogonal matrix ``[[t, r], [r, -t]]`` applied
  per polarization component: ``out1 = t*a + r*b`` and ``out2 = r*a - t*b``.
* Detectors are ideal threshold detectors (unit efficiency, no dark counts).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

ANGLE_TOL = 1e-9


class ParameterError(ValueError):
    """An optical parameter is outside its physical range."""


def canonical_angle(angle: float) -> float:
    """Reduce a polarization angle to [0, pi)."""
    a = math.fmod(angle, math.pi)
    if a < 0.0:
        a += math.pi
    # fmod can return values a hair below pi for inputs that are multiples of pi
    if math.pi - a < ANGLE_TOL * 1e-3:
        a = 0.0
    return a


def same_polarization(a: float, b: float, tol: float = ANGLE_TOL) -> bool:
    """True if two polarization angles agree modulo pi."""
    d = canonical_angle(a - b)
    return d < tol or math.pi - d < tol


@dataclass(frozen=True, slots=True)
class CoherentPulse:
    amp_h: complex = 0j
    amp_v: complex = 0j

    @classmethod
    def at_angle(cls, amplitude: float, angle: float) -> "CoherentPulse":
        return cls(complex(amplitude * math.cos(angle)), complex(amplitude * math.sin(angle)))

    @property
    def mean_photons(self) -> float:
        h, v = self.amp_h, self.amp_v
        return h.real * h.real + h.imag * h.imag + v.real * v.real + v.imag * v.imag

    @property
    def angle(self) -> float:
        """Linear polarization angle in [0, pi); 0 for vacuum."""
        h, v = self.amp_h, self.amp_v
        ref = h if abs(h) >= abs(v) else v
        if ref == 0:
            return 0.0
        phase = ref / abs(ref)
        return canonical_angle(math.atan2((v / phase).real, (h / phase).real))

    def rotated(self, angle: float) -> "CoherentPulse":
        c, s = math.cos(angle), math.sin(angle)
        h, v = self.amp_h, self.amp_v
        return CoherentPulse(c * h - s * v, s * h + c * v)

    def scaled(self, factor: float) -> "CoherentPulse":
        return CoherentPulse(self.amp_h * factor, self.amp_v * factor)


@dataclass(frozen=True, slots=True)
class FockPulse:
    """``n`` photons sharing one linear polarization ``pol``."""

    n: int = 0
    pol: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ParameterError(f"photon number must be >= 0, got {self.n}")
        object.__setattr__(self, "pol", canonical_angle(self.pol))

    @property
    def mean_photons(self) -> float:
        return float(self.n)

    @property
    def angle(self) -> float:
        return self.pol

    def rotated(self, angle: float) -> "FockPulse":
        return FockPulse(self.n, self.pol + angle)


Pulse = Union[CoherentPulse, FockPulse]
VACUUM = CoherentPulse()


class Outcome(str, enum.Enum):
    """Result of a two-detector polarization measurement."""

    ZERO = "0"
    ONE = "1"
    BOTH = "both"
    NONE = "none"

    @property
    def bit(self) -> int | None:
        if self is Outcome.ZERO:
            return 0
        if self is Outcome.ONE:
            return 1
        return None


@dataclass(frozen=True)
class DetectionEvent:
    """Per-detector photon counts; ``clicks`` is the threshold view."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ParameterError("detector counts must be non-negative")

    @property
    def clicks(self) -> tuple[bool, ...]:
        return tuple(c >= 1 for c in self.counts)

    @property
    def n_clicked(self) -> int:
        return sum(self.clicks)


def is_vacuum(pulse: Pulse) -> bool:
    return pulse.mean_photons == 0


def rotate(pulse: Pulse, angle: float) -> Pulse:
    if not math.isfinite(angle):
        raise ParameterError(f"rotation angle must be finite, got {angle}")
    return pulse.rotated(angle)


def attenuate(pulse: CoherentPulse, transmittance_amp: float) -> CoherentPulse:
    """Scale both amplitudes by ``transmittance_amp`` (intensity by its square)."""
    if not 0.0 <= transmittance_amp <= 1.0:
        raise ParameterError(f"amplitude transmittance must lie in [0, 1], got {transmittance_amp}")
    return pulse.scaled(transmittance_amp)


def _check_r(r_amp: float) -> float:
    if not 0.0 <= r_amp <= 1.0:
        raise ParameterError(f"beamsplitter reflectivity must lie in [0, 1], got {r_amp}")
    return math.sqrt(1.0 - r_amp * r_amp)


def beamsplit_coherent(a: CoherentPulse, b: CoherentPulse, r_amp: float = math.sqrt(0.5)
                       ) -> tuple[CoherentPulse, CoherentPulse]:
    t = _check_r(r_amp)
    r = r_amp
    out1 = CoherentPulse(t * a.amp_h + r * b.amp_h, t * a.amp_v + r * b.amp_v)
    out2 = CoherentPulse(r * a.amp_h - t * b.amp_h, r * a.amp_v - t * b.amp_v)
    return out1, out2


def click_probability(mu: float) -> float:
    return -math.expm1(-mu)


def threshold_detect(pulse: Pulse, rng: np.random.Generator) -> bool:
    if isinstance(pulse, FockPulse):
        return pulse.n >= 1
    mu = pulse.mean_photons
    if mu == 0.0:
        return False
    return rng.random() < click_probability(mu)


def _split_components(pulse: Pulse, basis_angle: float, rng) -> tuple[int, int] | tuple[bool, bool]:
    local = pulse.rotated(-basis_angle)
    if isinstance(local, FockPulse):
        if local.n == 0:
            return 0, 0
        aligned = int(rng.binomial(local.n, math.cos(local.pol) ** 2))
        return aligned, local.n - aligned
    mu0 = abs(local.amp_h) ** 2
    mu1 = abs(local.amp_v) ** 2
    c0 = mu0 > 0.0 and rng.random() < click_probability(mu0)
    c1 = mu1 > 0.0 and rng.random() < click_probability(mu1)
    return c0, c1


def measure_polarization(pulse: Pulse, basis_angle: float, rng: np.random.Generator) -> Outcome:
    """Detect the components along ``basis_angle`` (ZERO) and ``basis_angle + pi/2`` (ONE)."""
    c0, c1 = _split_components(pulse, basis_angle, rng)
    if c0 and c1:
        return Outcome.BOTH
    if c0:
        return Outcome.ZERO
    if c1:
        return Outcome.ONE
    return Outcome.NONE


def hom_coincidence_prob(delta_pol: float) -> float:
    """Coincidence probability for two single photons on a 50:50 beamsplitter.

    Only the polarization overlap matters: parallel photons bunch (probability 0)
    while orthogonal photons behave like distinguishable particles (0.5).
    """
    return (1.0 - math.cos(delta_pol) ** 2) / 2.0


def qnd_photon_presence(pulse: Pulse, rng: np.random.Generator) -> tuple[int, FockPulse]:
    """Idealized non-demolition photon count.

    Fock inputs are returned as they are. Coherent inputs collapse onto a
    Poisson-sampled photon number at their own polarization.
    """
    if isinstance(pulse, FockPulse):
        return pulse.n, pulse
    mu = pulse.mean_photons
    n = int(rng.poisson(mu)) if mu > 0.0 else 0
    return n, FockPulse(n, pulse.angle)
