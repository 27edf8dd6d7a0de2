"""Lossy optical segments and the interception points an adversary can occupy."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .optics import FockPulse, ParameterError, Pulse, attenuate


class TapPosition(str, enum.Enum):
    FIRST_PASS = "A->B"
    RETURN_PASS = "B->A"
    FINAL_PASS = "A->B final"


@dataclass(frozen=True)
class ChannelSegment:
    """One-way link with intensity transmittance ``eta_sq``."""

    eta_sq: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta_sq <= 1.0:
            raise ParameterError(f"eta_sq must lie in [0, 1], got {self.eta_sq}")

    @property
    def eta(self) -> float:
        return math.sqrt(self.eta_sq)


LOSSLESS = ChannelSegment(1.0)


def transmit(pulse: Pulse, segment: ChannelSegment, rng: np.random.Generator | None = None) -> Pulse:
    """Coherent amplitudes scale by eta; Fock photons survive independently with eta**2."""
    if segment.eta_sq == 1.0:
        return pulse
    if isinstance(pulse, FockPulse):
        if pulse.n == 0:
            return pulse
        if rng is None:
            raise ValueError("Fock transmission through a lossy segment needs an rng")
        return FockPulse(int(rng.binomial(pulse.n, segment.eta_sq)), pulse.pol)
    return attenuate(pulse, segment.eta)


def transmit_pair(pulses, segment: ChannelSegment, rng=None):
    return tuple(transmit(p, segment, rng) for p in pulses)


def pass_segments(eta_sq: float, segments: int) -> tuple[ChannelSegment, ChannelSegment, ChannelSegment]:
    """Segments for the three passes of a round; the first ``segments`` passes are lossy."""
    if not 0 <= segments <= 3:
        raise ParameterError(f"segments must be between 0 and 3, got {segments}")
    lossy = ChannelSegment(eta_sq)
    return tuple(lossy if i < segments else LOSSLESS for i in range(3))


@dataclass
class Line:
    """The quantum channel between Alice and Bob for one round.

    With no ``adversary`` every pass goes through its lossy segment. An
    adversary replaces all three passes: she intercepts with unit efficiency
    next to each party, so no segment loss applies while she holds the line.
    """

    segments: tuple[ChannelSegment, ChannelSegment, ChannelSegment]
    adversary: object | None = None

    def first_pass(self, pulses, rng):
        if self.adversary is not None:
            return self.adversary.intercept_from_alice(pulses, rng)
        return transmit_pair(pulses, self.segments[0], rng)

    def return_pass(self, pulses, rng):
        if self.adversary is not None:
            return self.adversary.intercept_from_bob(pulses, rng)
        return transmit_pair(pulses, self.segments[1], rng)

    def final_pass(self, pulse, rng):
        if self.adversary is not None:
            return self.adversary.intercept_final(pulse, rng)
        return transmit(pulse, self.segments[2], rng)
