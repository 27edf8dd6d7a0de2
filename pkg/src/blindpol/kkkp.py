"""Revised two-pulse KKKP blind-polarization protocol (honest parties)."""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import Line, pass_segments
from .optics import (
    CoherentPulse,
    Outcome,
    ParameterError,
    Pulse,
    canonical_angle,
    measure_polarization,
    rotate,
    threshold_detect,
)

HALF_TURN = math.pi / 2
ENCODINGS = ("k3", "literal")

# Uniform draws consumed at the start of every round, shared by both protocols
# so that a Protocol W round with its extras disabled replays a KKKP round.
SECRET_DRAWS = 11


class Disposition(str, enum.Enum):
    KEY = "key"
    DISCARD_NO_CLICK = "no_click"
    DISCARD_AMBIGUOUS = "ambiguous"
    DISCARD_MISALIGNED = "misaligned"
    INVALID = "invalid"
    TEST = "test"


@dataclass(frozen=True)
class ProtocolParams:
    alpha: float = 2.83
    eta_sq: float = 0.5
    segments: int = 3
    rounds: int = 10_000
    p_test: float = 0.5
    encoding: str = "k3"
    angle_range: float = math.pi

    def __post_init__(self):
        if self.alpha < 0 or not math.isfinite(self.alpha):
            raise ParameterError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not 0.0 <= self.eta_sq <= 1.0:
            raise ParameterError(f"eta_sq must lie in [0, 1], got {self.eta_sq}")
        if not 0 <= self.segments <= 3:
            raise ParameterError(f"segments must be between 0 and 3, got {self.segments}")
        if self.rounds < 1:
            raise ParameterError(f"rounds must be >= 1, got {self.rounds}")
        if not 0.0 <= self.p_test <= 1.0:
            raise ParameterError(f"p_test must lie in [0, 1], got {self.p_test}")
        if self.encoding not in ENCODINGS:
            raise ParameterError(f"encoding must be one of {ENCODINGS}, got {self.encoding!r}")

    @functools.cached_property
    def _segments(self):
        return pass_segments(self.eta_sq, self.segments)

    def line_segments(self):
        return self._segments


@dataclass
class RoundSecrets:
    theta0: float
    theta1: float
    phi: float
    s0: int
    s1: int
    k: int
    b: int

    @property
    def parity(self) -> int:
        return self.s0 ^ self.s1

    def s(self, i: int) -> int:
        return self.s1 if i else self.s0


@dataclass
class RoundTranscript:
    index: int
    secrets: RoundSecrets
    blocked_click: bool = False
    outcome: Outcome = Outcome.NONE
    disposition: Disposition = Disposition.DISCARD_NO_CLICK
    bob_key: Optional[int] = None
    # adversary columns; eve_attacked is False on honest runs
    eve_attacked: bool = False
    eve_parity: Optional[int] = None
    eve_key: Optional[int] = None
    eve_failed: bool = False

    @property
    def bob_measured(self) -> bool:
        return self.disposition is not Disposition.TEST

    @property
    def bob_clicked(self) -> bool:
        return self.outcome is not Outcome.NONE and self.bob_measured

    @property
    def kept(self) -> bool:
        return self.disposition is Disposition.KEY


def draw_uniforms(rng: np.random.Generator) -> np.ndarray:
    return rng.random(SECRET_DRAWS)


def secrets_from_uniforms(u, angle_range: float = math.pi) -> RoundSecrets:
    return RoundSecrets(
        theta0=float(u[0]) * angle_range,
        theta1=float(u[1]) * angle_range,
        phi=float(u[2]) * angle_range,
        s0=int(u[3] < 0.5),
        s1=int(u[4] < 0.5),
        k=int(u[5] < 0.5),
        b=int(u[6] < 0.5),
    )


def alice_prepare(alpha: float, theta0: float, theta1: float) -> tuple[CoherentPulse, CoherentPulse]:
    return CoherentPulse.at_angle(alpha, theta0), CoherentPulse.at_angle(alpha, theta1)


def bob_shuffle(pulses, phi: float, s0: int, s1: int):
    p0, p1 = pulses
    return rotate(p0, phi + s0 * HALF_TURN), rotate(p1, phi + s1 * HALF_TURN)


def encoding_rotations(theta0: float, theta1: float, k: int, encoding: str = "k3") -> tuple[float, float]:
    """Alice's key-encoding rotation angles for pulses 0 and 1.

    ``k3`` puts ``k`` on pulse 0 and ``k xor 1`` on pulse 1; ``literal`` puts
    ``k`` on both.
    """
    k1 = k ^ 1 if encoding == "k3" else k
    return -theta0 + k * HALF_TURN, -theta1 + k1 * HALF_TURN


def alice_encode_block(pulses, theta0: float, theta1: float, k: int, b: int,
                       rng: np.random.Generator, encoding: str = "k3") -> tuple[Pulse, bool]:
    """Encode ``k``, keep pulse ``b`` and detect the other one.

    Returns the surviving pulse and whether the blocked pulse produced a click.
    """
    a0, a1 = encoding_rotations(theta0, theta1, k, encoding)
    encoded = (rotate(pulses[0], a0), rotate(pulses[1], a1))
    blocked_click = threshold_detect(encoded[1 - b], rng)
    return encoded[b], blocked_click


def decode_bit(l: int, b: int, s_b: int, encoding: str = "k3") -> int:
    return l ^ b ^ s_b if encoding == "k3" else l ^ s_b


def surviving_angle(secrets: RoundSecrets) -> float:
    """Expected polarization of Alice's surviving pulse on a lossless line."""
    return canonical_angle(secrets.phi + (secrets.s(secrets.b) ^ secrets.k ^ secrets.b) * HALF_TURN)


def bob_decode(pulse: Pulse, phi: float, s0: int, s1: int, b: int, rng: np.random.Generator,
               encoding: str = "k3") -> tuple[Outcome, Disposition, Optional[int]]:
    outcome = measure_polarization(rotate(pulse, -phi), 0.0, rng)
    if outcome is Outcome.NONE:
        return outcome, Disposition.DISCARD_NO_CLICK, None
    if outcome is Outcome.BOTH:
        return outcome, Disposition.DISCARD_AMBIGUOUS, None
    s_b = s1 if b else s0
    return outcome, Disposition.KEY, decode_bit(outcome.bit, b, s_b, encoding)


def run_round(index: int, params: ProtocolParams, rng: np.random.Generator,
              adversary=None) -> RoundTranscript:
    sec = secrets_from_uniforms(draw_uniforms(rng), params.angle_range)
    line = Line(params.line_segments(), adversary)

    pulses = alice_prepare(params.alpha, sec.theta0, sec.theta1)
    pulses = line.first_pass(pulses, rng)
    pulses = bob_shuffle(pulses, sec.phi, sec.s0, sec.s1)
    pulses = line.return_pass(pulses, rng)
    survivor, blocked_click = alice_encode_block(pulses, sec.theta0, sec.theta1, sec.k, sec.b,
                                                 rng, params.encoding)
    arriving = line.final_pass(survivor, rng)
    outcome, disposition, bob_key = bob_decode(arriving, sec.phi, sec.s0, sec.s1, sec.b, rng,
                                               params.encoding)

    tr = RoundTranscript(index, sec, blocked_click, outcome, disposition, bob_key)
    if adversary is not None:
        adversary.announce_b(sec.b)
        adversary.fill_transcript(tr)
    return tr
