"""Protocol W: the two-pulse protocol hardened with a quarter-turn shuffle bit.

Bob adds ``delta * pi/4`` to pulse 1, Alice spends a random fraction of rounds
on an interference test of the returned pair, and Bob keeps a round only when
his unshuffle guess ``Delta`` matches ``b * delta``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import Line
from .fock import N_MAX, beamsplit_fock_oracle, sample_ports
from .kkkp import (
    HALF_TURN,
    Disposition,
    ProtocolParams,
    RoundSecrets,
    RoundTranscript,
    alice_encode_block,
    alice_prepare,
    decode_bit,
    draw_uniforms,
    secrets_from_uniforms,
)
from .optics import (
    CoherentPulse,
    FockPulse,
    Outcome,
    Pulse,
    beamsplit_coherent,
    canonical_angle,
    measure_polarization,
    qnd_photon_presence,
    rotate,
    threshold_detect,
)

log = logging.getLogger(__name__)

QUARTER_TURN = math.pi / 4


class ProtocolError(RuntimeError):
    pass


class ClickPattern(str, enum.Enum):
    SINGLE_PORT = "single"
    BOTH_PORTS = "both"
    NONE = "none"


class Verdict(str, enum.Enum):
    PASS = "pass"
    ABORT = "abort"


@dataclass
class WRoundSecrets(RoundSecrets):
    delta: int = 0
    Delta: int = 0
    omega: int = 0
    is_test: bool = False


@dataclass
class WTestRecord:
    omega: int
    s0: int
    s1: int
    delta: int
    pattern: ClickPattern

    @property
    def considered(self) -> bool:
        return is_considered(self.omega, self.s0, self.s1, self.delta)


@dataclass
class WRoundTranscript(RoundTranscript):
    test: Optional[WTestRecord] = None


def is_considered(omega: int, s0: int, s1: int, delta: int) -> bool:
    return (omega - (2 * (s0 + s1) - delta)) % 4 == 0


def draw_w_secrets(rng: np.random.Generator, p_test: float, angle_range: float = math.pi,
                   force_delta: Optional[int] = None) -> WRoundSecrets:
    u = draw_uniforms(rng)
    base = secrets_from_uniforms(u, angle_range)
    delta = int(u[7] < 0.5) if force_delta is None else force_delta
    return WRoundSecrets(
        **vars(base),
        delta=delta,
        Delta=delta * int(u[8] < 0.5),
        omega=min(int(u[9] * 4), 3),
        is_test=bool(u[10] < p_test),
    )


def bob_shuffle_w(pulses, phi: float, s0: int, s1: int, delta: int):
    p0, p1 = pulses
    return (rotate(p0, phi + s0 * HALF_TURN),
            rotate(p1, phi + delta * QUARTER_TURN + s1 * HALF_TURN))


def surviving_angle_w(secrets: WRoundSecrets) -> float:
    s = secrets
    return canonical_angle(s.phi + (s.s(s.b) ^ s.k ^ s.b) * HALF_TURN + s.b * s.delta * QUARTER_TURN)


def _as_fock(pulse: Pulse, rng) -> FockPulse:
    if isinstance(pulse, FockPulse):
        return pulse
    return qnd_photon_presence(pulse, rng)[1]


def interfere_pair(p0: Pulse, p1: Pulse, rng: np.random.Generator) -> ClickPattern:
    """Overlap two pulses on a 50:50 beamsplitter and report which ports clicked.

    Phase-locked coherent pairs are propagated as fields. When a Fock state
    is involved the coherent partner carries no phase reference, so it is
    replaced by its Poisson photon-number mixture and the exact oracle is used.
    """
    if isinstance(p0, CoherentPulse) and isinstance(p1, CoherentPulse):
        o1, o2 = beamsplit_coherent(p0, p1)
        c1, c2 = threshold_detect(o1, rng), threshold_detect(o2, rng)
    else:
        f0, f1 = _as_fock(p0, rng), _as_fock(p1, rng)
        if f0.n + f1.n == 0:
            return ClickPattern.NONE
        dist = beamsplit_fock_oracle(f0, f1, n_max=max(N_MAX, f0.n + f1.n))
        n1, n2 = sample_ports(dist, rng)
        c1, c2 = n1 > 0, n2 > 0
    if c1 and c2:
        return ClickPattern.BOTH_PORTS
    if c1 or c2:
        return ClickPattern.SINGLE_PORT
    return ClickPattern.NONE


def alice_interference_test(pulses, theta0: float, theta1: float, omega: int,
                            rng: np.random.Generator) -> ClickPattern:
    p0 = rotate(pulses[0], -theta0)
    p1 = rotate(pulses[1], -theta1 + omega * QUARTER_TURN)
    return interfere_pair(p0, p1, rng)


def alice_w3_branch(pulses, secrets: WRoundSecrets, rng: np.random.Generator, encoding: str = "k3"):
    """Either run the interference test or encode and block.

    Returns ``(WTestRecord, None, None)`` on a test round and
    ``(None, survivor, blocked_click)`` otherwise.
    """
    s = secrets
    if s.is_test:
        pattern = alice_interference_test(pulses, s.theta0, s.theta1, s.omega, rng)
        return WTestRecord(s.omega, s.s0, s.s1, s.delta, pattern), None, None
    survivor, blocked_click = alice_encode_block(pulses, s.theta0, s.theta1, s.k, s.b, rng, encoding)
    return None, survivor, blocked_click


def bob_decode_w(pulse: Pulse, phi: float, delta: int, Delta: int, s0: int, s1: int, b: int,
                 rng: np.random.Generator, encoding: str = "k3") -> tuple[Outcome, Disposition, Optional[int]]:
    outcome = measure_polarization(rotate(pulse, -phi - Delta * QUARTER_TURN), 0.0, rng)
    if Delta != b * delta:
        return outcome, Disposition.DISCARD_MISALIGNED, None
    if outcome is Outcome.NONE:
        return outcome, Disposition.DISCARD_NO_CLICK, None
    if outcome is Outcome.BOTH:
        return outcome, Disposition.DISCARD_AMBIGUOUS, None
    s_b = s1 if b else s0
    return outcome, Disposition.KEY, decode_bit(outcome.bit, b, s_b, encoding)


def run_round(index: int, params: ProtocolParams, rng: np.random.Generator, adversary=None,
              force_delta: Optional[int] = None, blocked_check: bool = True) -> WRoundTranscript:
    sec = draw_w_secrets(rng, params.p_test, params.angle_range, force_delta)
    line = Line(params.line_segments(), adversary)

    pulses = alice_prepare(params.alpha, sec.theta0, sec.theta1)
    pulses = line.first_pass(pulses, rng)
    pulses = bob_shuffle_w(pulses, sec.phi, sec.s0, sec.s1, sec.delta)
    pulses = line.return_pass(pulses, rng)
    record, survivor, blocked_click = alice_w3_branch(pulses, sec, rng, params.encoding)

    if record is not None:
        tr = WRoundTranscript(index, sec, disposition=Disposition.TEST, test=record)
    else:
        arriving = line.final_pass(survivor, rng)
        outcome, disposition, bob_key = bob_decode_w(arriving, sec.phi, sec.delta, sec.Delta,
                                                     sec.s0, sec.s1, sec.b, rng, params.encoding)
        if blocked_check and not blocked_click:
            disposition, bob_key = Disposition.INVALID, None
        tr = WRoundTranscript(index, sec, blocked_click, outcome, disposition, bob_key)
    if adversary is not None:
        adversary.announce_b(sec.b)
        adversary.fill_transcript(tr)
    return tr


@dataclass
class W6Result:
    verdict: Verdict
    tests: int
    considered: int
    double_clicks: int
    vacuous: bool


def w6_verdict(records: Sequence[WTestRecord]) -> W6Result:
    considered = [r for r in records if r.considered]
    doubles = sum(r.pattern is ClickPattern.BOTH_PORTS for r in considered)
    if not considered:
        log.warning("W6: no test round had a matching rotation; verdict is vacuous")
    return W6Result(Verdict.ABORT if doubles else Verdict.PASS, len(records), len(considered),
                    doubles, not considered)


@dataclass
class W7Result:
    compared: int
    mismatches: int
    alice_key: list[int]
    bob_key: list[int]

    @property
    def mismatch_rate(self) -> float:
        return self.mismatches / self.compared if self.compared else 0.0


def w7_compare(alice_key: Sequence[int], bob_key: Sequence[int], sample_fraction: float,
               rng: np.random.Generator) -> W7Result:
    """Publicly compare a random sample of key bits; sampled bits leave the key."""
    if len(alice_key) != len(bob_key):
        raise ProtocolError(f"key length mismatch: {len(alice_key)} vs {len(bob_key)}")
    n = len(alice_key)
    m = int(round(sample_fraction * n))
    sampled = set(rng.choice(n, size=m, replace=False).tolist()) if m else set()
    mismatches = sum(alice_key[i] != bob_key[i] for i in sampled)
    keep = [i for i in range(n) if i not in sampled]
    return W7Result(m, mismatches, [alice_key[i] for i in keep], [bob_key[i] for i in keep])
