"""Impersonation attack on the two-pulse protocols.

Eve poses as Bob towards Alice and as Alice towards Bob. She learns the
parity ``s0 ^ s1`` of Bob's shuffle bits from the pulses Bob returns
(the parity probe), then replays Alice's own pulses back to her with a
matching shuffle so that Alice's surviving pulse tells Eve exactly the
rotation she must apply to the pulse she forwards to Bob.

Two probes are modelled: a single-photon one (photon extraction plus
two-photon interference) and a coherent-state one (beamsplitter tap plus
field interference). For the coherent probe ``SuccessModel.CLOSED_FORM``
feeds each interference branch the full tapped amplitude ``r*gamma``,
reproducing the closed-form success probability ``(1 - exp(-r^2 gamma^2))^2``;
``SuccessModel.PHYSICAL`` accounts for the 50:50 split between the two
branches, so each branch sees ``r*gamma/sqrt(2)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kkkp import HALF_TURN, RoundTranscript
from .optics import (
    VACUUM,
    CoherentPulse,
    FockPulse,
    ParameterError,
    Pulse,
    hom_coincidence_prob,
    is_vacuum,
    measure_polarization,
    qnd_photon_presence,
    rotate,
)
from .protocol_w import QUARTER_TURN, ClickPattern, interfere_pair

INCONCLUSIVE = None


class Variant(str, enum.Enum):
    NONE = "none"
    AS_SINGLE_PHOTON = "as-single-photon"
    AS_COHERENT = "as-coherent"


class SuccessModel(str, enum.Enum):
    CLOSED_FORM = "closed-form"
    PHYSICAL = "physical"


class UnattainableRateError(ValueError):
    """No Eve amplitude reaches the requested Bob detection rate."""


@dataclass(frozen=True)
class AttackConfig:
    variant: Variant = Variant.NONE
    gamma: float = 4.0
    r_amp: float = math.sqrt(0.1)
    success_model: SuccessModel = SuccessModel.CLOSED_FORM
    eve_fock_n: int = 2
    # single-photon probe fed with coherent pulses of amplitude gamma instead of Fock states
    coherent_source: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "success_model", SuccessModel(self.success_model))
        if not 0.0 <= self.r_amp <= 1.0:
            raise ParameterError(f"r_amp must lie in [0, 1], got {self.r_amp}")
        if self.gamma < 0 or not math.isfinite(self.gamma):
            raise ParameterError(f"gamma must be finite and >= 0, got {self.gamma}")
        if self.eve_fock_n < 0:
            raise ParameterError(f"eve_fock_n must be >= 0, got {self.eve_fock_n}")

    @property
    def t_amp(self) -> float:
        return math.sqrt(1.0 - self.r_amp ** 2)


@dataclass
class EveState:
    e1: tuple = ()
    e2: tuple = ()
    theta0p: float = 0.0
    theta1p: float = 0.0
    phip: float = 0.0
    s0p: int = 0
    parity: Optional[int] = INCONCLUSIVE
    probe_ran: bool = False
    lp: Optional[int] = None
    learned: Optional[int] = None
    key: Optional[int] = None
    failed: bool = False

    @property
    def conclusive(self) -> bool:
        return self.parity is not INCONCLUSIVE


# -- closed forms ----------------------------------------------------------

def branch_mean_photons(gamma: float, r_amp: float, model: SuccessModel = SuccessModel.CLOSED_FORM) -> float:
    mu = (r_amp * gamma) ** 2
    return mu if SuccessModel(model) is SuccessModel.CLOSED_FORM else mu / 2.0


def p_success(gamma: float, r_amp: float, model: SuccessModel = SuccessModel.CLOSED_FORM) -> float:
    """Probability that the coherent probe gives a conclusive parity."""
    return (-math.expm1(-branch_mean_photons(gamma, r_amp, model))) ** 2


def p_bob(gamma: float, r_amp: float, model: SuccessModel = SuccessModel.CLOSED_FORM) -> float:
    """Bob's detection probability under the coherent attack."""
    t2 = 1.0 - r_amp ** 2
    return p_success(gamma, r_amp, model) * -math.expm1(-t2 * gamma ** 2)


def tune_gamma(target_rate: float, r_amp: float, model: SuccessModel = SuccessModel.CLOSED_FORM,
               tol: float = 1e-12) -> float:
    """Eve amplitude whose Bob detection rate equals ``target_rate``.

    ``p_bob`` is strictly increasing in gamma with supremum 1 for 0 < r < 1,
    so a bracket is grown geometrically and then bisected.
    """
    if target_rate <= 0.0:
        return 0.0
    if not 0.0 < r_amp < 1.0:
        raise UnattainableRateError(f"r_amp={r_amp} leaves Eve no measurement or no forwarded light")
    if target_rate >= 1.0:
        raise UnattainableRateError(f"target rate {target_rate} is at or above the supremum 1")
    lo, hi = 0.0, 1.0
    while p_bob(hi, r_amp, model) < target_rate:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise UnattainableRateError(f"target rate {target_rate} not reached numerically")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if p_bob(mid, r_amp, model) < target_rate:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return lo if abs(p_bob(lo, r_amp, model) - target_rate) < abs(p_bob(hi, r_amp, model) - target_rate) else hi


# -- parity probes ---------------------------------------------------------

def extract_and_interfere(pulses_from_bob, state: EveState, rotations: tuple[float, float],
                          rng: np.random.Generator) -> tuple[Optional[bool], tuple[FockPulse, FockPulse]]:
    """QND-check both pulses, pull one photon from each and overlap them.

    ``rotations`` are applied after Eve has undone her own preparation
    angles. Returns ``(coincidence, remaining pulses)``; coincidence is None
    when either pulse was empty.
    """
    n0, f0 = qnd_photon_presence(pulses_from_bob[0], rng)
    n1, f1 = qnd_photon_presence(pulses_from_bob[1], rng)
    if n0 == 0 or n1 == 0:
        return None, (f0, f1)
    pol0 = f0.pol - state.theta0p + rotations[0]
    pol1 = f1.pol - state.theta1p + rotations[1]
    coincidence = bool(rng.random() < hom_coincidence_prob(pol0 - pol1))
    return coincidence, (FockPulse(n0 - 1, f0.pol), FockPulse(n1 - 1, f1.pol))


def as_single_photon(pulses_from_bob, state: EveState, rng: np.random.Generator):
    """Single-photon parity probe.

    Eve picks the orthogonality test (no extra rotation) or the parallelism
    test (E0 turned by pi/2) at random; a coincidence is conclusive for odd
    or even parity respectively. Returns ``(parity, stored pulses)``.
    """
    parallel_test = rng.random() < 0.5
    rotations = (HALF_TURN, 0.0) if parallel_test else (0.0, 0.0)
    coincidence, remaining = extract_and_interfere(pulses_from_bob, state, rotations, rng)
    if not coincidence:
        return INCONCLUSIVE, remaining
    return (0 if parallel_test else 1), remaining


def as_coherent(pulses_from_bob, config: AttackConfig, state: EveState, rng: np.random.Generator):
    """Coherent-state parity probe with a tap of reflectivity ``r``.

    Both interference branches run on every round; two-fold clicking in the
    orthogonality branch means odd parity, in the parallelism branch even
    parity. Clicks in both branches (or neither) are inconclusive.
    Returns ``(parity, pulses kept for Bob)``.
    """
    r, t = config.r_amp, config.t_amp
    stored = tuple(p.scaled(t) for p in pulses_from_bob)
    scale = r if config.success_model is SuccessModel.CLOSED_FORM else r / math.sqrt(2.0)
    q0 = rotate(pulses_from_bob[0].scaled(scale), -state.theta0p)
    q1 = rotate(pulses_from_bob[1].scaled(scale), -state.theta1p)
    odd = interfere_pair(q0, q1, rng) is ClickPattern.BOTH_PORTS
    even = interfere_pair(rotate(q0, HALF_TURN), q1, rng) is ClickPattern.BOTH_PORTS
    if odd == even:
        return INCONCLUSIVE, stored
    return (1 if odd else 0), stored


def probe_coincidences(offset0: float, offset1: float, n_trials: int, rng: np.random.Generator,
                       quarter_shuffle: bool = True) -> dict[int, tuple[int, int]]:
    """Vectorized single-photon probe against Bob's shuffle.

    Eve turns her extracted photons by fixed offsets before interfering them;
    Bob draws ``s0, s1`` (and ``delta`` when ``quarter_shuffle``) uniformly.
    Returns ``{parity: (trials, coincidences)}``.
    """
    s0 = rng.integers(0, 2, n_trials)
    s1 = rng.integers(0, 2, n_trials)
    delta = rng.integers(0, 2, n_trials) if quarter_shuffle else np.zeros(n_trials, dtype=int)
    rel = (offset1 - offset0) + delta * QUARTER_TURN + (s1 - s0) * HALF_TURN
    coincide = rng.random(n_trials) < np.sin(rel) ** 2 / 2.0
    parity = s0 ^ s1
    return {p: (int(np.sum(parity == p)), int(np.sum(coincide & (parity == p)))) for p in (0, 1)}


# -- the attack ------------------------------------------------------------

class ImpersonationAttack:
    """Eve's behaviour for one round; plugs into ``channel.Line``."""

    def __init__(self, config: AttackConfig, encoding: str = "k3"):
        if config.variant is Variant.NONE:
            raise ParameterError("ImpersonationAttack needs an attack variant")
        self.config = config
        self.encoding = encoding
        self.state = EveState()

    def _own_pulse(self, angle: float) -> Pulse:
        cfg = self.config
        if cfg.variant is Variant.AS_SINGLE_PHOTON and not cfg.coherent_source:
            return FockPulse(cfg.eve_fock_n, angle)
        return CoherentPulse.at_angle(cfg.gamma, angle)

    def intercept_from_alice(self, pulses, rng):
        st = self.state
        st.e1 = tuple(pulses)
        u = rng.random(4)
        st.theta0p, st.theta1p, st.phip = float(u[0]) * math.pi, float(u[1]) * math.pi, float(u[2]) * math.pi
        st.s0p = int(u[3] < 0.5)
        return self._own_pulse(st.theta0p), self._own_pulse(st.theta1p)

    def intercept_from_bob(self, pulses, rng):
        st = self.state
        st.probe_ran = True
        if self.config.variant is Variant.AS_SINGLE_PHOTON:
            st.parity, st.e2 = as_single_photon(pulses, st, rng)
        else:
            st.parity, st.e2 = as_coherent(pulses, self.config, st, rng)
        if not st.conclusive:
            return VACUUM, VACUUM
        s1p = st.s0p ^ st.parity
        e1 = st.e1
        return (rotate(e1[0], st.phip + st.s0p * HALF_TURN),
                rotate(e1[1], st.phip + s1p * HALF_TURN))

    def intercept_final(self, pulse, rng):
        st = self.state
        if not st.conclusive:
            return VACUUM
        bit = measure_polarization(pulse, st.phip, rng).bit
        if bit is None or not st.e2 or is_vacuum(st.e2[0]):
            st.failed = True
            return VACUUM
        st.lp = bit
        # the forwarded rotation is l' xor s0' for either parity and encoding
        st.learned = bit ^ st.s0p
        return rotate(st.e2[0], -st.theta0p + st.learned * HALF_TURN)

    def announce_b(self, b: int) -> None:
        st = self.state
        if st.learned is None:
            return
        # learned = k xor b when (even parity, k3) or (odd parity, literal)
        needs_b = (st.parity == 0) == (self.encoding == "k3")
        st.key = st.learned ^ (b if needs_b else 0)

    def fill_transcript(self, tr: RoundTranscript) -> None:
        st = self.state
        tr.eve_attacked = True
        tr.eve_parity = st.parity
        tr.eve_key = st.key
        tr.eve_failed = st.failed
