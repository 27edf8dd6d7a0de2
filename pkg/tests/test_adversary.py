import math

import numpy as np
import pytest
from scipy.optimize import brentq

from blindpol import adversary
from blindpol.adversary import (
    AttackConfig,
    EveState,
    ImpersonationAttack,
    SuccessModel,
    UnattainableRateError,
    Variant,
    as_coherent,
    as_single_photon,
    branch_mean_photons,
    extract_and_interfere,
    p_bob,
    p_success,
    probe_coincidences,
    tune_gamma,
)
from blindpol.experiment import ExperimentConfig, run_experiment
from blindpol.kkkp import Disposition, ProtocolParams, alice_encode_block, alice_prepare, bob_decode, bob_shuffle
from blindpol.optics import CoherentPulse, FockPulse, Outcome, ParameterError

R_AMP = math.sqrt(0.1)


class TestClosedForms:
    def test_unit_argument(self):
        assert p_success(1 / R_AMP, R_AMP) == pytest.approx((1 - math.exp(-1)) ** 2, rel=1e-14)
        assert p_success(0.0, R_AMP) == 0.0

    def test_physical_halves_branch_photons(self):
        assert branch_mean_photons(3.0, 0.5, SuccessModel.PHYSICAL) == pytest.approx(
            branch_mean_photons(3.0, 0.5) / 2)
        assert p_success(1 / R_AMP, R_AMP, SuccessModel.PHYSICAL) == pytest.approx((1 - math.exp(-0.5)) ** 2)

    def test_p_bob_monotone_in_gamma(self):
        values = [p_bob(g, R_AMP) for g in np.linspace(0, 12, 200)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_p_bob_vanishes_as_tap_takes_everything(self):
        values = [p_bob(4.0, math.sqrt(r2)) for r2 in (0.9, 0.99, 0.999, 1.0)]
        assert values[-1] == 0.0 and all(b < a for a, b in zip(values, values[1:]))


class TestTuneGamma:
    def test_reference_point(self):
        assert tune_gamma(0.635, R_AMP) == pytest.approx(4.0, abs=0.02)

    @pytest.mark.parametrize("model", list(SuccessModel))
    @pytest.mark.parametrize("target", [0.05, 0.3, 0.632, 0.9, 0.999])
    @pytest.mark.parametrize("r2", [0.05, 0.1, 0.5])
    def test_matches_brentq(self, target, r2, model):
        r = math.sqrt(r2)
        g = tune_gamma(target, r, model)
        ref = brentq(lambda x: p_bob(x, r, model) - target, 1e-6, 1e3, xtol=1e-14)
        assert g == pytest.approx(ref, rel=1e-8)
        assert abs(p_bob(g, r, model) - target) <= 1e-9

    def test_zero_target(self):
        assert tune_gamma(0.0, R_AMP) == 0.0

    def test_near_one_attainable(self):
        g = tune_gamma(0.9999, math.sqrt(0.5))
        assert p_bob(g, math.sqrt(0.5)) == pytest.approx(0.9999, abs=1e-9)

    @pytest.mark.parametrize("target, r", [(1.0, R_AMP), (0.5, 0.0), (0.5, 1.0)])
    def test_unattainable(self, target, r):
        with pytest.raises(UnattainableRateError):
            tune_gamma(target, r)


def _bob_returns(eve_pulses, rng):
    phi = rng.random() * math.pi
    s0, s1 = (int(x) for x in rng.integers(0, 2, 2))
    return bob_shuffle(eve_pulses, phi, s0, s1), s0 ^ s1


def _eve_state(rng):
    return EveState(theta0p=rng.random() * math.pi, theta1p=rng.random() * math.pi)


class TestSinglePhotonProbe:
    def test_conclusive_quarter_and_always_right(self, rng):
        n = 40_000
        conclusive = errors = 0
        for _ in range(n):
            st = _eve_state(rng)
            returned, parity = _bob_returns((FockPulse(2, st.theta0p), FockPulse(2, st.theta1p)), rng)
            guess, remaining = as_single_photon(returned, st, rng)
            if guess is not None:
                conclusive += 1
                errors += guess != parity
                assert remaining[0].n == 1 and remaining[1].n == 1
        assert errors == 0
        assert abs(conclusive / n - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / n)

    def test_coherent_source_is_worse(self, rng):
        n = 20_000
        conclusive = 0
        for _ in range(n):
            st = _eve_state(rng)
            pulses = (CoherentPulse.at_angle(math.sqrt(2), st.theta0p), CoherentPulse.at_angle(math.sqrt(2), st.theta1p))
            returned, _ = _bob_returns(pulses, rng)
            conclusive += as_single_photon(returned, st, rng)[0] is not None
        rate = conclusive / n
        assert rate < 0.25 - 5 * math.sqrt(0.25 * 0.75 / n)
        assert rate == pytest.approx(0.25 * (1 - math.exp(-2)) ** 2, abs=0.015)

    def test_empty_pulse_inconclusive(self, rng):
        st = EveState()
        assert extract_and_interfere((FockPulse(0), FockPulse(1)), st, (0.0, 0.0), rng)[0] is None

    def test_vectorized_probe_matches_scalar_on_lattice(self, rng):
        vec = probe_coincidences(0.0, 0.0, 40_000, rng, quarter_shuffle=False)
        assert vec[0][1] == 0
        vec_rate = vec[1][1] / vec[1][0]
        hits = trials = 0
        for _ in range(20_000):
            st = _eve_state(rng)
            returned, parity = _bob_returns((FockPulse(1, st.theta0p), FockPulse(1, st.theta1p)), rng)
            coincidence, _ = extract_and_interfere(returned, st, (0.0, 0.0), rng)
            if parity == 0:
                assert not coincidence
            else:
                trials += 1
                hits += coincidence
        for rate, n in ((vec_rate, vec[1][0]), (hits / trials, trials)):
            assert abs(rate - 0.5) <= 3 * math.sqrt(0.25 / n)

    def test_quarter_shuffle_hides_parity(self, rng):
        vec = probe_coincidences(0.0, 0.0, 40_000, rng, quarter_shuffle=True)
        rates = [vec[p][1] / vec[p][0] for p in (0, 1)]
        assert rates == pytest.approx([0.125, 0.375], abs=0.01)


class TestCoherentProbe:
    def _rate(self, model, rng, n=20_000):
        cfg = AttackConfig(variant="as-coherent", gamma=1 / R_AMP, r_amp=R_AMP, success_model=model)
        conclusive = errors = 0
        for _ in range(n):
            st = _eve_state(rng)
            pulses = (CoherentPulse.at_angle(cfg.gamma, st.theta0p), CoherentPulse.at_angle(cfg.gamma, st.theta1p))
            returned, parity = _bob_returns(pulses, rng)
            guess, stored = as_coherent(returned, cfg, st, rng)
            assert stored[0].mean_photons == pytest.approx(cfg.t_amp ** 2 * cfg.gamma ** 2)
            if guess is not None:
                conclusive += 1
                errors += guess != parity
        return conclusive / n, errors

    def test_closed_form_model(self, rng):
        rate, errors = self._rate(SuccessModel.CLOSED_FORM, rng)
        p = (1 - math.exp(-1)) ** 2
        assert errors == 0 and abs(rate - p) <= 3 * math.sqrt(p * (1 - p) / 20_000)

    def test_physical_model_discrepancy(self, rng):
        rate, errors = self._rate(SuccessModel.PHYSICAL, rng)
        p = (1 - math.exp(-0.5)) ** 2
        assert errors == 0 and abs(rate - p) <= 3 * math.sqrt(p * (1 - p) / 20_000)
        assert rate < p_success(1 / R_AMP, R_AMP) - 0.2

    def test_zero_gamma_never_conclusive(self, rng):
        cfg = AttackConfig(variant="as-coherent", gamma=0.0)
        st = EveState()
        assert all(as_coherent((CoherentPulse(), CoherentPulse()), cfg, st, rng)[0] is None for _ in range(100))


def _forced_round(monkeypatch, rng, encoding, parity_bits, k, b, s0p):
    """One lossless attacked round with the parity probe replaced by the truth."""
    s0, s1 = parity_bits
    monkeypatch.setattr(adversary, "as_coherent",
                        lambda pulses, cfg, st, rng: (s0 ^ s1, tuple(p.scaled(cfg.t_amp) for p in pulses)))
    eve = ImpersonationAttack(AttackConfig(variant="as-coherent", gamma=6.0), encoding)
    theta0, theta1, phi = rng.random(3) * math.pi
    own = eve.intercept_from_alice(alice_prepare(2.83, theta0, theta1), rng)
    eve.state.s0p = s0p
    back = eve.intercept_from_bob(bob_shuffle(own, phi, s0, s1), rng)
    survivor, _ = alice_encode_block(back, theta0, theta1, k, b, rng, encoding)
    to_bob = eve.intercept_final(survivor, rng)
    bob = bob_decode(to_bob, phi, s0, s1, b, rng, encoding)
    eve.announce_b(b)
    return eve.state, bob


def test_parity_zero_example(monkeypatch, rng):
    st, (_, disp, bob_key) = _forced_round(monkeypatch, rng, "k3", (1, 1), k=1, b=0, s0p=1)
    assert st.lp == 0 and st.key == 1
    assert disp is Disposition.KEY and bob_key == 1


@pytest.mark.parametrize("encoding", ["k3", "literal"])
def test_eve_algebra_exhaustive(monkeypatch, rng, encoding):
    for bits in range(32):
        s0, s1, k, b, s0p = ((bits >> i) & 1 for i in range(5))
        for _ in range(5):
            st, (_, disp, bob_key) = _forced_round(monkeypatch, rng, encoding, (s0, s1), k, b, s0p)
            needs_b = ((s0 ^ s1) == 0) == (encoding == "k3")
            assert st.learned == k ^ (b if needs_b else 0)
            assert st.key == k
            if disp is Disposition.KEY:
                assert bob_key == k


@pytest.mark.parametrize("encoding", ["k3", "literal"])
def test_full_attack_lossless(encoding):
    attack = AttackConfig(variant="as-coherent", gamma=5.0)
    params = ProtocolParams(segments=0, rounds=3000, encoding=encoding)
    st = run_experiment(ExperimentConfig(params=params, attack=attack, seed=8)).stats
    assert st.key_rounds > 1000 and st.qber == 0.0
    assert st.eve_knowledge_fraction == 1.0 and st.parity_errors == 0


def test_inconclusive_rounds_send_vacuum():
    params = ProtocolParams(rounds=2000)
    result = run_experiment(ExperimentConfig(params=params, attack=AttackConfig(variant="as-single-photon"), seed=4))
    for tr in result.transcripts:
        if tr.eve_parity is None:
            assert tr.outcome is Outcome.NONE and tr.eve_key is None
    assert result.stats.bob_detection_rate <= result.stats.conclusive_rate


def test_config_validation():
    with pytest.raises(ParameterError):
        AttackConfig(r_amp=1.5)
    with pytest.raises(ParameterError):
        AttackConfig(gamma=-1.0)
    with pytest.raises(ValueError):
        AttackConfig(variant="bogus")
    with pytest.raises(ParameterError):
        ImpersonationAttack(AttackConfig(variant=Variant.NONE))
    assert AttackConfig(r_amp=0.6).t_amp == pytest.approx(0.8)
