"""Aggregate statistics, attack verdicts and parameter sweeps."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .kkkp import Disposition, RoundTranscript
from .protocol_w import ClickPattern, Verdict, W6Result, W7Result

RATE_ANOMALY = "RATE_ANOMALY"
W6_ABORT = "W6_ABORT"
W7_ABORT = "W7_ABORT"


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n) if n else 0.0


def honest_detection_rate(alpha: float, eta_sq: float, segments: int = 3) -> float:
    """Bob's click probability with no adversary: 1 - exp(-alpha^2 eta^(2 segments))."""
    return -math.expm1(-(alpha ** 2) * eta_sq ** segments)


def _rate(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass
class ExperimentStats:
    empty: bool = False
    rounds_total: int = 0
    bob_rounds: int = 0
    bob_detections: int = 0
    key_rounds: int = 0
    key_errors: int = 0
    invalid_rounds: int = 0
    misaligned_rounds: int = 0
    eve_rounds: int = 0
    conclusive: int = 0
    eve_failed: int = 0
    eve_keyed: int = 0
    eve_correct: int = 0
    parity_checked: int = 0
    parity_errors: int = 0
    w6_tests: int = 0
    w6_considered: int = 0
    w6_double_clicks: int = 0
    w7_compared: int = 0
    w7_mismatches: int = 0
    abort: bool = False

    @property
    def bob_detection_rate(self) -> float:
        return _rate(self.bob_detections, self.bob_rounds)

    @property
    def bob_detection_se(self) -> float:
        return binomial_se(self.bob_detection_rate, self.bob_rounds)

    @property
    def key_fraction(self) -> float:
        return _rate(self.key_rounds, self.rounds_total)

    @property
    def qber(self) -> float:
        return _rate(self.key_errors, self.key_rounds)

    @property
    def qber_se(self) -> float:
        return binomial_se(self.qber, self.key_rounds)

    @property
    def eve_knowledge_fraction(self) -> float:
        """Share of kept key bits Eve guessed correctly (0 when she never attacked)."""
        return _rate(self.eve_correct, self.key_rounds) if self.eve_rounds else 0.0

    @property
    def conclusive_rate(self) -> float:
        return _rate(self.conclusive, self.eve_rounds)

    @property
    def conclusive_se(self) -> float:
        return binomial_se(self.conclusive_rate, self.eve_rounds)

    @property
    def w6_double_click_rate(self) -> float:
        return _rate(self.w6_double_clicks, self.w6_considered)

    @property
    def w7_mismatch_rate(self) -> float:
        return _rate(self.w7_mismatches, self.w7_compared)

    def to_dict(self) -> dict:
        out = asdict(self)
        for name in ("bob_detection_rate", "bob_detection_se", "key_fraction", "qber", "qber_se",
                     "eve_knowledge_fraction", "conclusive_rate", "conclusive_se",
                     "w6_double_click_rate", "w7_mismatch_rate"):
            out[name] = getattr(self, name)
        return out


def aggregate(transcripts: Iterable[RoundTranscript]) -> ExperimentStats:
    """Fold transcripts into counters; the result does not depend on order."""
    st = ExperimentStats()
    for tr in transcripts:
        st.rounds_total += 1
        if tr.bob_measured:
            st.bob_rounds += 1
            st.bob_detections += tr.bob_clicked
        d = tr.disposition
        if d is Disposition.INVALID:
            st.invalid_rounds += 1
        elif d is Disposition.DISCARD_MISALIGNED:
            st.misaligned_rounds += 1
        elif d is Disposition.KEY:
            st.key_rounds += 1
            st.key_errors += tr.bob_key != tr.secrets.k
            if tr.eve_key is not None:
                st.eve_keyed += 1
                st.eve_correct += tr.eve_key == tr.secrets.k
        if tr.eve_attacked:
            st.eve_rounds += 1
            st.eve_failed += tr.eve_failed
            if tr.eve_parity is not None:
                st.conclusive += 1
                st.parity_checked += 1
                st.parity_errors += tr.eve_parity != tr.secrets.parity
        test = getattr(tr, "test", None)
        if test is not None:
            st.w6_tests += 1
            if test.considered:
                st.w6_considered += 1
                st.w6_double_clicks += test.pattern is ClickPattern.BOTH_PORTS
    st.empty = st.rounds_total == 0
    return st


@dataclass
class Thresholds:
    rate_z: float = 5.0
    w7_max_mismatch_rate: float = 0.0


def with_verdicts(stats: ExperimentStats, w6: Optional[W6Result], w7: Optional[W7Result],
                  thresholds: Thresholds | None = None) -> ExperimentStats:
    """Copy of ``stats`` with the W6/W7 outcomes folded in."""
    th = thresholds or Thresholds()
    st = replace(stats)
    if w7 is not None:
        st.w7_compared, st.w7_mismatches = w7.compared, w7.mismatches
    w6_abort = w6 is not None and w6.verdict is Verdict.ABORT
    w7_abort = w7 is not None and w7.compared > 0 and w7.mismatch_rate > th.w7_max_mismatch_rate
    st.abort = bool(w6_abort or w7_abort)
    return st


@dataclass
class AttackVerdict:
    flags: list[str] = field(default_factory=list)
    rate_z: float = 0.0
    benchmark: float = 0.0

    @property
    def attack_detected(self) -> bool:
        return bool(self.flags)

    def to_dict(self) -> dict:
        return {"flags": list(self.flags), "rate_z": self.rate_z, "benchmark": self.benchmark}


def detect_attack(stats: ExperimentStats, honest_benchmark: float,
                  thresholds: Thresholds | None = None) -> AttackVerdict:
    th = thresholds or Thresholds()
    verdict = AttackVerdict(benchmark=honest_benchmark)
    se = binomial_se(honest_benchmark, stats.bob_rounds)
    if stats.bob_rounds and se > 0:
        verdict.rate_z = (stats.bob_detection_rate - honest_benchmark) / se
        if abs(verdict.rate_z) > th.rate_z:
            verdict.flags.append(RATE_ANOMALY)
    elif stats.bob_rounds and stats.bob_detection_rate != honest_benchmark:
        verdict.rate_z = math.inf
        verdict.flags.append(RATE_ANOMALY)
    if stats.w6_double_clicks:
        verdict.flags.append(W6_ABORT)
    if stats.w7_compared and stats.w7_mismatch_rate > th.w7_max_mismatch_rate:
        verdict.flags.append(W7_ABORT)
    return verdict


# -- sweeps ----------------------------------------------------------------

SWEEP_KEYS = ("alpha", "eta_sq", "segments", "rounds", "p_test", "gamma", "r_amp", "r2", "eve_fock_n")


def _apply(template, key: str, value):
    if key in ("alpha", "eta_sq", "segments", "rounds", "p_test"):
        value = int(value) if key in ("segments", "rounds") else float(value)
        return replace(template, params=replace(template.params, **{key: value}))
    if key == "r2":
        return replace(template, attack=replace(template.attack, r_amp=math.sqrt(float(value))))
    if key in ("gamma", "r_amp"):
        return replace(template, attack=replace(template.attack, **{key: float(value)}))
    if key == "eve_fock_n":
        return replace(template, attack=replace(template.attack, eve_fock_n=int(value)))
    raise KeyError(f"cannot sweep {key!r}; choose from {SWEEP_KEYS}")


def sweep(param_grid: dict[str, Sequence], experiment_template, runner=None) -> list[dict]:
    """Run the template at every point of the Cartesian grid.

    Each row carries the grid values, Monte-Carlo rates with standard errors
    and the closed-form columns for the same point.
    """
    from .adversary import p_bob, p_success
    from .experiment import run_experiment

    runner = runner or run_experiment
    keys = list(param_grid)
    rows = []
    for values in itertools.product(*(param_grid[k] for k in keys)):
        cfg = experiment_template
        for k, v in zip(keys, values):
            cfg = _apply(cfg, k, v)
        result = runner(cfg)
        st = result.stats
        p, a = cfg.params, result.attack
        row = dict(zip(keys, values))
        row.update(
            gamma_used=a.gamma,
            r_amp=a.r_amp,
            honest_detection=honest_detection_rate(p.alpha, p.eta_sq, p.segments),
            p_success_formula=p_success(a.gamma, a.r_amp, a.success_model),
            p_bob_formula=p_bob(a.gamma, a.r_amp, a.success_model),
            bob_detection_rate=st.bob_detection_rate,
            bob_detection_se=st.bob_detection_se,
            conclusive_rate=st.conclusive_rate,
            conclusive_se=st.conclusive_se,
            qber=st.qber,
            eve_knowledge_fraction=st.eve_knowledge_fraction,
            abort=st.abort,
        )
        rows.append(row)
    return rows


def write_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
