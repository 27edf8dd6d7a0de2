"""Seeded experiment execution and report serialization."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

from . import kkkp, protocol_w
from .adversary import (
    AttackConfig,
    ImpersonationAttack,
    SuccessModel,
    Variant,
    p_bob,
    p_success,
    tune_gamma,
)
from .analysis import (
    AttackVerdict,
    ExperimentStats,
    Thresholds,
    aggregate,
    detect_attack,
    honest_detection_rate,
    with_verdicts,
)
from .kkkp import Disposition, ProtocolParams, RoundTranscript
from .optics import ParameterError
from .protocol_w import W6Result, W7Result, w6_verdict, w7_compare
from .rng import POSTPROCESS, RoundStreams, stream

SUMMARY_SCHEMA = "blindpol.summary/1"
TRANSCRIPT_SCHEMA = "blindpol.transcript/1"
PROTOCOLS = ("kkkp", "w")
CHUNK = 1024

# Bob's detection rate quoted for alpha = 2.83 and eta^2 = 0.5 per pass
REFERENCE_DETECTION = 0.635


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str = "kkkp"
    params: ProtocolParams = field(default_factory=ProtocolParams)
    attack: AttackConfig = field(default_factory=AttackConfig)
    seed: int = 0
    tune_gamma: bool = False
    w7_fraction: float = 0.2
    thresholds: Thresholds = field(default_factory=Thresholds)
    blocked_check: bool = True
    force_delta: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ParameterError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if not 0.0 <= self.w7_fraction <= 1.0:
            raise ParameterError(f"w7_fraction must lie in [0, 1], got {self.w7_fraction}")
        if self.force_delta not in (None, 0, 1):
            raise ParameterError(f"force_delta must be 0, 1 or unset, got {self.force_delta}")
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    attack: AttackConfig
    benchmark: float
    transcripts: list[RoundTranscript]
    stats: ExperimentStats
    verdict: AttackVerdict
    w6: Optional[W6Result] = None
    w7: Optional[W7Result] = None

    @property
    def exit_status(self) -> int:
        return 3 if self.stats.abort else 0


def effective_attack(cfg: ExperimentConfig) -> AttackConfig:
    """Attack config after optional amplitude tuning to the honest rate."""
    att = cfg.attack
    if cfg.tune_gamma and att.variant is Variant.AS_COHERENT:
        p = cfg.params
        target = honest_detection_rate(p.alpha, p.eta_sq, p.segments)
        att = replace(att, gamma=tune_gamma(target, att.r_amp, att.success_model))
    return att


def _run_chunk(cfg: ExperimentConfig, attack: AttackConfig, start: int, stop: int) -> list[RoundTranscript]:
    out = []
    p = cfg.params
    attacked = attack.variant is not Variant.NONE
    streams = RoundStreams(cfg.seed)
    for i in range(start, stop):
        rng = streams.for_round(i)
        eve = ImpersonationAttack(attack, p.encoding) if attacked else None
        if cfg.protocol == "kkkp":
            out.append(kkkp.run_round(i, p, rng, eve))
        else:
            out.append(protocol_w.run_round(i, p, rng, eve, cfg.force_delta, cfg.blocked_check))
    return out


def run_rounds(cfg: ExperimentConfig, attack: AttackConfig | None = None) -> list[RoundTranscript]:
    attack = attack or effective_attack(cfg)
    n = cfg.params.rounds
    bounds = [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]
    if cfg.workers == 1:
        parts = [_run_chunk(cfg, attack, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda ab: _run_chunk(cfg, attack, *ab), bounds))
    return [tr for part in parts for tr in part]


def kept_keys(transcripts) -> tuple[list[int], list[int]]:
    kept = [tr for tr in transcripts if tr.disposition is Disposition.KEY]
    return [tr.secrets.k for tr in kept], [tr.bob_key for tr in kept]


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    attack = effective_attack(cfg)
    transcripts = run_rounds(cfg, attack)
    p = cfg.params
    benchmark = honest_detection_rate(p.alpha, p.eta_sq, p.segments)
    w6 = w7 = None
    if cfg.protocol == "w":
        w6 = w6_verdict([tr.test for tr in transcripts if tr.test is not None])
        alice_key, bob_key = kept_keys(transcripts)
        w7 = w7_compare(alice_key, bob_key, cfg.w7_fraction, stream(cfg.seed, 0, POSTPROCESS))
    stats = with_verdicts(aggregate(transcripts), w6, w7, cfg.thresholds)
    verdict = detect_attack(stats, benchmark, cfg.thresholds)
    return ExperimentResult(cfg, attack, benchmark, transcripts, stats, verdict, w6, w7)


# -- reports ---------------------------------------------------------------

KKKP_COLUMNS = ["round", "theta0", "theta1", "phi", "s0", "s1", "k", "b", "blocked_click",
                "outcome", "disposition", "bob_key", "eve_parity", "eve_key", "eve_failed"]
W_COLUMNS = KKKP_COLUMNS[:8] + ["delta", "Delta", "omega", "is_test"] + KKKP_COLUMNS[8:11] + \
    ["test_pattern", "considered"] + KKKP_COLUMNS[11:]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def transcript_row(tr: RoundTranscript) -> dict:
    s = tr.secrets
    row = {
        "round": tr.index, "theta0": s.theta0, "theta1": s.theta1, "phi": s.phi,
        "s0": s.s0, "s1": s.s1, "k": s.k, "b": s.b,
        "blocked_click": tr.blocked_click if tr.bob_measured else None,
        "outcome": tr.outcome if tr.bob_measured else None,
        "disposition": tr.disposition, "bob_key": tr.bob_key,
        "eve_parity": ("inconclusive" if tr.eve_parity is None else tr.eve_parity) if tr.eve_attacked else None,
        "eve_key": tr.eve_key, "eve_failed": tr.eve_failed if tr.eve_attacked else None,
    }
    if isinstance(tr, protocol_w.WRoundTranscript):
        row.update(delta=s.delta, Delta=s.Delta, omega=s.omega, is_test=s.is_test,
                   test_pattern=tr.test.pattern if tr.test else None,
                   considered=tr.test.considered if tr.test else None)
    return row


def transcript_csv(result: ExperimentResult) -> str:
    columns = W_COLUMNS if result.config.protocol == "w" else KKKP_COLUMNS
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for tr in result.transcripts:
        row = transcript_row(tr)
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "value") and not isinstance(obj, (int, float)):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def summary(result: ExperimentResult) -> dict:
    cfg, att, st = result.config, result.attack, result.stats
    out = {
        "schema": SUMMARY_SCHEMA,
        "protocol": cfg.protocol,
        "seed": cfg.seed,
        "params": asdict(cfg.params),
        "run": {"tune_gamma": cfg.tune_gamma, "w7_fraction": cfg.w7_fraction,
                "blocked_check": cfg.blocked_check, "force_delta": cfg.force_delta,
                "thresholds": asdict(cfg.thresholds)},
        "benchmarks": {"honest_detection": result.benchmark, "reference_detection": REFERENCE_DETECTION},
        "attack": {
            **asdict(att),
            "t_amp": att.t_amp,
            "p_success_closed_form": p_success(att.gamma, att.r_amp, SuccessModel.CLOSED_FORM),
            "p_success_physical": p_success(att.gamma, att.r_amp, SuccessModel.PHYSICAL),
            "p_bob_closed_form": p_bob(att.gamma, att.r_amp, SuccessModel.CLOSED_FORM),
            "p_bob_physical": p_bob(att.gamma, att.r_amp, SuccessModel.PHYSICAL),
            "conclusive_rate": st.conclusive_rate,
            "bob_arrival_rate": st.bob_detection_rate,
            "eve_knowledge_fraction": st.eve_knowledge_fraction,
            "qber": st.qber,
        },
        "stats": st.to_dict(),
        "verdict": {**result.verdict.to_dict(), "abort": st.abort},
    }
    if result.w6 is not None:
        w6 = result.w6
        out["w6"] = {"verdict": w6.verdict, "tests": w6.tests, "considered": w6.considered,
                     "double_clicks": w6.double_clicks, "vacuous": w6.vacuous}
    if result.w7 is not None:
        w7 = result.w7
        out["w7"] = {"compared": w7.compared, "mismatches": w7.mismatches,
                     "mismatch_rate": w7.mismatch_rate, "final_key_length": len(w7.alice_key)}
    return _jsonable(out)


def summary_json(result: ExperimentResult) -> str:
    return json.dumps(summary(result), indent=2, sort_keys=True) + "\n"
