"""Command-line entry point.

Subcommands: ``run``, ``sweep``, ``oracle`` and ``calibrate``. Options can also
come from a flat ``key = value`` file passed with ``--config``; keys are the
long option names with dashes or underscores (``eta2``, ``p_test``, ...).
Command-line flags override the file.

Exit codes: 0 ok, 1 configuration error, 2 runtime error, 3 protocol abort.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .adversary import AttackConfig, UnattainableRateError
from .analysis import Thresholds, honest_detection_rate, sweep, write_csv
from .experiment import (
    REFERENCE_DETECTION,
    ExperimentConfig,
    run_experiment,
    summary_json,
    transcript_csv,
)
from .fock import CapacityError, beamsplit_fock_oracle
from .kkkp import ProtocolParams
from .optics import FockPulse, ParameterError, hom_coincidence_prob

OUTPUT_DIR_ENV = "BLINDPOL_OUTPUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ABORT = 0, 1, 2, 3

log = logging.getLogger("blindpol")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def read_config_file(path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _experiment_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--protocol", choices=["kkkp", "w"], default="kkkp")
    p.add_argument("--alpha", type=float, default=2.83, help="Alice's pulse amplitude")
    p.add_argument("--eta2", type=float, default=0.5, help="intensity transmittance per pass")
    p.add_argument("--segments", type=int, default=3, help="number of lossy passes (0-3)")
    p.add_argument("--rounds", type=int, default=10_000)
    p.add_argument("--p-test", type=float, default=0.5, help="Protocol W test-round probability")
    p.add_argument("--encoding", choices=["k3", "literal"], default="k3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attack", choices=["none", "as-single-photon", "as-coherent"], default="none")
    p.add_argument("--gamma", type=float, default=4.0, help="Eve's pulse amplitude")
    p.add_argument("--r2", type=float, default=0.1, help="intensity reflectivity of Eve's tap")
    p.add_argument("--tune-gamma", type=_bool, nargs="?", const=True, default=False,
                   help="tune gamma so Bob's rate matches the honest rate")
    p.add_argument("--success-model", choices=["closed-form", "physical"], default="closed-form")
    p.add_argument("--eve-fock-n", type=int, default=2)
    p.add_argument("--coherent-source", type=_bool, nargs="?", const=True, default=False,
                   help="single-photon probe with coherent pulses of amplitude gamma")
    p.add_argument("--w7-fraction", type=float, default=0.2)
    p.add_argument("--rate-z", type=float, default=5.0, help="rate anomaly threshold in sigma")
    p.add_argument("--blocked-check", type=_bool, default=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=None, help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blindpol", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one seeded experiment")
    _experiment_options(run)
    run.add_argument("--transcript", help="transcript CSV path (default <out-dir>/transcript.csv)")
    run.add_argument("--summary", help="summary JSON path (default <out-dir>/summary.json)")
    run.add_argument("--no-transcript", action="store_true")

    sw = sub.add_parser("sweep", help="run the experiment over a parameter grid")
    _experiment_options(sw)
    sw.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...",
                    help="grid axis; repeat for a Cartesian product")
    sw.add_argument("--out", help="sweep CSV path (default <out-dir>/sweep.csv)")

    orc = sub.add_parser("oracle", help="exact Fock-state beamsplitter distribution")
    orc.add_argument("--n", type=int, default=1, help="photons in input port 1")
    orc.add_argument("--m", type=int, default=1, help="photons in input port 2")
    orc.add_argument("--delta-pol", type=float, default=0.0, help="polarization difference (radians)")
    orc.add_argument("--degrees", action="store_true", help="read --delta-pol in degrees")
    orc.add_argument("--r2", type=float, default=0.5, help="intensity reflectivity")

    cal = sub.add_parser("calibrate", help="honest detection benchmark")
    cal.add_argument("--config")
    cal.add_argument("--alpha", type=float, default=2.83)
    cal.add_argument("--eta2", type=float, default=0.5)
    cal.add_argument("--segments", type=int, default=3)
    cal.add_argument("--rounds", type=int, default=0, help="Monte-Carlo rounds (0: closed form only)")
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--workers", type=int, default=1)
    cal.add_argument("--out-dir", default=None)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            file_values = read_config_file(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(file_values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        # re-parse so flags given on the command line win over file values
        sub.set_defaults(**{k: _coerce(sub, k, v) for k, v in file_values.items()})
        args = parser.parse_args(argv)
    return args


def _coerce(sub: argparse.ArgumentParser, dest: str, value: str):
    for action in sub._actions:
        if action.dest == dest:
            if action.type is not None:
                return action.type(value)
            if isinstance(action, argparse._StoreTrueAction):
                return _bool(value)
            return value
    return value


def config_from_args(args) -> ExperimentConfig:
    params = ProtocolParams(alpha=args.alpha, eta_sq=args.eta2, segments=args.segments,
                           rounds=args.rounds, p_test=args.p_test, encoding=args.encoding)
    if not 0.0 <= args.r2 <= 1.0:
        raise ParameterError(f"r2 must lie in [0, 1], got {args.r2}")
    attack = AttackConfig(variant=args.attack, gamma=args.gamma, r_amp=math.sqrt(args.r2),
                          success_model=args.success_model, eve_fock_n=args.eve_fock_n,
                          coherent_source=args.coherent_source)
    return ExperimentConfig(protocol=args.protocol, params=params, attack=attack, seed=args.seed,
                            tune_gamma=args.tune_gamma, w7_fraction=args.w7_fraction,
                            thresholds=Thresholds(rate_z=args.rate_z),
                            blocked_check=args.blocked_check, workers=args.workers)


def output_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _table(rows: list[tuple[str, str]]) -> str:
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"  {k:<{width}}  {v}" for k, v in rows)


def format_report(result) -> str:
    st, att, cfg = result.stats, result.attack, result.config
    rows = [
        ("protocol", cfg.protocol),
        ("rounds", str(st.rounds_total)),
        ("attack", att.variant.value),
    ]
    if att.variant.value == "as-coherent":
        rows += [("gamma" + (" (tuned)" if cfg.tune_gamma else ""), f"{att.gamma:.6f}"),
                 ("tap r^2", f"{att.r_amp ** 2:.4f}")]
    rows += [
        ("Bob detection rate", f"{st.bob_detection_rate:.4f} +/- {st.bob_detection_se:.4f}"),
        ("honest benchmark", f"{result.benchmark:.4f} (reference {REFERENCE_DETECTION:.3f})"),
        ("key rounds", str(st.key_rounds)),
        ("QBER", f"{st.qber:.4f}"),
    ]
    if st.eve_rounds:
        rows += [("conclusive rate", f"{st.conclusive_rate:.4f} +/- {st.conclusive_se:.4f}"),
                 ("parity errors", str(st.parity_errors)),
                 ("Eve knowledge", f"{st.eve_knowledge_fraction:.4f}")]
    if result.w6 is not None:
        rows += [("W6 considered / double clicks", f"{result.w6.considered} / {result.w6.double_clicks}"),
                 ("W6 verdict", result.w6.verdict.value)]
    if result.w7 is not None:
        rows += [("W7 compared / mismatches", f"{result.w7.compared} / {result.w7.mismatches}")]
    rows += [("rate z-score", f"{result.verdict.rate_z:.2f}"),
             ("flags", ", ".join(result.verdict.flags) or "none"),
             ("abort", "yes" if st.abort else "no")]
    return _table(rows)


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    result = run_experiment(cfg)
    out = output_dir(args)
    summary_path = Path(args.summary) if args.summary else out / "summary.json"
    summary_path.write_text(summary_json(result))
    if not args.no_transcript:
        transcript_path = Path(args.transcript) if args.transcript else out / "transcript.csv"
        transcript_path.write_text(transcript_csv(result))
    print(format_report(result))
    return EXIT_ABORT if result.stats.abort else EXIT_OK


def _parse_grid(axes: list[str]) -> dict[str, list[str]]:
    grid = {}
    for axis in axes:
        if "=" not in axis:
            raise ConfigError(f"grid axis must look like key=v1,v2: {axis!r}")
        key, values = axis.split("=", 1)
        grid[key.strip().replace("-", "_")] = [v.strip() for v in values.split(",") if v.strip()]
    if not grid:
        raise ConfigError("sweep needs at least one --grid axis")
    return grid


def cmd_sweep(args) -> int:
    grid = _parse_grid(args.grid)
    if "eta2" in grid:
        grid["eta_sq"] = grid.pop("eta2")
    cfg = config_from_args(args)
    try:
        rows = sweep(grid, cfg)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    path = Path(args.out) if args.out else output_dir(args) / "sweep.csv"
    write_csv(rows, path)
    keys = list(grid)
    for row in rows:
        point = ", ".join(f"{k}={row[k]}" for k in keys)
        print(f"  {point}: detection {row['bob_detection_rate']:.4f}, "
              f"closed-form P_B {row['p_bob_formula']:.4f}, conclusive {row['conclusive_rate']:.4f}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    delta = math.radians(args.delta_pol) if args.degrees else args.delta_pol
    if not 0.0 <= args.r2 <= 1.0:
        raise ParameterError(f"r2 must lie in [0, 1], got {args.r2}")
    dist = beamsplit_fock_oracle(FockPulse(args.n, 0.0), FockPulse(args.m, delta), math.sqrt(args.r2))
    print(f"inputs |{args.n}>, |{args.m}>, polarization difference {delta:.6f} rad, r^2 = {args.r2}")
    for (a, b), p in sorted(dist.items()):
        print(f"  ({a}, {b})  {p:.12f}")
    both = sum(p for (a, b), p in dist.items() if a and b)
    print(f"  P(both ports occupied) = {both:.12f}")
    if args.n == 1 and args.m == 1 and abs(args.r2 - 0.5) < 1e-12:
        print(f"  closed-form coincidence = {hom_coincidence_prob(delta):.12f}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    closed = honest_detection_rate(args.alpha, args.eta2, args.segments)
    report = {"alpha": args.alpha, "eta2": args.eta2, "segments": args.segments,
              "mean_photons_at_bob": args.alpha ** 2 * args.eta2 ** args.segments,
              "honest_detection": closed, "reference_detection": REFERENCE_DETECTION}
    print(f"  closed-form honest detection: {closed:.6f} (reference {REFERENCE_DETECTION:.3f})")
    if args.rounds > 0:
        params = ProtocolParams(alpha=args.alpha, eta_sq=args.eta2, segments=args.segments, rounds=args.rounds)
        result = run_experiment(ExperimentConfig(params=params, seed=args.seed, workers=args.workers))
        st = result.stats
        report.update(mc_detection=st.bob_detection_rate, mc_se=st.bob_detection_se, rounds=args.rounds,
                      seed=args.seed)
        print(f"  Monte-Carlo detection: {st.bob_detection_rate:.6f} +/- {st.bob_detection_se:.6f}")
    out = output_dir(args) / "calibration.json"
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "oracle": cmd_oracle, "calibrate": cmd_calibrate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"blindpol: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError, CapacityError, argparse.ArgumentTypeError) as exc:
        print(f"blindpol: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnattainableRateError as exc:
        print(f"blindpol: gamma tuning failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled error", exc_info=True)
        print(f"blindpol: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
