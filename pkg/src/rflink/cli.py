"""Command-line interface.

Subcommands: simulate, sweep, tune, calibrate, export-pwl.
Exit codes: 0 success, 2 config error, 3 infeasible target, 4 I/O error.
All data outputs are deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as rfio
from . import metrics, rfchain, tuner
from .errors import (
    CalibrationInfeasible,
    IoError,
    NoFeasibleSetting,
    ParseError,
    RfLinkError,
    ValidationError,
)
from .scenario import Scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _load_scenario(args) -> Scenario:
    scenario = rfio.load_scenario(args.scenario)
    if getattr(args, "packets", None):
        scenario = scenario.with_packets(args.packets)
    return scenario


def _seed(args, scenario: Scenario) -> int:
    return args.seed if args.seed is not None else scenario.seed


def _table(args) -> rfchain.LnaBiasTable:
    if getattr(args, "table", None):
        return rfio.load_lna_table(args.table)
    return rfchain.DEFAULT_LNA_TABLE


def _parse_bias_list(raw: str) -> list[float]:
    try:
        return [float(b) for b in raw.split(",") if b.strip()]
    except ValueError:
        raise ValidationError(f"--bias-list {raw!r} is not a comma-separated list of numbers") from None


def _parse_target(raw: str) -> tuple[str, float]:
    parts = raw.split(":")
    if len(parts) != 2 or parts[0] not in tuner.TARGET_METRICS:
        raise ValidationError(f"--target must look like ber:1e-3, per:0 or mer:15, got {raw!r}")
    try:
        return parts[0], float(parts[1])
    except ValueError:
        raise ValidationError(f"--target threshold {parts[1]!r} is not a number") from None


def _parse_calibration_targets(raw: str) -> list[tuple[float, float]]:
    targets = []
    for item in raw.split(","):
        if not item.strip():
            continue
        parts = item.split(":")
        if len(parts) != 2:
            raise ValidationError(f"--targets entries must be bias:mer, got {item!r}")
        try:
            targets.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValidationError(f"--targets entry {item!r} is not numeric") from None
    return targets


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args)
    table = _table(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report, records = tuner.run_trial_records(scenario, scenario.rx.bias_ua, _seed(args, scenario), table)
    rfio.emit_report(report, out / "report.txt")
    metrics.export_constellation(records, out / "constellation.csv")
    print(f"ber={report.ber:.4e} ser={report.ser:.4e} mer={report.mer_db:.2f} dB "
          f"per={report.per:.3f} -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _load_scenario(args)
    table = _table(args)
    biases = _parse_bias_list(args.bias_list) if args.bias_list else list(table.biases_ua)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _seed(args, scenario)
    reports = []
    for si, bias in enumerate(biases):
        trial_reports = tuner._run_trials(
            scenario, bias, [[seed, si, t] for t in range(args.trials)], table, args.workers
        )
        reports.append(metrics.merge_reports(trial_reports))
    rfio.emit_report(reports, out / "sweep.txt")
    for r in sorted(reports, key=lambda r: -r.bias_ua):
        print(f"{r.bias_ua:>8g} uA: ber={r.ber:.4e} mer={r.mer_db:.2f} dB per={r.per:.3f}")
    print(f"-> {out / 'sweep.txt'}")
    return EXIT_OK


def cmd_tune(args) -> int:
    scenario = _load_scenario(args)
    table = _table(args)
    metric, threshold = _parse_target(args.target)
    policy = tuner.TunerPolicy(
        target_metric=metric,
        threshold=threshold,
        confidence=args.confidence,
        min_bits=args.min_bits,
        max_packets=args.max_packets,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = tuner.select_min_power(scenario, policy, table, _seed(args, scenario), args.workers)
    rfio.emit_report(result, out / "tune.txt")
    print(f"chose {result.chosen_bias_ua:g} uA ({result.chosen_power_mw:g} mW), "
          f"power reduction {result.reduction_factor:g}x -> {out / 'tune.txt'}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    scenario = _load_scenario(args)
    base = rfio.load_lna_table(args.table) if args.table else rfchain.UNCALIBRATED_LNA_TABLE
    targets = _parse_calibration_targets(args.targets)
    table = rfchain.calibrate_lna_table(targets, scenario, table=base)
    rfio.save_lna_table(table, args.out)
    for bias, p in table.entries:
        print(f"{bias:>8g} uA: gain {p.gain_db:g} dB, NF {p.nf_db:.3f} dB, IIP3 {p.iip3_dbm:g} dBm")
    print(f"-> {args.out}")
    return EXIT_OK


def cmd_export_pwl(args) -> int:
    scenario = _load_scenario(args)
    table = _table(args)
    stages = tuner.capture_stages(scenario, scenario.rx.bias_ua, _seed(args, scenario), table)
    block = stages[args.stage]
    rfio.export_pwl(block, args.out, args.mode, args.passband_rate)
    print(f"{args.stage} ({args.mode}) -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rflink",
        description="Link-level simulator for a bias-tunable RF receive front-end",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, packets=False):
        p.add_argument("--scenario", required=True, help="scenario file")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--table", default=None, help="LNA table file (default: shipped table)")
        if packets:
            p.add_argument("--packets", type=int, default=None, help="override packet count")

    p = sub.add_parser("simulate", help="run one burst and report metrics")
    common(p, packets=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="evaluate every bias setting")
    common(p, packets=True)
    p.add_argument("--bias-list", default=None, help='e.g. "31.25,62.5,125,250,500"')
    p.add_argument("--trials", type=int, default=1, help="bursts per setting")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tune", help="select the minimum-power setting for a target")
    common(p)
    p.add_argument("--target", required=True, help="metric:threshold, e.g. ber:1e-3")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--min-bits", type=int, default=10_000, dest="min_bits")
    p.add_argument("--max-packets", type=int, default=200, dest="max_packets")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("calibrate", help="fit the LNA NF ladder to MER targets")
    common(p)
    p.add_argument("--targets", required=True, help='bias:mer pairs, e.g. "500:18.9,31.25:11.2"')
    p.add_argument("--out", required=True, help="output table file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("export-pwl", help="write a stage waveform as time,value CSV")
    common(p)
    p.add_argument("--stage", required=True, choices=rfio.EXPORT_STAGES)
    p.add_argument("--mode", default="baseband_i", choices=rfio.PWL_MODES)
    p.add_argument("--passband-rate", type=float, default=None, dest="passband_rate")
    p.add_argument("--out", required=True, help="output file")
    p.set_defaults(func=cmd_export_pwl)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoFeasibleSetting, CalibrationInfeasible) as exc:
        print(f"infeasible target: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (IoError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RfLinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
