"""Command-line interface.

Subcommands mirror the pipeline stages and exchange data through the
experiment output directory:

  topology    build/inspect a device topology and its CZ schedule
  simulate    run calibration + tomography circuits and persist counts
  qrem        build calibration matrices from persisted calibration counts
  tomography  reconstruct density matrices from persisted counts
  analyze     bootstrap negativities and entanglement decisions
  report      emit report files (JSON/CSV/DOT/PNG) from analysis results
  run         full pipeline in one go

Exit codes: 0 success, 1 invalid configuration or inputs, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .pipeline import (
    ConfigError,
    ExperimentConfig,
    analyze_experiment,
    load_experiment_dir,
    resolve_topology,
    run_pipeline,
    simulate_experiment,
)
from .qrem import CalibrationError, CalibrationSnapshot, build_calibration_matrices
from .stabilizer import CountsTable, SimulationError
from .tomography import TomographyError
from .topology import TopologyError, save_topology

VALIDATION_ERRORS = (
    ConfigError,
    TopologyError,
    CalibrationError,
    SimulationError,
    TomographyError,
    ValueError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hexent",
        description="Graph-state entanglement experiments on heavy-hex devices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topology", help="build a topology and CZ schedule")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="shipped preset: rochester, manhattan, hex12")
    src.add_argument("--file", help="topology JSON document")
    src.add_argument("--rows", type=int, help="heavy-hex cell rows (with --cols)")
    p.add_argument("--cols", type=int, help="heavy-hex cell columns")
    p.add_argument("--out", default=None, help="directory for topology/schedule JSON")

    for name, extra in (
        ("simulate", "simulate circuits and persist counts"),
        ("run", "run the full pipeline"),
    ):
        p = sub.add_parser(name, help=extra)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--shots", type=int, default=None, help="tomography shots")
        p.add_argument("--out", default=None, help="output directory override")
        if name == "run":
            p.add_argument("--qrem", choices=["on", "off", "both"], default=None)
            p.add_argument("--bootstrap-samples", type=int, default=None)
            p.add_argument(
                "--formats", default="json,csv,dot,png",
                help="comma-separated report formats",
            )

    p = sub.add_parser("qrem", help="build calibration matrices from counts")
    p.add_argument("--out", required=True, help="experiment output directory")

    p = sub.add_parser("tomography", help="reconstruct density matrices")
    p.add_argument("--out", required=True)
    p.add_argument("--qrem", choices=["on", "off", "both"], default=None)

    p = sub.add_parser("analyze", help="bootstrap negativities")
    p.add_argument("--out", required=True)
    p.add_argument("--qrem", choices=["on", "off", "both"], default=None)
    p.add_argument("--bootstrap-samples", type=int, default=None)

    p = sub.add_parser("report", help="emit report files from analysis results")
    p.add_argument("--out", required=True)
    p.add_argument("--formats", default="json,csv,dot,png")
    return parser


def _config_from_args(args, qrem=None, replicates=None) -> ExperimentConfig:
    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "shots_tomography": args.shots,
    }
    config = ExperimentConfig.from_file(args.config, **overrides)
    updates = {}
    if qrem is not None:
        updates["qrem"] = qrem
    if replicates is not None:
        updates["bootstrap"] = {**config.bootstrap, "replicates": replicates}
    if updates:
        config = ExperimentConfig.from_dict({**config.to_dict(), **updates})
    return config


def cmd_topology(args) -> int:
    if args.rows is not None and args.cols is None:
        raise ConfigError("--rows requires --cols")
    spec = {}
    if args.preset:
        spec["preset"] = args.preset
    elif args.file:
        spec["file"] = args.file
    else:
        spec["rows"], spec["cols"] = args.rows, args.cols
    topology, schedule = resolve_topology(spec)
    print(
        f"{topology.name}: {topology.n_qubits} qubits, {len(topology.edges)} couplings, "
        f"max degree {topology.max_degree()}, {schedule.n_layers} CZ layers"
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_topology(topology, out / "topology.json")
        (out / "schedule.json").write_text(json.dumps(schedule.to_dict(), indent=1))
        print(f"wrote {out / 'topology.json'} and {out / 'schedule.json'}")
    return 0


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    artifacts = simulate_experiment(config)
    topo = artifacts["topology"]
    print(
        f"simulated {len(artifacts['datasets'])} edge datasets on {topo.name} "
        f"({len(artifacts['calibration'])} calibration snapshot(s)) -> {config.output_dir}"
    )
    return 0


def cmd_qrem(args) -> int:
    cal_dir = Path(args.out) / "calibration"
    zero_paths = sorted(cal_dir.glob("counts_zeros_*.json"))
    if not zero_paths:
        raise ConfigError(f"no calibration counts under {cal_dir}")
    for zero_path in zero_paths:
        idx = zero_path.stem.split("_")[-1]
        zeros = CountsTable.load(zero_path)
        ones = CountsTable.load(cal_dir / f"counts_ones_{idx}.json")
        snap = CalibrationSnapshot(
            f"snapshot-{idx}", build_calibration_matrices(zeros, ones), zeros, ones
        )
        snap.save(cal_dir / f"snapshot_{idx}.json")
        print(f"wrote {cal_dir / f'snapshot_{idx}.json'}")
    return 0


def cmd_tomography(args) -> int:
    loaded = load_experiment_dir(args.out)
    config: ExperimentConfig = loaded["config"]
    modes = config.modes if args.qrem is None else _modes_from_flag(args.qrem)
    from .pipeline import _edge_tag, _point_estimate_detail  # stage internals

    mat_dir = Path(args.out) / "matrices"
    mat_dir.mkdir(exist_ok=True)
    count = 0
    for edge, dataset in loaded["datasets"].items():
        for mode in modes:
            detail = _point_estimate_detail(
                dataset,
                loaded["calibration"],
                mode == "qrem",
                config.bootstrap_config().calibration_mode,
            )
            tag = f"edge_{_edge_tag(edge)}_{mode}"
            (mat_dir / f"{tag}.json").write_text(json.dumps(detail["rho"].to_dict()))
            count += 1
    print(f"reconstructed {count} density matrices -> {mat_dir}")
    return 0


def _modes_from_flag(flag: str) -> list[str]:
    return {"on": ["qrem"], "off": ["raw"], "both": ["qrem", "raw"]}[flag]


def cmd_analyze(args) -> int:
    loaded = load_experiment_dir(args.out)
    modes = None if args.qrem is None else _modes_from_flag(args.qrem)
    bootstrap = (
        {"n_replicates": args.bootstrap_samples} if args.bootstrap_samples else None
    )
    report = analyze_experiment(loaded, modes=modes, bootstrap=bootstrap)
    for mode, res in report.modes.items():
        s = res.summary
        print(
            f"[{mode}] entangled {s['entangled_pairs']}/{s['total_pairs']} pairs, "
            f"largest region {s['largest_component']}/{report.topology.n_qubits} qubits, "
            f"mean negativity {s['mean_negativity']:.3f}"
        )
    return 0


def cmd_report(args) -> int:
    from .pipeline import load_analysis_dir
    from .report import emit_report

    report = load_analysis_dir(args.out)
    files = emit_report(report, Path(args.out) / "report", _formats(args.formats))
    for f in files:
        print(f"wrote {f}")
    return 0


def _formats(text: str) -> tuple[str, ...]:
    return tuple(f.strip() for f in text.split(",") if f.strip())


def cmd_run(args) -> int:
    from .report import emit_report

    config = _config_from_args(
        args, qrem=args.qrem, replicates=args.bootstrap_samples
    )
    report = run_pipeline(config)
    for mode, res in report.modes.items():
        s = res.summary
        print(
            f"[{mode}] entangled {s['entangled_pairs']}/{s['total_pairs']} pairs, "
            f"largest region {s['largest_component']}/{report.topology.n_qubits} qubits, "
            f"mean negativity {s['mean_negativity']:.3f} "
            f"(std {s['std_negativity']:.3f})"
        )
    if config.output_dir:
        files = emit_report(
            report, Path(config.output_dir) / "report", _formats(args.formats)
        )
        print(f"wrote {len(files)} report files under {config.output_dir}/report")
    return 0


COMMANDS = {
    "topology": cmd_topology,
    "simulate": cmd_simulate,
    "qrem": cmd_qrem,
    "tomography": cmd_tomography,
    "analyze": cmd_analyze,
    "report": cmd_report,
    "run": cmd_run,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures: filesystem, bootstrap, ...
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
