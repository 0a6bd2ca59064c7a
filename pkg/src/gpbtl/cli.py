"""Command-line entry point and results persistence.

Subcommands: `sweep`, `grid`, `jura`, `validate-config`. Every run reads a
JSON configuration file; `--seed`, `--trials`, `--out`, and `--threads`
override the corresponding config fields. Thread count falls back to the
GPBTL_THREADS environment variable when neither flag nor config sets it.

All CSV output starts with a provenance comment line recording the config
hash, seed, and library version, followed by a header row. Runs with a
fixed seed produce byte-identical files: all writes happen from a single
writer after aggregation and no timestamps are recorded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import GridResult, SweepResult, run_kernel_grid, run_sweep
from .jura import JuraLoadError, JuraReport, load_jura, run_jura

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_csv(path: Path, provenance: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(provenance + "\n")
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


def _provenance(cfg: ExperimentConfig) -> str:
    return f"# config_hash={cfg.config_hash()} seed={cfg.seed} version={__version__}"


def _write_sweep(cfg: ExperimentConfig, result: SweepResult, out_dir: Path) -> list[Path]:
    provenance = _provenance(cfg)
    trials_path = out_dir / "sweep_trials.csv"
    _write_csv(
        trials_path,
        provenance,
        ["algorithm", result.sweep_name, "trial", "mae"],
        result.iter_trial_rows(),
    )
    agg_path = out_dir / "sweep_aggregate.csv"
    _write_csv(
        agg_path,
        provenance,
        ["algorithm", result.sweep_name, "median", "q25", "q75"],
        result.iter_aggregate_rows(),
    )
    return [trials_path, agg_path]


def _write_grid(cfg: ExperimentConfig, result: GridResult, out_dir: Path) -> list[Path]:
    provenance = _provenance(cfg)
    trials_path = out_dir / "grid_trials.csv"
    _write_csv(
        trials_path,
        provenance,
        ["algorithm", "synthesis_family", "analysis_family", "trial", "mae"],
        result.iter_trial_rows(),
    )
    agg_path = out_dir / "grid_aggregate.csv"
    _write_csv(
        agg_path,
        provenance,
        ["algorithm", "synthesis_family", "analysis_family", "median", "q25", "q75", "differential_median", "abs_differential_median"],
        result.iter_aggregate_rows(),
    )
    return [trials_path, agg_path]


def _write_jura(cfg: ExperimentConfig, report: JuraReport, out_dir: Path) -> list[Path]:
    provenance = _provenance(cfg)
    paths = []
    restarts_path = out_dir / "jura_restarts.csv"
    rows = [
        (alg, restart, report.maes[alg][restart])
        for alg in report.algorithms
        for restart in range(report.maes[alg].shape[0])
    ]
    _write_csv(restarts_path, provenance, ["algorithm", "restart", "mae"], rows)
    paths.append(restarts_path)

    summary_path = out_dir / "jura_summary.csv"
    summary = report.summary()
    rows = [(alg, mean, std) for alg, (mean, std) in summary.items()]
    _write_csv(summary_path, provenance, ["algorithm", "mae_mean", "mae_std"], rows)
    paths.append(summary_path)

    message_path = out_dir / "jura_message_size.csv"
    _write_csv(
        message_path,
        provenance,
        ["transferred_scalars", "raw_data_scalars"],
        [(report.message_scalars, report.raw_scalars)],
    )
    paths.append(message_path)

    for alg, table in report.maps.items():
        map_path = out_dir / f"jura_map_{alg.lower()}.csv"
        _write_csv(map_path, provenance, ["x", "y", "mean", "sd"], (tuple(row) for row in table))
        paths.append(map_path)
    return paths


def write_synthesis(sample, path) -> None:
    """Export one synthesized dataset for inspection.

    One row per site: training rows carry the noisy outputs of both tasks,
    test rows carry empty output fields; the noiseless function values are
    included for both splits.
    """
    header = ["split", "x", "latent", "source_truth", "target_truth", "source_output", "target_output"]
    rows = []
    for i in range(sample.source.n):
        rows.append(
            (
                "train",
                sample.train_inputs[i, 0],
                sample.latent_train[i],
                sample.source_truth_train[i],
                sample.target_truth_train[i],
                sample.source.outputs[i],
                sample.target.outputs[i],
            )
        )
    for i in range(sample.test_inputs.shape[0]):
        rows.append(
            (
                "test",
                sample.test_inputs[i, 0],
                sample.latent_test[i],
                sample.source_truth_test[i],
                sample.target_truth_test[i],
                "",
                "",
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


def _resolve_threads(args, cfg: ExperimentConfig) -> int:
    if args.threads is not None:
        return args.threads
    if cfg.threads != 1:
        return cfg.threads
    env = os.environ.get("GPBTL_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"GPBTL_THREADS must be an integer, got {env!r}") from exc
        if value < 1:
            raise ConfigError(f"GPBTL_THREADS must be >= 1, got {value}")
        return value
    return 1


def _load(args) -> ExperimentConfig:
    overrides = {"seed": args.seed, "trials": getattr(args, "trials", None), "output_dir": args.out}
    return load_config(args.config, overrides)


def _run_sweep_command(args) -> int:
    cfg = _load(args)
    if cfg.kind not in ("sweep-sigma", "sweep-a"):
        raise ConfigError(f"the sweep command needs a sweep-sigma or sweep-a config, got {cfg.kind!r}")
    threads = _resolve_threads(args, cfg)
    result = run_sweep(
        cfg.synthesis,
        cfg.sweep_variable,
        cfg.sweep_values,
        trials=cfg.trials,
        threads=threads,
    )
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in _write_sweep(cfg, result, out_dir):
        print(f"wrote {path}")
    return EXIT_OK


def _run_grid_command(args) -> int:
    cfg = _load(args)
    if cfg.kind != "kernel-grid":
        raise ConfigError(f"the grid command needs a kernel-grid config, got {cfg.kind!r}")
    threads = _resolve_threads(args, cfg)
    result = run_kernel_grid(
        cfg.synthesis,
        kernel_params=cfg.grid_kernel,
        synthesis_families=cfg.grid_families,
        analysis_families=cfg.grid_families,
        trials=cfg.trials,
        threads=threads,
    )
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in _write_grid(cfg, result, out_dir):
        print(f"wrote {path}")
    return EXIT_OK


def _run_jura_command(args) -> int:
    cfg = _load(args)
    if cfg.kind != "jura":
        raise ConfigError(f"the jura command needs a jura config, got {cfg.kind!r}")
    ds = load_jura(cfg.jura_train_path, cfg.jura_holdout_path)
    report = run_jura(ds, restarts=cfg.jura_restarts, seed=cfg.seed)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in _write_jura(cfg, report, out_dir):
        print(f"wrote {path}")
    for alg, (mean, std) in report.summary().items():
        print(f"{alg}: MAE {mean:.5f} +/- {std:.5f}")
    return EXIT_OK


def _validate_command(args) -> int:
    cfg = _load(args)
    print(json.dumps(cfg.resolved, indent=2, sort_keys=True))
    print(f"config_hash={cfg.config_hash()}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpbtl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, runner in (
        ("sweep", _run_sweep_command),
        ("grid", _run_grid_command),
        ("jura", _run_jura_command),
        ("validate-config", _validate_command),
    ):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to a JSON experiment config")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--trials", type=int, default=None, help="override the trial count")
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument("--threads", type=int, default=None, help="worker thread cap")
        cmd.set_defaults(runner=runner)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.runner(args)
    except (ConfigError, JuraLoadError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure, distinct from bad input
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
