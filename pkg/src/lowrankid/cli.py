"""Command-line experiment runner.

Subcommands: simulate (write time series), identify (fit previously
written CSVs), spectrum (rank and feedback-identity checks), run (full
pipeline), bode (export Bode grids of the configured true system).
Exit codes: 0 success, 2 config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    export_bode,
    identify_from_csv,
    parse_config,
    run_experiment,
)
from .spectra import default_freq_grid
from .timeseries import (
    INPUT_STREAM_OFFSET,
    NoiseSpec,
    generate_white_noise,
    simulate_low_rank,
    simulate_with_input,
    write_timeseries_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed list")
    p.add_argument("--freq-points", type=int, default=None, help="frequency grid size (default 512)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowrankid",
        description="Simulate and identify low-rank vector processes from declarative configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full simulate/identify/report pipeline")
    _add_common(p_run)
    p_run.add_argument(
        "--replications", type=int, default=None, help="rerun with seeds derived from the first"
    )

    p_sim = sub.add_parser("simulate", help="generate and write the configured time series")
    _add_common(p_sim)

    p_id = sub.add_parser("identify", help="run the fits on existing CSV series")
    _add_common(p_id)
    p_id.add_argument("--data", required=True, help="output series CSV (from simulate)")
    p_id.add_argument("--input", default=None, help="input series CSV (mode with_input)")

    p_sp = sub.add_parser("spectrum", help="spectral rank and feedback identity checks")
    _add_common(p_sp)

    p_bode = sub.add_parser("bode", help="export Bode grids of the configured true system")
    _add_common(p_bode)
    return parser


def _seeds(args, cfg):
    return [args.seed] if args.seed is not None else None


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    report = run_experiment(
        cfg,
        out_dir=args.out,
        seeds=_seeds(args, cfg),
        freq_points=args.freq_points,
        replications=args.replications,
    )
    for key, stats in sorted(report.summary.items()):
        print(f"{key}: median={stats['median']:.6g} IQR=[{stats['q1']:.6g}, {stats['q3']:.6g}]")
    print(f"report written ({report.config_hash})")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out if args.out is not None else (cfg.out_dir or "runs"))
    out.mkdir(parents=True, exist_ok=True)
    seeds = [args.seed] if args.seed is not None else list(cfg.seeds)
    for seed in seeds:
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        comments = (f"seed={seed}", f"config_sha256={cfg.config_hash()}")
        if cfg.mode == "with_input":
            f = cfg.build_f()
            k = cfg.build_k()
            if cfg.input_variance is None:
                raise ConfigError("input_noise: required for mode with_input")
            u = generate_white_noise(
                NoiseSpec(f.in_dim, cfg.input_variance, seed + INPUT_STREAM_OFFSET), cfg.length
            )
            y = simulate_with_input(f, k, u, NoiseSpec(k.in_dim, cfg.noise_variance, seed))
            write_timeseries_csv(u, seed_dir / "timeseries_u.csv", comments)
        else:
            w = cfg.build_w()
            y = simulate_low_rank(w, NoiseSpec(w.in_dim, cfg.noise_variance, seed), cfg.length)
        write_timeseries_csv(y, seed_dir / "timeseries_y.csv", comments)
        print(f"wrote {seed_dir}/timeseries_y.csv")
    return EXIT_OK


def _cmd_identify(args) -> int:
    cfg = parse_config(args.config)
    report = identify_from_csv(cfg, args.data, input_path=args.input, out_dir=args.out)
    n_fits = sum(len(rep["fits"]) for rep in report.replications)
    print(f"{n_fits} fits written ({report.config_hash})")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    cfg = parse_config(args.config)
    if cfg.mode != "spectrum_check":
        cfg = _parse_as_spectrum(cfg)
    report = run_experiment(cfg, out_dir=args.out, seeds=_seeds(args, cfg), freq_points=args.freq_points)
    metrics = report.replications[0]["metrics"]
    print(f"rank: {int(metrics['rank'])}")
    for key in ("feedback_vs_factor_max_dev", "feedback_vs_bruteforce_max_dev"):
        if key in metrics:
            print(f"{key}: {metrics[key]:.3g}")
    return EXIT_OK


def _parse_as_spectrum(cfg):
    from dataclasses import replace

    return replace(cfg, mode="spectrum_check")


def _cmd_bode(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out if args.out is not None else (cfg.out_dir or "runs"))
    out.mkdir(parents=True, exist_ok=True)
    grid = default_freq_grid(args.freq_points if args.freq_points is not None else cfg.freq_points)
    comments = (f"config_sha256={cfg.config_hash()}",)
    wrote = []
    if cfg.w_channels:
        for i, spec in enumerate(cfg.w_channels):
            path = out / f"bode_w{i + 1}.csv"
            export_bode(spec.build(), grid, path, comments)
            wrote.append(path)
    if cfg.h_true is not None:
        path = out / "bode_h.csv"
        export_bode(cfg.h_true.build(), grid, path, comments)
        wrote.append(path)
    if cfg.f_channels:
        for i, spec in enumerate(cfg.f_channels):
            path = out / f"bode_f{i + 1}.csv"
            export_bode(spec.build(), grid, path, comments)
            wrote.append(path)
    if cfg.k_channels:
        for i, spec in enumerate(cfg.k_channels):
            path = out / f"bode_k{i + 1}.csv"
            export_bode(spec.build(), grid, path, comments)
            wrote.append(path)
    if not wrote:
        raise ConfigError("model: nothing to export (no w/h/f/k entries)")
    for p in wrote:
        print(f"wrote {p}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "simulate": _cmd_simulate,
    "identify": _cmd_identify,
    "spectrum": _cmd_spectrum,
    "bode": _cmd_bode,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime/numerical failures
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
