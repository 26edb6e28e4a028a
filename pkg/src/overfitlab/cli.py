"""Command-line interface.

Subcommands: ranks, bounds, simulate, smallball, sweep, example31.
Exit codes: 0 success, 2 config error, 3 infeasible bound configuration,
4 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

import numpy as np

from .bounds import InfeasibleBoundError, bound_report, find_k_star, select_working_k
from .designs import DesignSpec
from .estimators import estimate_coordinate_smallball_prob
from .harness import (
    ConfigError,
    ExperimentConfig,
    OutputPaths,
    emit_outputs,
    preset_example_31,
    run_experiment,
    sweep,
)
from .spectra import Spectrum, TruncationError, rank_profile, stable_rank4

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_spectrum(path: str) -> Spectrum:
    text = _read_text(path)
    if path.endswith(".csv"):
        return Spectrum.from_csv(text)
    return Spectrum.from_json(text)


def _load_config(path: str, seed: int | None) -> ExperimentConfig:
    config = ExperimentConfig.from_json(_read_text(path))
    if seed is not None:
        config = dataclasses.replace(
            config, design=dataclasses.replace(config.design, seed=seed)
        )
    return config


def _emit(obj: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(obj, indent=2))
    else:
        for key, val in obj.items():
            if isinstance(val, dict):
                print(f"{key}:")
                for k2, v2 in val.items():
                    print(f"  {k2}: {v2}")
            else:
                print(f"{key}: {val}")


def _cmd_ranks(args) -> int:
    spectrum = _load_spectrum(args.spectrum)
    profile = rank_profile(spectrum, args.k, c_small=args.c_small)
    out = {
        "p": spectrum.p,
        "trace": spectrum.trace(),
        "k": profile.k,
        "r_k": profile.r_k,
        "R_k": profile.R_k,
        "srank4_sqrt": profile.srank4_sqrt,
        "srank4": profile.srank4,
        "R_k2": profile.R_k2,
        "frak_R_k": profile.frak_R_k,
        "c_small": profile.c_small,
    }
    if args.table:
        lines = ["k,r_k,R_k,R_k2,frak_R_k"]
        kmax = min(spectrum.p - 1, int(stable_rank4(spectrum, of_square_root=False)))
        for k in range(kmax + 1):
            prof = rank_profile(spectrum, k, c_small=args.c_small)
            lines.append(
                f"{k},{prof.r_k:.17g},{prof.R_k:.17g},{prof.R_k2:.17g},{prof.frak_R_k:.17g}"
            )
        with open(args.table, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        out["table"] = args.table
    _emit(out, args.json)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    config = _load_config(args.config, args.seed)
    alpha_norm = (
        float(np.linalg.norm(config.alpha_star.vector))
        if config.alpha_star.mode == "explicit"
        else config.alpha_star.norm
    )
    report = bound_report(
        config.design.spectrum,
        config.N,
        config.bound_config,
        alpha_star_norm=alpha_norm,
        noise_psi2=config.noise.psi2,
    )
    if args.table:
        with open(args.table, "w", encoding="utf-8") as fh:
            fh.write(report.per_k_csv())
    obj = report.to_json_obj()
    if not args.json:
        obj.pop("per_k_table")
    _emit(obj, args.json)
    if report.k_star is None:
        print("warning: k* is infinite (balance inequality never holds)", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _run_and_emit(config: ExperimentConfig, args) -> int:
    result = run_experiment(config, threads=args.threads)
    written = emit_outputs(result.report, result.records, result.summary, config)
    out = {"summary": result.summary, "written": written}
    if args.json:
        out["bound_report"] = {
            k: v for k, v in result.report.to_json_obj().items() if k != "per_k_table"
        }
    _emit(out, args.json)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = _load_config(args.config, args.seed)
    if args.trials is not None:
        config = dataclasses.replace(config, trials=args.trials)
    if args.out:
        config = dataclasses.replace(
            config,
            outputs=OutputPaths(
                csv_path=f"{args.out}/trials.csv",
                json_path=f"{args.out}/report.json",
                plot_dir=args.out,
            ),
        )
    return _run_and_emit(config, args)


def _cmd_smallball(args) -> int:
    config = _load_config(args.config, args.seed)
    est = estimate_coordinate_smallball_prob(
        config.design, epsilon=args.epsilon, c0=args.c0, trials=args.trials
    )
    _emit(
        {
            "p_hat": est.value,
            "stderr": est.stderr,
            "trials": est.trials,
            "seed": est.seed,
            "elapsed_ms": est.elapsed_ms,
        },
        args.json,
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _load_config(args.config, args.seed)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    points = sweep(config, args.var, values, threads=args.threads)
    out = {
        "variable": args.var,
        "points": [
            {"value": pt.value, "summary": pt.summary, "error": pt.error} for pt in points
        ],
    }
    _emit(out, args.json)
    return EXIT_OK


def _cmd_example31(args) -> int:
    outputs = OutputPaths()
    if args.out:
        outputs = OutputPaths(
            csv_path=f"{args.out}/trials.csv",
            json_path=f"{args.out}/report.json",
            plot_dir=args.out,
        )
    config = preset_example_31(
        N=args.N,
        epsilon=args.epsilon,
        c_ratio=args.c_ratio,
        snr=args.snr,
        trials=args.trials,
        seed=args.seed if args.seed is not None else 20260810,
        outputs=outputs,
    )
    return _run_and_emit(config, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overfitlab",
        description="Minimum-norm interpolation laboratory: rank functionals, "
        "risk bounds, and Monte Carlo experiments",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the design seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for trials")
    parser.add_argument("--json", action="store_true", help="emit machine-readable JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    ranks = sub.add_parser("ranks", help="rank functionals of a spectrum")
    ranks.add_argument("spectrum", help="spectrum JSON or one-column CSV")
    ranks.add_argument("--k", type=int, default=0)
    ranks.add_argument("--c-small", dest="c_small", type=float, default=0.5)
    ranks.add_argument("--table", help="write the per-k table CSV here")
    ranks.set_defaults(func=_cmd_ranks)

    bounds_p = sub.add_parser("bounds", help="evaluate the bound report for a config")
    bounds_p.add_argument("config")
    bounds_p.add_argument("--table", help="write the per-k balance table CSV here")
    bounds_p.set_defaults(func=_cmd_bounds)

    sim = sub.add_parser("simulate", help="run Monte Carlo trials for a config")
    sim.add_argument("config")
    sim.add_argument("--trials", type=int, default=None)
    sim.add_argument("--out", help="directory for CSV/JSON/SVG outputs")
    sim.set_defaults(func=_cmd_simulate)

    sb = sub.add_parser("smallball", help="coordinate small-ball probability estimate")
    sb.add_argument("config")
    sb.add_argument("--epsilon", type=float, required=True)
    sb.add_argument("--c0", type=float, required=True)
    sb.add_argument("--trials", type=int, default=10_000)
    sb.set_defaults(func=_cmd_smallball)

    sw = sub.add_parser("sweep", help="run a parameter sweep")
    sw.add_argument("config")
    sw.add_argument("--var", required=True, choices=["N", "epsilon", "df", "trace_scale"])
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.set_defaults(func=_cmd_sweep)

    ex = sub.add_parser("example31", help="run the exponential-tail benchmark preset")
    ex.add_argument("--N", type=int, default=200)
    ex.add_argument("--epsilon", type=float, default=1e-3)
    ex.add_argument("--snr", type=float, default=30.0)
    ex.add_argument("--c-ratio", dest="c_ratio", type=float, default=1.0)
    ex.add_argument("--trials", type=int, default=100)
    ex.add_argument("--out", help="directory for CSV/JSON/SVG outputs")
    ex.set_defaults(func=_cmd_example31)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which matches the config-error code
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except InfeasibleBoundError as exc:
        print(f"infeasible bound configuration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, TruncationError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
