"""Command-line entry point: ``cbjj levels|spectrum|switch|fit``.

Outputs land in ``--out`` (default: the config's ``output_dir``). Failures
exit nonzero and print one JSON object ``{"error": <category>, "message": ...}``
on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import boundstates, config, fitting, io, rcsj, scattering
from .junction import JunctionError

EXIT_CODES = {"usage": 2, "config": 3, "parse": 4, "resolution": 5, "numerical": 6,
              "fit": 7, "io": 8, "domain": 9, "internal": 70}


class CLIError(Exception):
    def __init__(self, category: str, message: str):
        self.category = category
        super().__init__(message)


def _categorise(exc: BaseException) -> str:
    if isinstance(exc, CLIError):
        return exc.category
    if isinstance(exc, config.ConfigError | rcsj.ConfigurationError):
        return "config"
    if isinstance(exc, io.ParseError):
        return "parse"
    if isinstance(exc, boundstates.ResolutionError | rcsj.ResolutionError):
        return "resolution"
    if isinstance(exc, boundstates.BoundStateError):
        return "numerical"
    if isinstance(exc, fitting.FitError):
        return "fit"
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, JunctionError | scattering.ScatteringError | rcsj.RCSJError | ValueError):
        return "domain"
    return "internal"


def _load_config(args) -> config.RunConfig:
    cfg = config.load(args.config) if args.config else config.default_config()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg) -> Path:
    out = Path(args.out if args.out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _meta(cfg, **extra) -> dict:
    return io.provenance(cfg.digest(), cfg.seed, extra)


def cmd_levels(cfg: config.RunConfig, out: Path) -> list[Path]:
    table = boundstates.level_table(cfg.junction, cfg.biases, cfg.grid)
    report = []
    for b, row in zip(cfg.biases, table.rows):
        try:
            err = boundstates.convergence_check(cfg.junction, b, cfg.grid, n_levels=4)
        except boundstates.BoundStateError as exc:
            raise type(exc)(f"bias ratio {b}: {exc}") from exc
        report.append({"bias_ratio": float(b), "n_bound": row.n_bound,
                       "max_relative_change_on_refinement": err})
    paths = [out / "levels.csv", out / "levels_convergence.json"]
    meta = _meta(cfg)
    io.write_levels(table, paths[0], meta)
    io.write_json({"grid_points": cfg.grid.n_points, "biases": report}, paths[1], meta)
    return paths


def cmd_spectrum(cfg: config.RunConfig, out: Path, kind: str) -> list[Path]:
    model, (lo, hi) = ((cfg.boson, cfg.boson_window) if kind == "boson"
                       else (cfg.fermion, cfg.fermion_window))
    spec = scattering.sweep_spectrum(model, lo, hi, cfg.sweep_points)
    path = out / f"spectrum_{kind}.csv"
    io.write_spectrum(spec, path, _meta(cfg, model=kind))
    return [path]


def cmd_switch(cfg: config.RunConfig, out: Path, method: str) -> list[Path]:
    p = cfg.switch_junction()
    proto = cfg.protocol
    if method == "langevin":
        if cfg.seed is None:
            raise CLIError("usage", "Langevin runs need a seed (--seed or 'seed' in the config)")
        if cfg.langevin_start_current is not None:
            proto = dataclasses.replace(proto, start_current=cfg.langevin_start_current)
        if cfg.langevin_ramp_rate is not None:
            proto = dataclasses.replace(proto, ramp_rate=cfg.langevin_ramp_rate)
        hist = rcsj.switching_histogram(p, proto, cfg.noise(), bins=cfg.bins, detector=cfg.detector)
    else:
        hist = rcsj.escape_rate_distribution(p, proto, cfg.temperature, bins=cfg.bins)
    meta = _meta(cfg, method=method, n_total=hist.n_total)
    paths = [out / f"switch_{method}.csv", out / f"switch_{method}_summary.json"]
    io.write_histogram(hist, paths[0], meta)
    summary = {k: v for k, v in hist.summary().items()}
    summary["protocol"] = {"start_current_A": proto.start_current, "peak_current_A": proto.peak_current,
                           "ramp_rate_A_per_s": proto.rate, "n_trials": proto.n_trials}
    summary["temperature_K"] = cfg.temperature
    summary["capacitance_F"] = p.capacitance
    io.write_json(summary, paths[1], meta)
    return paths


def cmd_fit(cfg: config.RunConfig, out: Path, target: str, data: Path) -> list[Path]:
    if target == "switching":
        hist = io.read_histogram(data)
        res = fitting.fit_switching_histogram(hist, cfg.protocol, cfg.temperature,
                                              guess=cfg.switch_junction(),
                                              noise=cfg.histogram_noise)
    else:
        spec = io.read_spectrum(data)
        trace = fitting.MeasuredTrace(spec.frequency, spec.transmission, cfg.trace_scale, spec.phase)
        if target == "boson":
            res = fitting.fit_boson_spectrum(trace, coupling_ratio=cfg.coupling_ratio,
                                             fit_amplitude=cfg.fit_amplitude, use_phase=cfg.use_phase)
        else:
            res = fitting.fit_fermion_spectrum(trace, fit_amplitude=cfg.fit_amplitude,
                                               use_phase=cfg.use_phase)
    path = out / f"fit_{target}.json"
    io.write_json(res.to_dict(), path, _meta(cfg, target=target, data=Path(data).name))
    return [path]


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Flags may appear before or after the subcommand; the subcommand copy
    # must not reset values given before it.
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration (default: packaged)", **kw)
    common.add_argument("--seed", type=int, help="master seed for stochastic commands", **kw)
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)", **kw)
    common.add_argument("--out", type=Path, help="output directory", **kw)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    ap = argparse.ArgumentParser(prog="cbjj", parents=[_global_flags(suppress=False)],
                                 description="Current-biased Josephson junction toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("levels", parents=[common], help="bound-state transition table")
    sp = sub.add_parser("spectrum", parents=[common], help="transmission and phase sweep")
    sp.add_argument("--kind", choices=["boson", "fermion"], required=True)
    sw = sub.add_parser("switch", parents=[common], help="switching-current histogram")
    sw.add_argument("--method", choices=["langevin", "rates"], default="rates")
    ft = sub.add_parser("fit", parents=[common], help="fit a spectrum or histogram CSV")
    ft.add_argument("--target", choices=["boson", "fermion", "switching"], required=True)
    ft.add_argument("--data", type=Path, required=True)
    sub.add_parser("show-config", parents=[common], help="print the effective configuration")
    return ap


def _fail(category: str, message: str) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return EXIT_CODES.get(category, 1)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _fail("usage", "invalid command line")
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise CLIError("usage", "--threads must be at least 1")
            import numba
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        cfg = _load_config(args)
        if args.command == "show-config":
            sys.stdout.write(config.dumps(cfg))
            return 0
        out = _out_dir(args, cfg)
        with np.errstate(all="ignore"):
            if args.command == "levels":
                paths = cmd_levels(cfg, out)
            elif args.command == "spectrum":
                paths = cmd_spectrum(cfg, out, args.kind)
            elif args.command == "switch":
                paths = cmd_switch(cfg, out, args.method)
            else:
                paths = cmd_fit(cfg, out, args.target, args.data)
    except Exception as exc:  # noqa: BLE001 - every failure maps to a category
        return _fail(_categorise(exc), str(exc))
    for path in paths:
        print(os.fspath(path))
    return 0


if __name__ == "__main__":
    sys.exit(main())
