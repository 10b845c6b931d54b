"""Command-line front end.

Subcommands::

    landscape generate   random Gaussian-mixture landscape -> JSON
    nes run              search a landscape file, optional trace CSV
    bench sweep          success probability / mean CE table over N
    robot simulate       closed inference/inquiry loop on a hidden circle
    map brute-force      dense entropy (or landscape) map as CSV

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
3 search hit its iteration cap, 4 inference failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import GaussianFamily, benchmark_sweep
from .circle import (CircleModel, FieldSpec, load_world, save_world,
                     write_measurements, Measurement)
from .design import (DesignPolicy, LoopAborted, entropy_objective,
                     run_autonomous_loop)
from .grid import GridSpace
from .inference import NestedSamplingConfig, PosteriorEnsemble, PriorSpec
from .landscape import MixtureLandscape, brute_force_map, random_landscape
from .search import NesConfig, run_nes

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_INFERENCE = 0, 1, 2, 3, 4

logger = logging.getLogger("nestedentropy")


class ConfigError(Exception):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dense_csv(path, values: np.ndarray) -> None:
    """One row per first-axis index, one column per second-axis index."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(values):
            w.writerow([_fmt(v) for v in row])


def _grid_from_args(args) -> GridSpace:
    return GridSpace.square(args.cells, -args.extent, args.extent)


def _n_values(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad N list {text!r}")
    if not values or any(v < 2 for v in values):
        raise argparse.ArgumentTypeError("every N must be an integer >= 2")
    return values


def _load_nes_config(args) -> NesConfig:
    cfg = NesConfig.load(args.config) if args.config else NesConfig()
    overrides = {k: v for k, v in (("num_samples", args.samples),
                                   ("explore_steps", args.explore_steps),
                                   ("seed", args.seed)) if v is not None}
    return replace(cfg, **overrides)


# -- landscape generate -------------------------------------------------------

def cmd_landscape_generate(args) -> int:
    if args.components < 1:
        raise ConfigError("--components must be at least 1")
    landscape = random_landscape(args.components, _grid_from_args(args),
                                 args.seed)
    landscape.save(args.out)
    bf = brute_force_map(landscape, landscape.grid)
    cells = " ".join(",".join(map(str, c)) for c in bf.argmax_cells)
    print(f"argmax {cells} value {bf.max_value:.6f}")
    return EXIT_OK


# -- nes run ------------------------------------------------------------------

def cmd_nes_run(args) -> int:
    landscape = MixtureLandscape.load(args.landscape)
    cfg = _load_nes_config(args)
    res = run_nes(landscape, landscape.grid, cfg)
    doc = {"config": cfg.to_dict(), "result": res.to_dict()}
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    if args.trace:
        res.write_trace(args.trace)
    m = res.metrics
    cells = " ".join(",".join(map(str, c)) for c in res.optimal_cells)
    print(f"optimal {cells}")
    print(f"h_max {res.h_max:.9g} m {m.evaluations} n {m.total_cells} "
          f"CE {m.compression_efficiency:.4f} converged {res.converged}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


# -- bench sweep ---------------------------------------------------------------

def cmd_bench_sweep(args) -> int:
    family = GaussianFamily(args.components, _grid_from_args(args))
    cfg = NesConfig.load(args.config) if args.config else NesConfig()
    summary = benchmark_sweep(family, args.n_values, args.replicates, cfg,
                              seed=args.seed or 0, jobs=args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary.write_csv(out / "sweep.csv")
    (out / "sweep.json").write_text(summary.to_json() + "\n")
    for r in summary.records:
        print(f"N={r.N:4d}  mean_CE={r.mean_CE:8.4f}  "
              f"success={r.success_probability:.3f}  replicates={r.replicates}")
    if args.check_trend:
        t = summary.trends()
        print(f"success trend rho={t['success_rho']:.3f} p={t['success_p']:.4f}"
              f"; CE trend rho={t['ce_rho']:.3f} p={t['ce_p']:.4f}")
        if not (t["success_increasing"] and t["ce_decreasing"]):
            return 1
    return EXIT_OK


# -- robot simulate -----------------------------------------------------------

def _world(args) -> tuple[CircleModel, FieldSpec]:
    if args.world:
        return load_world(args.world)
    field = FieldSpec(_grid_from_args(args))
    truth = CircleModel(*args.truth)
    field.check_model(truth)
    return truth, field


def cmd_robot_simulate(args) -> int:
    truth, field = _world(args)
    prior = PriorSpec.for_field(field)
    nes_cfg = _load_nes_config(args)
    policy = DesignPolicy(args.searcher, nes_cfg, args.selector,
                          seed=args.seed or 0)
    inference = NestedSamplingConfig(num_posterior=args.posterior_samples)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_world(out / "world.json", truth, field)
    loop_path = out / "loop.jsonl"
    loop_path.write_text("")

    def emit(rec):
        with open(loop_path, "a") as fh:
            fh.write(rec.to_json() + "\n")
        if rec.entropy_map is not None:
            write_dense_csv(out / f"entropy_cycle{rec.cycle:03d}.csv",
                            rec.entropy_map)
        line = (f"cycle {rec.cycle:3d} cell {rec.chosen_cell} "
                f"H {rec.h_max:.4f} m {rec.metrics.evaluations} "
                f"CE {rec.metrics.compression_efficiency:.3f}")
        if rec.brute_max is not None:
            line += (f" brute CE {rec.brute_metrics.compression_efficiency:.1f}"
                     f" agree {rec.agrees}")
        print(line)

    status = EXIT_OK
    try:
        records = run_autonomous_loop(
            truth, field, prior, policy, args.cycles, seed=args.seed or 0,
            inference=inference, keep_maps=args.searcher != "nes",
            callback=emit)
        log = [Measurement(r.chosen_cell, r.intensity) for r in records]
    except LoopAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        log, status = exc.log, EXIT_INFERENCE
    write_measurements(out / "measurements.csv", log)
    return status


# -- map brute-force ----------------------------------------------------------

def cmd_map_brute_force(args) -> int:
    if bool(args.landscape) == bool(args.ensemble):
        raise ConfigError("give exactly one of --landscape or --ensemble")
    if args.landscape:
        landscape = MixtureLandscape.load(args.landscape)
        objective, grid = landscape, landscape.grid
    else:
        ensemble = PosteriorEnsemble.load(args.ensemble)
        _, field = _world(args)
        objective, grid = entropy_objective(ensemble, field), field.grid
    bf = brute_force_map(objective, grid)
    write_dense_csv(args.out, bf.values)
    cells = " ".join(",".join(map(str, c)) for c in bf.argmax_cells)
    print(f"evaluations {bf.evaluations} max {bf.max_value:.9g} argmax {cells}")
    return EXIT_OK


def _add_grid(p):
    p.add_argument("--cells", type=int, default=61,
                   help="cells per side (default 61)")
    p.add_argument("--extent", type=float, default=3.0,
                   help="grid spans [-extent, extent]^2 (default 3)")


def _add_nes(p):
    p.add_argument("--config", help="NES config JSON")
    p.add_argument("--samples", type=int, help="live samples N")
    p.add_argument("--explore-steps", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nestedentropy",
        description="Nested entropy sampling for experimental design.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--seed", type=int, help="global seed override")
    sub = parser.add_subparsers(dest="group", required=True)

    land = sub.add_parser("landscape").add_subparsers(dest="action",
                                                      required=True)
    p = land.add_parser("generate", help="random Gaussian-mixture landscape")
    p.add_argument("--components", type=int, default=7)
    p.add_argument("--out", required=True)
    _add_grid(p)
    p.set_defaults(func=cmd_landscape_generate)

    nes = sub.add_parser("nes").add_subparsers(dest="action", required=True)
    p = nes.add_parser("run", help="search a landscape with NES")
    p.add_argument("--landscape", required=True)
    p.add_argument("--out", help="result JSON")
    p.add_argument("--trace", help="per-iteration trace CSV")
    _add_nes(p)
    p.set_defaults(func=cmd_nes_run)

    bench = sub.add_parser("bench").add_subparsers(dest="action",
                                                   required=True)
    p = bench.add_parser("sweep", help="success/CE table over N")
    p.add_argument("--n-values", type=_n_values, default=[5, 10, 20, 50, 100])
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--components", type=int, default=7)
    p.add_argument("--config", help="NES config JSON (N is overridden)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--check-trend", action="store_true",
                   help="exit nonzero unless both Spearman trends hold")
    p.add_argument("--out-dir", default=".")
    _add_grid(p)
    p.set_defaults(func=cmd_bench_sweep)

    robot = sub.add_parser("robot").add_subparsers(dest="action",
                                                   required=True)
    p = robot.add_parser("simulate", help="autonomous circle-finding loop")
    p.add_argument("--world", help="truth + field JSON")
    p.add_argument("--truth", type=float, nargs=3, default=[0.0, 0.0, 1.5],
                   metavar=("CX", "CY", "R"))
    p.add_argument("--cycles", type=int, default=15)
    p.add_argument("--searcher", choices=["brute", "nes", "both"],
                   default="nes")
    p.add_argument("--selector", choices=["random", "nearest"],
                   default="random")
    p.add_argument("--posterior-samples", type=int, default=25)
    p.add_argument("--out-dir", default=".")
    _add_grid(p)
    _add_nes(p)
    p.set_defaults(func=cmd_robot_simulate)

    maps = sub.add_parser("map").add_subparsers(dest="action", required=True)
    p = maps.add_parser("brute-force", help="dense map of every cell")
    p.add_argument("--landscape")
    p.add_argument("--ensemble", help="posterior ensemble JSON")
    p.add_argument("--world", help="field JSON for --ensemble")
    p.add_argument("--truth", type=float, nargs=3, default=[0.0, 0.0, 1.5],
                   help=argparse.SUPPRESS)
    p.add_argument("--out", required=True)
    _add_grid(p)
    p.set_defaults(func=cmd_map_brute_force)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, TypeError,
            json.JSONDecodeError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
