"""Command-line entry point: ``run``, ``bench`` and ``calibrate``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import statistics
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, build_dataclass, load_file, make_run_config, resolve_path
from .core import ModelError
from .scenarios import SCENARIOS, get_scenario
from .scenarios import benchmarks as bm
from .scenarios import sir

log = logging.getLogger("agentsim")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _jsonable(value):
    if dataclasses.is_dataclass(value):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(value).items()}
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


PLOT_TEMPLATE = '''"""Plot {csv_name}.  Requires matplotlib; run from this directory."""
import csv

import matplotlib.pyplot as plt

with open("{csv_name}", newline="") as fh:
    rows = list(csv.reader(fh))
header, data = rows[0], rows[1:]
x = [float(r[0]) for r in data]
for k, name in enumerate(header[1:], start=1):
    plt.plot(x, [float(r[k]) for r in data], label=name)
plt.xlabel(header[0])
plt.legend()
plt.savefig("{png_name}")
'''


def write_plot_script(csv_path: Path) -> Path:
    script = csv_path.with_name(f"plot_{csv_path.stem}.py")
    script.write_text(PLOT_TEMPLATE.format(csv_name=csv_path.name, png_name=csv_path.stem + ".png"))
    return script


# ---------------------------------------------------------------------- run
def cmd_run(args) -> int:
    if args.scenario not in SCENARIOS:
        print(f"unknown scenario {args.scenario!r}; available scenarios:", file=sys.stderr)
        for name in sorted(SCENARIOS):
            print(f"  {name}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = make_run_config(args.scenario, args.config, args.seed, args.threads, args.steps, args.out, args.set)
        spec = get_scenario(cfg.scenario)
        params = spec.make_params(cfg.parameters)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    steps = cfg.steps if cfg.steps is not None else spec.default_steps(params)
    cfg.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = spec.run(params, seed=cfg.seed, threads=cfg.threads, steps=steps)
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    wall = time.perf_counter() - t0
    series_path = cfg.out / f"{cfg.scenario}_timeseries.csv"
    result.series.to_csv(series_path)
    artifacts = [series_path, *result.write_artifacts(cfg.out)]
    artifacts += [write_plot_script(p) for p in list(artifacts) if p.suffix == ".csv"]
    manifest_path = cfg.out / "manifest.json"
    manifest = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "steps": steps,
        "config": str(cfg.config_path) if cfg.config_path else None,
        "overrides": list(args.set),
        "parameters": _jsonable(params),
        "wall_time_seconds": wall,
        "population_trajectory": [list(t) for t in result.sim.population_trajectory],
        "artifacts": [str(p) for p in artifacts] + [str(manifest_path)],
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"{cfg.scenario}: {steps} steps, {result.sim.population} agents; wrote {len(artifacts) + 1} files to {cfg.out}")
    return EXIT_OK


# -------------------------------------------------------------------- bench
def parse_threads(text: str) -> list[int]:
    try:
        threads = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"invalid thread list {text!r}") from None
    if not threads or min(threads) < 1:
        raise ConfigError("thread counts must be >= 1")
    return threads


def run_bench(name: str, threads: list[int], reps: int, scale: int, steps: int, seed: int = 0) -> list[dict]:
    """Median wall time of ``steps`` steps per thread count; setup is not timed."""
    cores = os.cpu_count() or 1
    rows = []
    for t in threads:
        if t > cores:
            warnings.warn(f"{t} threads requested but only {cores} cores available; running anyway")
        times, agents = [], 0
        for _ in range(reps):
            sim, _, _ = bm.build_benchmark(name, scale, seed=seed, threads=t)
            agents = sim.population
            t0 = time.perf_counter()
            sim.simulate(steps)
            times.append(time.perf_counter() - t0)
            sim.close()
        rows.append({"threads": t, "repetitions": reps, "agents": agents, "median_seconds": statistics.median(times)})
    base = next((r["median_seconds"] for r in rows if r["threads"] == 1), rows[0]["median_seconds"])
    for r in rows:
        r["speedup"] = base / r["median_seconds"]
    return rows


def cmd_bench(args) -> int:
    if args.name not in bm.BENCHMARKS:
        print(f"unknown benchmark {args.name!r}; valid: {', '.join(sorted(bm.BENCHMARKS))}", file=sys.stderr)
        return EXIT_USAGE
    try:
        threads = parse_threads(args.threads)
        if args.reps < 1 or args.scale < 1 or args.steps < 1:
            raise ConfigError("reps, scale and steps must be >= 1")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rows = run_bench(args.name, threads, args.reps, args.scale, args.steps, args.seed)
    out = Path(args.out or f"bench_{args.name}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, ["threads", "repetitions", "agents", "median_seconds", "speedup"])
        w.writeheader()
        w.writerows(rows)
    write_plot_script(out)
    for r in rows:
        print(f"threads={r['threads']} median={r['median_seconds']:.4f}s speedup={r['speedup']:.2f}")
    return EXIT_OK


# ---------------------------------------------------------------- calibrate
BOUND_NAMES = ("infection_radius", "infection_probability", "max_move")


def read_targets(path) -> tuple[sir.SirParams, tuple, dict]:
    data = load_file(resolve_path(path)) if path else {}
    targets = dict(data.get("scenario", {}).get("sir", {}))
    targets.update(data.get("targets", {}))
    disease = targets.pop("disease", "measles")
    params = build_dataclass(sir.SirParams, {**dataclasses.asdict(sir.SirParams.for_disease(disease)), **targets})
    bounds_table = data.get("bounds")
    if bounds_table is None:
        bounds = sir.CALIBRATION_BOUNDS
    else:
        if not bounds_table:
            raise ConfigError("calibration bounds are empty")
        missing = [n for n in BOUND_NAMES if n not in bounds_table]
        if missing:
            raise ConfigError(f"missing bounds for {missing}")
        bounds = []
        for n in BOUND_NAMES:
            b = bounds_table[n]
            if not isinstance(b, list) or len(b) != 2 or not float(b[0]) < float(b[1]):
                raise ConfigError(f"bounds for {n} must be [low, high] with low < high")
            bounds.append((float(b[0]), float(b[1])))
        bounds = tuple(bounds)
    pso = dict(data.get("pso", {}))
    return params, bounds, pso


def write_fitted(path: Path, params: sir.SirParams, loss: float, pso: dict) -> None:
    lines = ["# fitted spatial SIR parameters; load with: run sir --config <this file>", "[scenario.sir]"]
    for k, v in dataclasses.asdict(params).items():
        lines.append(f"{k} = {json.dumps(v)}")
    lines += ["", "[calibration]", f"loss = {loss!r}"]
    for k, v in pso.items():
        lines.append(f"{k} = {json.dumps(v)}")
    path.write_text("\n".join(lines) + "\n")


def cmd_calibrate(args) -> int:
    if args.scenario != "sir":
        print(f"calibration is only available for 'sir', not {args.scenario!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        params, bounds, pso = read_targets(args.targets)
        settings = {
            "swarm_size": int(pso.get("swarm_size", 30)),
            "iterations": int(pso.get("iterations", 100)),
            "repetitions": int(pso.get("repetitions", 10)),
            "seed": int(pso.get("seed", 0)),
        }
        ceiling = float(pso.get("loss_ceiling", 0.05))
        initial = [list(x) for x in pso.get("initial", [])]
        for key in ("swarm_size", "iterations", "repetitions", "seed"):
            value = getattr(args, key)
            if value is not None:
                settings[key] = value
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        fitted, result = sir.calibrate(params, bounds, initial=initial, threads=args.threads, **settings)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_fitted(out, fitted, result.best_loss, {**settings, "loss_ceiling": ceiling})
    report = out.with_name(out.stem + "_report.csv")
    with open(report, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", *BOUND_NAMES, "loss"])
        for k, (x, y) in enumerate(zip(result.positions, result.history)):
            w.writerow([k, *(repr(float(v)) for v in x), repr(float(y))])
    print(f"best loss {result.best_loss:.6g} at radius={fitted.infection_radius:.4f} "
          f"probability={fitted.infection_probability:.4f} max_move={fitted.max_move:.4f}")
    if result.best_loss > ceiling:
        print(f"loss {result.best_loss:.6g} exceeds ceiling {ceiling}; best-so-far saved to {out}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


# --------------------------------------------------------------------- main
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentsim", description="Agent-based simulation scenarios.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("scenario")
    run.add_argument("--config")
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int)
    run.add_argument("--steps", type=int)
    run.add_argument("--out")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="thread-scaling benchmark")
    bench.add_argument("name")
    bench.add_argument("--threads", default="1")
    bench.add_argument("--reps", type=int, default=3)
    bench.add_argument("--scale", type=int, default=1)
    bench.add_argument("--steps", type=int, default=10)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out")
    bench.set_defaults(func=cmd_bench)

    cal = sub.add_parser("calibrate", help="fit spatial SIR parameters to the ODE")
    cal.add_argument("scenario")
    cal.add_argument("--targets")
    cal.add_argument("--out", required=True)
    cal.add_argument("--threads", type=int, default=1)
    cal.add_argument("--swarm-size", dest="swarm_size", type=int)
    cal.add_argument("--iterations", type=int)
    cal.add_argument("--repetitions", type=int)
    cal.add_argument("--seed", type=int)
    cal.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
