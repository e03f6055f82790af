"""Command-line entry point.

Subcommands: ``optimize`` (one queue snapshot -> Pareto front + plan),
``simulate`` (scenario -> metrics + time series, optional controller
comparison), ``pipeline`` (threaded or simulated stream pipeline ->
emitted plans + latency ledger).

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 interrupted.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__, nsga2, simulator
from .core import (
    ConfigError,
    IntersectionConfig,
    QueueState,
    canonical_json,
    dump_json,
    load_intersection_config,
    validate_plan,
)
from .pipeline import AllCamerasStale, PipelineConfig, run_pipeline

log = logging.getLogger("greenlight")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_INTERRUPTED = 3


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_manifest(
    out: Path, command: str, config_snapshot: dict, seeds: list[int],
    artifacts: list[str], started_at: str,
) -> None:
    manifest = {
        "command": command,
        "config": config_snapshot,
        "seeds": seeds,
        "artifacts": sorted(artifacts),
        "tool_version": __version__,
        "started_at": started_at,
        "finished_at": _utcnow(),
    }
    dump_json(manifest, out / "manifest.json")


def _load_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return raw


def _parse_weights(s: str) -> tuple[float, float]:
    parts = s.split(",")
    if len(parts) != 2:
        raise ConfigError("--weights expects two comma-separated numbers")
    return float(parts[0]), float(parts[1])


def cmd_optimize(args: argparse.Namespace) -> int:
    started = _utcnow()
    raw = _load_json(args.config)
    if "intersection" in raw:
        cfg = IntersectionConfig.from_dict(raw["intersection"])
        params_dict = dict(raw.get("optimizer", {}))
        policy = raw.get("policy", "knee")
    else:
        cfg = IntersectionConfig.from_dict(raw)
        params_dict = {}
        policy = "knee"
    if args.policy:
        policy = args.policy
    if args.seed is not None:
        params_dict["rng_seed"] = args.seed
    params = nsga2.OptimizerParams.from_dict(params_dict)
    queue = QueueState.from_dict(_load_json(args.queue))
    if queue.num_links != cfg.num_links:
        raise ConfigError(
            f"queue covers {queue.num_links} links, config has {cfg.num_links}"
        )

    front = nsga2.run(queue, cfg, params, guidance_pad_s=args.pad)
    weights = _parse_weights(args.weights) if args.weights else (0.5, 0.5)
    plan = nsga2.select_operating_point(
        front, policy, cfg, guidance_pad_s=args.pad, weights=weights
    )
    chosen = next(i for i in front if i.genome == plan.greens)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json([ind.to_dict() for ind in front], out / "pareto_front.json")
    dump_json(plan.to_dict(), out / "selected_plan.json")
    _write_manifest(
        out, "optimize",
        {
            "intersection": cfg.to_dict(),
            "optimizer": {
                "population_size": params.population_size,
                "generations": params.generations,
                "crossover_prob": params.crossover_prob,
                "mutation_prob": params.mutation_prob,
                "tournament_size": params.tournament_size,
                "rng_seed": params.rng_seed,
            },
            "policy": policy,
            "guidance_pad_s": args.pad,
            "queue": queue.to_dict(),
        },
        [params.rng_seed],
        ["pareto_front.json", "selected_plan.json"],
        started,
    )
    print(
        f"selected plan greens={list(plan.greens)} "
        f"f1={chosen.objectives.f1} f2={chosen.objectives.f2} "
        f"({len(front)} front members)"
    )
    return EXIT_OK


def _build_controller(spec: dict, cfg: IntersectionConfig,
                      options: simulator.SimOptions):
    kind = spec.get("type")
    pad = options.guidance_pad_s
    if kind == "fixed":
        return simulator.FixedTimeController(
            spec["greens"], cfg, guidance_pad_s=pad, order=spec.get("order")
        )
    if kind == "adaptive":
        params = nsga2.OptimizerParams.from_dict(spec.get("optimizer", {}))
        return simulator.AdaptiveController(
            cfg, params,
            policy=spec.get("policy", "knee"),
            guidance_pad_s=pad,
            weights=tuple(spec.get("weights", (0.5, 0.5))),
        )
    raise ConfigError(f"unknown controller type {kind!r}")


def _write_timeseries(path: Path, steps: list[simulator.TimeStep], L: int) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t"] + [f"queue_link_{i}" for i in range(L)]
            + ["active_link", "phase_state"]
        )
        for s in steps:
            writer.writerow([s.t] + s.queues + [s.active_link, s.phase_state])


def cmd_simulate(args: argparse.Namespace) -> int:
    started = _utcnow()
    scenario_path = Path(args.scenario)
    raw = _load_json(scenario_path)

    inter = raw.get("intersection")
    if isinstance(inter, str):
        p = Path(inter)
        if not p.is_absolute():
            p = scenario_path.parent / p
        cfg = load_intersection_config(p)
    elif isinstance(inter, dict):
        cfg = IntersectionConfig.from_dict(inter)
    else:
        raise ConfigError("scenario needs an 'intersection' entry")

    if "demand" not in raw:
        raise ConfigError("scenario needs a 'demand' entry")
    demand = simulator.ArrivalModel.from_dict(raw["demand"])
    horizon = int(raw.get("horizon_s", 0))
    if horizon < 1:
        raise ConfigError("horizon_s must be >= 1")
    options = simulator.SimOptions.from_dict(raw.get("options", {}))
    seeds = [int(s) for s in raw.get("seeds", [0])]
    if args.seed is not None:
        seeds = [args.seed]

    ctrl_specs = raw.get("controllers", [])
    if not ctrl_specs:
        raise ConfigError("scenario needs at least one controller")
    controllers = {
        spec.get("name", f"controller_{i}"): _build_controller(spec, cfg, options)
        for i, spec in enumerate(ctrl_specs)
    }

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: list[str] = []

    if args.compare:
        report = simulator.compare_controllers(
            cfg, demand, controllers, horizon, seeds, options
        )
        dump_json(report, out / "comparison.json")
        artifacts.append("comparison.json")
        base = next(iter(controllers))
        print(f"compared {len(controllers)} controllers over {len(seeds)} seeds "
              f"(baseline: {base})")
    else:
        name = next(iter(controllers))
        demand_seeded = simulator.ArrivalModel(
            demand.motorized_rates, demand.non_motorized_rates, rng_seed=seeds[0]
        )
        metrics, steps = simulator.simulate(
            cfg, demand_seeded, controllers[name], horizon, options
        )
        dump_json(metrics.to_dict(), out / "metrics.json")
        _write_timeseries(out / "timeseries.csv", steps, cfg.num_links)
        artifacts += ["metrics.json", "timeseries.csv"]
        print(
            f"{name}: overall_avg={metrics.overall_avg:.3f} "
            f"overall_max={metrics.overall_max} "
            f"throughput={metrics.throughput_total}"
        )

    _write_manifest(
        out, "simulate",
        {"scenario": raw, "intersection": cfg.to_dict()},
        seeds, artifacts, started,
    )
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    started = _utcnow()
    cfg = PipelineConfig.load(args.config)
    if args.timing:
        cfg.timing = args.timing
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.optimizer = nsga2.OptimizerParams(
            population_size=cfg.optimizer.population_size,
            generations=cfg.optimizer.generations,
            crossover_prob=cfg.optimizer.crossover_prob,
            mutation_prob=cfg.optimizer.mutation_prob,
            tournament_size=cfg.optimizer.tournament_size,
            rng_seed=args.seed,
        )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_pipeline(cfg, args.cycles)

    with (out / "plans.ndjson").open("w") as fh:
        for c in result.cycles:
            fh.write(canonical_json({
                "cycle_id": c.cycle_id,
                "plan": c.plan.to_dict(),
                "objectives": c.objectives,
                "queue": c.queue.to_dict(),
                "stale_links": c.stale_links,
            }) + "\n")
    with (out / "latency_ledger.ndjson").open("w") as fh:
        for entry in result.breakdown.cycles:
            fh.write(canonical_json(entry.to_dict()) + "\n")
    artifacts = ["plans.ndjson", "latency_ledger.ndjson"]
    if args.report:
        dump_json(result.breakdown.summary(), out / "latency_report.json")
        artifacts.append("latency_report.json")

    _write_manifest(
        out, "pipeline",
        {"pipeline": {
            "intersection": cfg.intersection.to_dict(),
            "cameras": cfg.cameras,
            "detector": cfg.detector,
            "window_ms": cfg.window_ms,
            "timing": cfg.timing,
            "policy": cfg.policy,
            "seed": cfg.seed,
        }},
        [cfg.seed], artifacts, started,
    )
    summary = result.breakdown.summary()
    print(
        f"{len(result.cycles)} cycles, T_latency={summary['t_latency_ms']:.1f} ms, "
        f"{result.skipped_cycles} skipped"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greenlight",
        description="Adaptive traffic-signal optimization, simulation, and "
                    "stream-pipeline tooling.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="optimize one queue snapshot")
    p_opt.add_argument("--config", required=True,
                       help="intersection config JSON (optionally with "
                            "'optimizer' and 'policy' sections)")
    p_opt.add_argument("--queue", required=True, help="QueueState JSON")
    p_opt.add_argument("--seed", type=int, default=None)
    p_opt.add_argument("--out", default="out_optimize")
    p_opt.add_argument("--policy", default=None,
                       choices=["knee", "weighted", "min_f1", "min_f2"])
    p_opt.add_argument("--weights", default=None,
                       help="w1,w2 for the weighted policy")
    p_opt.add_argument("--pad", type=int, default=0,
                       help="guidance padding seconds around each green")
    p_opt.set_defaults(func=cmd_optimize)

    p_sim = sub.add_parser("simulate", help="run a simulation scenario")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", default="out_simulate")
    p_sim.add_argument("--compare", action="store_true",
                       help="run every controller on paired seeds")
    p_sim.set_defaults(func=cmd_simulate)

    p_pipe = sub.add_parser("pipeline", help="run the stream pipeline")
    p_pipe.add_argument("--config", required=True, help="pipeline config JSON")
    p_pipe.add_argument("--cycles", type=int, default=5)
    p_pipe.add_argument("--seed", type=int, default=None)
    p_pipe.add_argument("--out", default="out_pipeline")
    p_pipe.add_argument("--report", action="store_true",
                        help="write the latency summary report")
    p_pipe.add_argument("--timing", default=None, choices=["real", "sim"])
    p_pipe.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED
    except (AllCamerasStale, OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
