"""Command-line entry point: ``quadpong train | sweep | replay``.

Configuration precedence, lowest to highest: built-in defaults, the JSON
document given by ``--config``, then individual flags.  The config document
has up to three sections, ``env``, ``evolution`` and ``trainer``, holding the
fields of the matching config classes.  A run manifest is itself a valid
config document, so ``--config run-.../manifest.json`` repeats a run.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, kernel
from .env import SCENARIO_SIDES, EnvConfig, Side, trace_record
from .evolution import EvolutionConfig
from .genome import dumps, loads
from .metrics import (
    POPULATION_SIZES,
    SCENARIOS,
    population_sweep,
    scenario_sweep,
    write_run_csv,
    write_sweep_csv,
)
from .trainer import TrainerConfig, evaluate_sustained, run_training, validate_configs

log = logging.getLogger("quadpong")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
MANIFEST_NAME = "manifest.json"
STATS_NAME = "stats.csv"
SWEEP_NAME = "sweep.csv"
MANIFEST_KEYS = {"command", "seed", "artifacts", "version", "sweep", "backend"}


class UsageError(Exception):
    """Bad flags, config or input files; maps to exit code 2."""


@dataclass
class RunManifest:
    command: str
    seed: int
    env: dict
    evolution: dict
    trainer: dict
    artifacts: dict = field(default_factory=dict)
    version: str = __version__
    sweep: dict | None = None

    def write(self, path: Path) -> None:
        data = asdict(self)
        if data["sweep"] is None:
            del data["sweep"]
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def champion_filename(side: Side) -> str:
    return f"champion-{side.name.lower()}.json"


def _load_config_document(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must be a JSON object")
    unknown = set(data) - {"env", "evolution", "trainer"} - MANIFEST_KEYS
    if unknown:
        raise UsageError(f"config {path}: unknown sections {sorted(unknown)}")
    return data


def resolve_configs(args) -> tuple[EnvConfig, EvolutionConfig, TrainerConfig]:
    """Merge defaults, the config document and flags into validated configs."""
    doc = _load_config_document(args.config)
    env_d = dict(doc.get("env", {}))
    evo_d = dict(doc.get("evolution", {}))
    tr_d = dict(doc.get("trainer", {}))
    if "seed" in doc and "seed" not in tr_d:
        tr_d["seed"] = doc["seed"]

    if getattr(args, "sides", None) is not None:
        env_d["active_sides"] = [s.name for s in SCENARIO_SIDES[args.sides]]
    if getattr(args, "seed", None) is not None:
        tr_d["seed"] = args.seed
    if getattr(args, "generations", None) is not None:
        tr_d["max_generations"] = args.generations
    if getattr(args, "max_steps", None) is not None:
        tr_d["max_steps_per_episode"] = args.max_steps

    try:
        env = EnvConfig.from_dict(env_d)
        n_sides = len(env.active_sides)
        population = getattr(args, "population", None)
        if population is not None:
            if population < 1 or population % n_sides:
                raise UsageError(
                    f"population {population} is not divisible by {n_sides} active sides"
                )
            evo_d["population_size"] = population
            tr_d["n_per_side"] = population // n_sides
        elif "population_size" in evo_d and "n_per_side" not in tr_d:
            if evo_d["population_size"] % n_sides:
                raise UsageError(
                    f"population {evo_d['population_size']} is not divisible by {n_sides} active sides"
                )
            tr_d["n_per_side"] = evo_d["population_size"] // n_sides
        elif "n_per_side" in tr_d and "population_size" not in evo_d:
            evo_d["population_size"] = tr_d["n_per_side"] * n_sides
        elif "population_size" not in evo_d and "n_per_side" not in tr_d:
            tr_d["n_per_side"] = max(1, EvolutionConfig().population_size // n_sides)
            evo_d["population_size"] = tr_d["n_per_side"] * n_sides
        evolution = EvolutionConfig.from_dict(evo_d)
        trainer = TrainerConfig.from_dict(tr_d)
        validate_configs(env, trainer, evolution)
    except UsageError:
        raise
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    return env, evolution, trainer


def _run_dir(out: str | None, seed: int) -> Path:
    stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    base = Path(out) if out else Path.cwd()
    path = base / f"run-{seed}-{stamp}"
    suffix = 1
    while path.exists():
        path = base / f"run-{seed}-{stamp}-{suffix}"
        suffix += 1
    path.mkdir(parents=True)
    return path


def _select_backend(name: str | None) -> None:
    if name is None:
        return
    try:
        kernel.set_backend(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_train(args) -> int:
    env, evolution, trainer = resolve_configs(args)
    _select_backend(args.backend)
    run_dir = _run_dir(args.out, trainer.seed)
    result = run_training(env, trainer, evolution)

    stats_path = run_dir / STATS_NAME
    write_run_csv(result.stats, stats_path)
    artifacts = {"stats": STATS_NAME, "champions": {}}
    for side, genome in sorted(result.champions.items()):
        name = champion_filename(side)
        (run_dir / name).write_text(dumps(genome) + "\n", encoding="utf-8")
        artifacts["champions"][side.name] = name
    RunManifest(
        command="train",
        seed=trainer.seed,
        env=env.to_dict(),
        evolution=asdict(evolution),
        trainer=asdict(trainer),
        artifacts=artifacts,
    ).write(run_dir / MANIFEST_NAME)

    status = (f"converged at generation {result.convergence_generation}"
              if result.converged else "generation cap reached")
    learned = result.learned_generation
    print(f"{status}; learned generation: {learned if learned is not None else 'none'}; "
          f"cumulative steps: {result.cumulative_steps}")
    print(run_dir)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    if args.jobs is not None and args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    doc = _load_config_document(args.config)
    overrides = {k: dict(doc.get(k, {})) for k in ("env", "evolution", "trainer")}
    overrides["env"].pop("active_sides", None)
    overrides["evolution"].pop("population_size", None)
    overrides["trainer"].pop("n_per_side", None)
    overrides["trainer"].pop("seed", None)
    if args.generations is not None:
        overrides["trainer"]["max_generations"] = args.generations
    try:  # validate the shared overrides once, before any work starts
        EnvConfig.from_dict(overrides["env"])
        EvolutionConfig.from_dict(overrides["evolution"])
        TrainerConfig.from_dict(overrides["trainer"])
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    _select_backend(args.backend)

    seeds = list(range(args.seed, args.seed + args.seeds))
    jobs = args.jobs or os.cpu_count() or 1
    run_dir = _run_dir(args.out, args.seed)
    cells_dir = run_dir / "runs"
    cells_dir.mkdir()
    if args.mode == "population":
        rows = population_sweep(POPULATION_SIZES, seeds, overrides, cells_dir, jobs, args.backend)
    else:
        rows = scenario_sweep(SCENARIOS, seeds, overrides, cells_dir, jobs, args.backend)
    write_sweep_csv(rows, run_dir / SWEEP_NAME)
    RunManifest(
        command="sweep",
        seed=args.seed,
        env=overrides["env"],
        evolution=overrides["evolution"],
        trainer=overrides["trainer"],
        artifacts={"sweep": SWEEP_NAME, "runs": "runs"},
        sweep={"mode": args.mode, "seeds": seeds},
    ).write(run_dir / MANIFEST_NAME)
    for r in rows:
        print(f"{r.label or r.population_size}: median generations "
              f"{r.median_generations_to_learned}, success rate {r.success_rate:.2f}")
    print(run_dir)
    return EXIT_OK


def load_champions(directory: Path, sides) -> dict[Side, object]:
    """Read ``champion-<side>.json`` for each side; report every bad file at once."""
    if not directory.is_dir():
        raise UsageError(f"champions directory {directory} does not exist")
    champions, problems = {}, []
    for side in sides:
        path = directory / champion_filename(side)
        if not path.exists():
            problems.append(f"missing champion for {side.name}: {path}")
            continue
        try:
            champions[side] = loads(path.read_text(encoding="utf-8"))
        except (ValueError, KeyError, TypeError) as exc:
            problems.append(f"corrupt champion file {path}: {exc}")
    if problems:
        raise UsageError("\n".join(problems))
    return champions


def cmd_replay(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    directory = Path(args.champions)
    if args.config is None and (directory / MANIFEST_NAME).exists():
        args.config = str(directory / MANIFEST_NAME)
    env, _, trainer = resolve_configs(args)
    _select_backend(args.backend)
    champions = load_champions(directory, env.active_sides)
    seed = args.seed if args.seed is not None else trainer.seed
    rng = random.Random(seed)

    on_step = None
    out = None
    if args.trace is not None:
        out = sys.stdout if args.trace == "-" else open(args.trace, "w", encoding="utf-8")

        def on_step(trial, world, events):
            out.write(trace_record(world, events) + "\n")

    try:
        fraction = evaluate_sustained(champions, env, trainer, args.trials, rng, on_step=on_step)
    finally:
        if out is not None and out is not sys.stdout:
            out.close()
    summary = f"sustained {fraction:.3f} of {args.trials} trials ({trainer.max_steps_per_episode} steps)"
    print(summary, file=sys.stderr if args.trace == "-" else sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadpong", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every generation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config document or run manifest")
        p.add_argument("--backend", choices=("c", "python"), help="episode kernel")

    def seed_type(text):
        value = int(text, 0)
        if not 0 <= value < 2**64:
            raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
        return value

    train = sub.add_parser("train", help="run one training run")
    common(train)
    train.add_argument("--seed", type=seed_type)
    train.add_argument("--population", type=int)
    train.add_argument("--sides", type=int, choices=(1, 2, 4))
    train.add_argument("--generations", type=int)
    train.add_argument("--max-steps", type=int, help="step cap per episode")
    train.add_argument("--out", help="parent directory for run-<seed>-<timestamp>/")
    train.set_defaults(func=cmd_train)

    sweep = sub.add_parser("sweep", help="population-size or scenario experiment")
    common(sweep)
    sweep.add_argument("--mode", choices=("population", "scenario"), required=True)
    sweep.add_argument("--seeds", type=int, required=True, help="number of seeds per cell")
    sweep.add_argument("--seed", type=seed_type, default=0, help="first seed")
    sweep.add_argument("--generations", type=int)
    sweep.add_argument("--jobs", type=int, help="parallel runs (default: CPU count)")
    sweep.add_argument("--out", help="parent directory for run-<seed>-<timestamp>/")
    sweep.set_defaults(func=cmd_sweep)

    replay = sub.add_parser("replay", help="test champions for sustained play")
    common(replay)
    replay.add_argument("--champions", required=True, help="directory with champion-<side>.json")
    replay.add_argument("--trials", type=int, default=10)
    replay.add_argument("--seed", type=seed_type)
    replay.add_argument("--sides", type=int, choices=(1, 2, 4))
    replay.add_argument("--max-steps", type=int, help="step cap per episode")
    replay.add_argument("--trace", nargs="?", const="-", metavar="PATH",
                        help="write the step trace as JSON lines (stdout when no path)")
    replay.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"quadpong {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # anything after validation is a runtime failure
        print(f"quadpong {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
