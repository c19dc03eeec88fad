"""Per-generation statistics, CSV persistence and the experiment sweeps."""

from __future__ import annotations

import csv
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

RUN_CSV_HEADER = (
    "generation", "best_fitness", "mean_fitness", "survivors_total",
    "surv_top", "surv_bottom", "surv_left", "surv_right",
    "episode_steps", "cumulative_steps",
)
SWEEP_CSV_HEADER = ("population", "seeds", "median_generations", "success_rate")
CENSORED = "≥cap"

POPULATION_SIZES = (4, 8, 16, 20, 32, 40)
SCENARIOS = ((1, 4), (2, 8), (4, 20))


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    survivors_total: int
    survivors_per_side: tuple[int, int, int, int]
    episode_steps: int
    cumulative_steps: int

    def __post_init__(self):
        if len(self.survivors_per_side) != 4:
            raise ValueError("survivors_per_side needs four entries (top, bottom, left, right)")
        if self.survivors_total != sum(self.survivors_per_side):
            raise ValueError("survivors_total must equal the per-side sum")


@dataclass(frozen=True)
class SweepRow:
    population_size: int
    seeds_run: int
    median_generations_to_learned: int | float | str
    success_rate: float
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.success_rate <= 1.0:
            raise ValueError("success_rate must lie in [0, 1]")


@dataclass(frozen=True)
class CellResult:
    """Outcome of one training run inside a sweep."""

    n_sides: int
    population: int
    seed: int
    learned_generation: int | None
    generations_run: int
    error: str | None = None


def write_run_csv(stats, path) -> None:
    """Write one row per generation; floats use repr so they parse back exactly."""
    path = Path(path)
    rows = list(stats)
    for a, b in zip(rows, rows[1:]):
        if b.generation <= a.generation:
            raise ValueError("stats rows must be ordered by generation")
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RUN_CSV_HEADER)
            for s in rows:
                w.writerow([
                    s.generation, repr(float(s.best_fitness)), repr(float(s.mean_fitness)),
                    s.survivors_total, *s.survivors_per_side,
                    s.episode_steps, s.cumulative_steps,
                ])
    except OSError as exc:
        raise OSError(f"cannot write run CSV {path}: {exc}") from exc


def read_run_csv(path) -> list[GenerationStats]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != RUN_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        out = []
        for row in reader:
            g, best, mean, total, st, sb, sl, sr, steps, cum = row
            out.append(GenerationStats(
                int(g), float(best), float(mean), int(total),
                (int(st), int(sb), int(sl), int(sr)), int(steps), int(cum),
            ))
    return out


def learned_generation(stats, learned_threshold: float) -> int | None:
    """First generation whose best fitness reached ``learned_threshold``."""
    for s in stats:
        if s.best_fitness >= learned_threshold:
            return s.generation
    return None


def aggregate(population: int, cells, label: str = "") -> SweepRow:
    """Median generations-to-learned and success rate over a set of runs.

    Unlearned or failed runs count as censored at +inf for the median; when
    the median itself is censored the cell reads "≥cap".
    """
    cells = list(cells)
    if not cells:
        raise ValueError("cannot aggregate an empty set of runs")
    gens = [c.learned_generation if c.learned_generation is not None else float("inf")
            for c in cells]
    med = statistics.median(gens)
    if med == float("inf"):
        med = CENSORED
    elif float(med).is_integer():
        med = int(med)
    rate = sum(c.learned_generation is not None for c in cells) / len(cells)
    return SweepRow(population, len(cells), med, rate, label)


def write_sweep_csv(rows, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_CSV_HEADER)
        for r in rows:
            med = r.median_generations_to_learned
            w.writerow([r.population_size, r.seeds_run,
                        med if isinstance(med, (int, str)) else repr(float(med)),
                        repr(float(r.success_rate))])


def read_sweep_csv(path) -> list[SweepRow]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != SWEEP_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for pop, seeds, med, rate in reader:
            if med != CENSORED:
                med = float(med)
                med = int(med) if med.is_integer() else med
            rows.append(SweepRow(int(pop), int(seeds), med, float(rate)))
    return rows


def _run_cell(args) -> CellResult:
    n_sides, population, seed, overrides, csv_path, backend = args
    from . import kernel
    from .trainer import run_training, scenario_configs

    if backend:
        kernel.set_backend(backend)
    try:
        env, trainer, evolution = scenario_configs(
            n_sides, population, seed,
            overrides.get("env"), overrides.get("trainer"), overrides.get("evolution"),
        )
        result = run_training(env, trainer, evolution)
        if csv_path:
            write_run_csv(result.stats, csv_path)
        return CellResult(n_sides, population, seed, result.learned_generation,
                          result.generations_run)
    except Exception as exc:  # recorded per cell, the sweep keeps going
        log.warning("sweep cell sides=%d pop=%d seed=%d failed: %s",
                    n_sides, population, seed, exc)
        return CellResult(n_sides, population, seed, None, 0, f"{type(exc).__name__}: {exc}")


def run_cells(specs, overrides=None, out_dir=None, jobs: int | None = 1,
              backend: str | None = None) -> list[CellResult]:
    """Run (n_sides, population, seed) training cells, optionally in parallel.

    With ``out_dir`` each cell's stats land in ``sides<k>-pop<n>-seed<s>.csv``.
    Results come back in the order of ``specs`` whatever the parallelism.
    """
    overrides = overrides or {}
    tasks = []
    for n_sides, population, seed in specs:
        csv_path = None
        if out_dir is not None:
            csv_path = str(Path(out_dir) / f"sides{n_sides}-pop{population}-seed{seed}.csv")
        tasks.append((n_sides, population, seed, overrides, csv_path, backend))
    if jobs == 1 or len(tasks) <= 1:
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell, tasks))


def population_sweep(sizes=POPULATION_SIZES, seeds=range(5), configs=None,
                     out_dir=None, jobs: int | None = 1, backend: str | None = None,
                     n_sides: int = 4) -> list[SweepRow]:
    """Generations-to-learned per population size (all four sides active by default)."""
    sizes, seeds = list(sizes), list(seeds)
    if not sizes or not seeds:
        raise ValueError("a sweep needs at least one size and one seed")
    bad = [n for n in sizes if n % n_sides]
    if bad:
        raise ValueError(f"population sizes {bad} not divisible by {n_sides} sides")
    specs = [(n_sides, n, s) for n in sizes for s in seeds]
    cells = run_cells(specs, configs, out_dir, jobs, backend)
    return [aggregate(n, [c for c in cells if c.population == n]) for n in sizes]


def scenario_sweep(scenarios=SCENARIOS, seeds=range(5), configs=None,
                   out_dir=None, jobs: int | None = 1,
                   backend: str | None = None) -> list[SweepRow]:
    """Generations-to-learned for (active side count, population) scenarios."""
    scenarios, seeds = [tuple(s) for s in scenarios], list(seeds)
    if not scenarios or not seeds:
        raise ValueError("a sweep needs at least one scenario and one seed")
    bad = [s for s in scenarios if s[1] % s[0]]
    if bad:
        raise ValueError(f"scenarios {bad} have populations not divisible by their side count")
    specs = [(k, n, s) for k, n in scenarios for s in seeds]
    cells = run_cells(specs, configs, out_dir, jobs, backend)
    return [
        aggregate(n, [c for c in cells if (c.n_sides, c.population) == (k, n)],
                  label=f"{k}-side")
        for k, n in scenarios
    ]
