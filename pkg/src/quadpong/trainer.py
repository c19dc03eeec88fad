"""Episode orchestration and the generational training loop.

A generation is one episode: the whole population is dealt out across the
active sides, plays until a side is emptied (or a cap/threshold is hit),
and the resulting fitness values drive selection for the next generation.
"""

from __future__ import annotations

import enum
import logging
import math
import random
from dataclasses import dataclass, field, fields

from . import kernel
from .env import ALL_SIDES, Ball, EnvConfig, Side, sample_ball
from .evolution import (
    EvolutionConfig,
    InnovationRegistry,
    Population,
    initial_population,
    next_generation,
)
from .genome import Genome
from .kernel_types import TERM_BREACHED, TERM_CAP, TERM_THRESHOLD, fitness_of
from .metrics import GenerationStats

log = logging.getLogger(__name__)


class IndivisiblePopulation(ValueError):
    pass


class ConfigError(ValueError):
    pass


class Termination(enum.Enum):
    SIDE_BREACHED = "side_breached"
    STEP_CAP_REACHED = "step_cap_reached"
    FITNESS_THRESHOLD_REACHED = "fitness_threshold_reached"


_TERMINATION = {
    TERM_BREACHED: Termination.SIDE_BREACHED,
    TERM_THRESHOLD: Termination.FITNESS_THRESHOLD_REACHED,
    TERM_CAP: Termination.STEP_CAP_REACHED,
}


@dataclass(frozen=True)
class TrainerConfig:
    n_per_side: int = 5
    hit_reward: float = 10.0
    miss_penalty: float = 5.0
    survival_reward_per_step: float = 1.0
    fitness_threshold: float = 100000.0
    learned_threshold: float = 25000.0
    max_generations: int = 100
    max_steps_per_episode: int = 200000
    seed: int = 0
    threshold_mode: str = "agent"
    reassign_sides: bool = True

    def __post_init__(self):
        if self.n_per_side < 1:
            raise ConfigError("n_per_side must be positive")
        if self.hit_reward <= 0 or self.miss_penalty <= 0:
            raise ConfigError("hit_reward and miss_penalty must be positive")
        if self.survival_reward_per_step < 0:
            raise ConfigError("survival_reward_per_step must be non-negative")
        if self.fitness_threshold <= 0 or self.learned_threshold <= 0:
            raise ConfigError("thresholds must be positive")
        if self.max_generations < 0 or self.max_steps_per_episode < 1:
            raise ConfigError("max_generations >= 0 and max_steps_per_episode >= 1 required")
        if self.threshold_mode not in ("agent", "mean"):
            raise ConfigError("threshold_mode must be 'agent' or 'mean'")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown trainer settings: {sorted(unknown)}")
        return cls(**data)

    def fitness(self, hits: int, misses: int, steps_alive: int) -> float:
        return fitness_of(hits, misses, steps_alive, self.hit_reward,
                          self.miss_penalty, self.survival_reward_per_step)


@dataclass
class AgentRecord:
    """One paddle's controller and its episode bookkeeping.

    ``genome`` is normally a Genome; a plain callable
    ``controller(world, paddle, config) -> raw action`` is also accepted for
    scripted baselines and runs on the Python backend.
    """

    genome: Genome
    side: Side
    fitness: float = 0.0
    alive: bool = True
    hits: int = 0
    misses: int = 0
    steps_alive: int = 0


@dataclass
class EpisodeResult:
    steps_run: int
    terminated_by: Termination
    breached_side: Side | None
    records: list[AgentRecord]
    survivors_per_side: dict[Side, int]
    final_ball: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    @property
    def fitness(self) -> list[float]:
        return [r.fitness for r in self.records]


@dataclass
class RunResult:
    generations_run: int
    converged: bool
    convergence_generation: int | None
    learned_generation: int | None
    champions: dict[Side, Genome]
    stats: list[GenerationStats] = field(default_factory=list)
    final_population: Population | None = None

    @property
    def cumulative_steps(self) -> int:
        return self.stats[-1].cumulative_steps if self.stats else 0


def oracle_controller(world, paddle, config) -> float:
    """Scripted upper bound: steer straight at the ball's track coordinate.

    Unlike a network it sees signed positions, so it never loses the ball.
    """
    along = world.ball.x if paddle.side.horizontal else world.ball.y
    return math.tanh(along - paddle.track)


def frozen_controller(world, paddle, config) -> float:
    """Never moves."""
    return 0.0


def assign_sides(population: Population | list[Genome], active_sides, rng) -> list[AgentRecord]:
    """Shuffle the genomes and deal equal shares to each active side.

    The record order is side-major (sides in Top, Bottom, Left, Right order);
    a record's index is its paddle owner id during the episode.
    """
    members = list(population.members if isinstance(population, Population) else population)
    sides = sorted({Side.parse(s) for s in active_sides})
    if not sides or len(members) % len(sides):
        raise IndivisiblePopulation(
            f"population of {len(members)} cannot be split evenly over {len(sides)} sides"
        )
    order = list(range(len(members)))
    rng.shuffle(order)
    per_side = len(members) // len(sides)
    return [
        AgentRecord(members[order[k]], sides[k // per_side])
        for k in range(len(members))
    ]


def _fixed_assignment(population: Population, active_sides) -> list[AgentRecord]:
    sides = sorted({Side.parse(s) for s in active_sides})
    members = population.members
    if len(members) % len(sides):
        raise IndivisiblePopulation(
            f"population of {len(members)} cannot be split evenly over {len(sides)} sides"
        )
    per_side = len(members) // len(sides)
    return [AgentRecord(g, sides[k // per_side]) for k, g in enumerate(members)]


def run_episode(records: list[AgentRecord], env_config: EnvConfig,
                trainer_config: TrainerConfig, rng, ball: Ball | None = None,
                threshold: float | None = None, backend: str | None = None,
                on_step=None) -> EpisodeResult:
    """Play one episode and write fitness, hit/miss counts and alive flags into ``records``.

    ``ball`` overrides the random launch; ``threshold`` overrides the
    configured fitness threshold (``math.inf`` disables it).
    """
    if not records:
        raise ValueError("run_episode needs at least one agent")
    present = {r.side for r in records}
    missing = [s.name for s in env_config.active_sides if s not in present]
    if missing:
        raise ConfigError(f"active sides without paddles: {missing}")
    if any(not env_config.is_active(r.side) for r in records):
        raise ConfigError("agent assigned to an inactive side")
    if ball is None:
        ball = sample_ball(env_config, rng)
    tc = trainer_config
    networks, controllers = [], None
    for i, r in enumerate(records):
        if isinstance(r.genome, Genome):
            networks.append(r.genome.network())
        else:
            networks.append(None)
            controllers = controllers or [None] * len(records)
            controllers[i] = r.genome
    result = kernel.run_episode(
        env_config,
        [int(r.side) for r in records],
        networks,
        (ball.x, ball.y, ball.vx, ball.vy),
        tc.hit_reward,
        tc.miss_penalty,
        tc.survival_reward_per_step,
        tc.fitness_threshold if threshold is None else threshold,
        tc.threshold_mode == "mean",
        tc.max_steps_per_episode,
        backend=backend,
        on_step=on_step,
        controllers=controllers,
    )
    survivors = {s: 0 for s in ALL_SIDES}
    for i, r in enumerate(records):
        r.hits = result.hits[i]
        r.misses = result.misses[i]
        r.steps_alive = result.survived[i]
        r.alive = result.alive[i]
        r.fitness = tc.fitness(r.hits, r.misses, r.steps_alive)
        if r.alive:
            survivors[r.side] += 1
    breached = Side(result.breached_side) if result.breached_side >= 0 else None
    return EpisodeResult(result.steps, _TERMINATION[result.termination], breached,
                         records, survivors, result.ball)


def validate_configs(env_config: EnvConfig, trainer_config: TrainerConfig,
                     evolution_config: EvolutionConfig) -> None:
    n_sides = len(env_config.active_sides)
    expected = n_sides * trainer_config.n_per_side
    if evolution_config.population_size != expected:
        raise ConfigError(
            f"population_size {evolution_config.population_size} != "
            f"{n_sides} sides x {trainer_config.n_per_side} per side"
        )


def run_training(env_config: EnvConfig, trainer_config: TrainerConfig,
                 evolution_config: EvolutionConfig, on_generation=None) -> RunResult:
    """Evolve until some agent reaches ``fitness_threshold`` or the generation cap.

    Generations are numbered from 1.  ``learned_generation`` records the first
    generation whose best fitness reached ``learned_threshold``.
    """
    validate_configs(env_config, trainer_config, evolution_config)
    tc = trainer_config
    rng = random.Random(tc.seed)
    registry = InnovationRegistry()
    population = initial_population(evolution_config, registry, rng)

    stats: list[GenerationStats] = []
    champions: dict[Side, Genome] = {}
    cumulative = 0
    converged = False
    convergence_generation = learned_generation = None

    for generation in range(1, tc.max_generations + 1):
        if tc.reassign_sides:
            records = assign_sides(population, env_config.active_sides, rng)
        else:
            records = _fixed_assignment(population, env_config.active_sides)
        episode = run_episode(records, env_config, tc, rng)
        cumulative += episode.steps_run

        scored = {id(r.genome): r.fitness for r in records}
        population = Population(
            [g.with_fitness(scored[id(g)]) for g in population.members],
            population.generation_index,
        )
        for r in records:
            best = champions.get(r.side)
            if best is None or r.fitness > best.fitness:
                champions[r.side] = r.genome.with_fitness(r.fitness)

        fitness = [r.fitness for r in records]
        row = GenerationStats(
            generation=generation,
            best_fitness=max(fitness),
            mean_fitness=math.fsum(fitness) / len(fitness),
            survivors_total=sum(episode.survivors_per_side.values()),
            survivors_per_side=tuple(episode.survivors_per_side[s] for s in ALL_SIDES),
            episode_steps=episode.steps_run,
            cumulative_steps=cumulative,
        )
        stats.append(row)
        log.info("generation %d: best %.1f, steps %d, %s", generation, row.best_fitness,
                 row.episode_steps, episode.terminated_by.value)
        if on_generation is not None:
            on_generation(row, episode)

        if learned_generation is None and row.best_fitness >= tc.learned_threshold:
            learned_generation = generation
        if _reached(fitness, tc):
            converged = True
            convergence_generation = generation
            break
        population = next_generation(population, evolution_config, registry, rng)

    return RunResult(
        generations_run=len(stats),
        converged=converged,
        convergence_generation=convergence_generation,
        learned_generation=learned_generation,
        champions=champions,
        stats=stats,
        final_population=population,
    )


def _reached(fitness: list[float], tc: TrainerConfig) -> bool:
    if tc.threshold_mode == "mean":
        return math.fsum(fitness) / len(fitness) >= tc.fitness_threshold
    return max(fitness) >= tc.fitness_threshold


def evaluate_sustained(champions: dict, env_config: EnvConfig, trainer_config: TrainerConfig,
                       n_trials: int, rng, backend: str | None = None,
                       on_step=None) -> float:
    """Fraction of fresh episodes, one champion per active side, that hit the step cap.

    ``on_step(trial, world, events)`` observes every step (Python backend).
    """
    champions = {Side.parse(s): g for s, g in champions.items()}
    missing = [s.name for s in env_config.active_sides if s not in champions]
    if missing:
        raise ConfigError(f"no champion for sides {missing}")
    if n_trials <= 0:
        return 0.0
    sustained = 0
    for trial in range(n_trials):
        records = [AgentRecord(champions[s], s) for s in env_config.active_sides]
        hook = None
        if on_step is not None:
            def hook(world, events, trial=trial):
                on_step(trial, world, events)
        episode = run_episode(records, env_config, trainer_config, rng,
                              threshold=math.inf, backend=backend, on_step=hook)
        if episode.terminated_by is Termination.STEP_CAP_REACHED:
            sustained += 1
    return sustained / n_trials


def scenario_configs(n_sides: int, population: int, seed: int = 0,
                     env_overrides: dict | None = None, trainer_overrides: dict | None = None,
                     evolution_overrides: dict | None = None):
    """(env, trainer, evolution) configs for an n-sided scenario with reflective other walls."""
    from .env import SCENARIO_SIDES

    if n_sides not in SCENARIO_SIDES:
        raise ConfigError("sides must be 1, 2 or 4")
    if population % n_sides:
        raise IndivisiblePopulation(f"population {population} not divisible by {n_sides} sides")
    env = EnvConfig(**{**(env_overrides or {}), "active_sides": SCENARIO_SIDES[n_sides]})
    trainer = TrainerConfig(**{**(trainer_overrides or {}),
                               "n_per_side": population // n_sides, "seed": seed})
    evolution = EvolutionConfig(**{**(evolution_overrides or {}), "population_size": population})
    return env, trainer, evolution


__all__ = [
    "AgentRecord",
    "EpisodeResult",
    "RunResult",
    "Termination",
    "TrainerConfig",
    "IndivisiblePopulation",
    "assign_sides",
    "run_episode",
    "run_training",
    "evaluate_sustained",
    "oracle_controller",
    "frozen_controller",
    "scenario_configs",
]
