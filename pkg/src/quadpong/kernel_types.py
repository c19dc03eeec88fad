"""Result record shared by the compiled and pure-Python episode kernels."""

from __future__ import annotations

from dataclasses import dataclass

TERM_BREACHED = 0
TERM_THRESHOLD = 1
TERM_CAP = 2


def fitness_of(hits: int, misses: int, survived: int, hit_reward: float,
               miss_penalty: float, survival_reward: float) -> float:
    # single definition of the accounting identity; the C kernel spells out
    # the same expression in the same order
    return hit_reward * hits - miss_penalty * misses + survival_reward * survived


@dataclass
class KernelResult:
    steps: int
    termination: int
    breached_side: int
    hits: list[int]
    misses: list[int]
    survived: list[int]
    alive: list[bool]
    tracks: list[float]
    ball: tuple[float, float, float, float]
