"""Pure-Python episode loop, the fallback when the compiled kernel is missing.

Also the only engine that accepts arbitrary controllers and a per-step hook,
which the oracle tests and the trace printer rely on.
"""

from __future__ import annotations

from .env import Ball, EnvConfig, Side, observe, reset, step
from .kernel_types import (
    TERM_BREACHED,
    TERM_CAP,
    TERM_THRESHOLD,
    KernelResult,
    fitness_of,
)


def run_episode(
    env_config: EnvConfig,
    sides,
    networks,
    ball: tuple[float, float, float, float],
    hit_reward: float,
    miss_penalty: float,
    survival_reward: float,
    threshold: float,
    threshold_mean: bool,
    max_steps: int,
    controllers=None,
    on_step=None,
) -> KernelResult:
    """Play one episode; agent ``i`` is paddle owner ``i`` on ``sides[i]``.

    ``controllers[i]``, when given, replaces the network of agent ``i``: it is
    called as ``controller(world, paddle, config)`` and returns a raw action.
    ``on_step(world, events)`` runs after every step.
    """
    n = len(sides)
    world = reset(env_config, None, [(i, Side(s)) for i, s in enumerate(sides)], Ball(*ball))
    paddles = world.paddles
    hits = [0] * n
    misses = [0] * n
    survived = [0] * n
    actions: dict[int, float] = {}
    steps = 0
    termination = TERM_CAP
    breached = -1

    while steps < max_steps:
        actions.clear()
        for i, p in enumerate(paddles):
            if p.alive:
                if controllers is not None and controllers[i] is not None:
                    actions[i] = controllers[i](world, p, env_config)
                else:
                    x0, x1 = observe(world, p, env_config)
                    actions[i] = networks[i].activate(x0, x1)
        _, events = step(world, actions, env_config)
        for i in events.hits:
            hits[i] += 1
        for i in events.misses:
            misses[i] += 1
        for i, p in enumerate(paddles):
            if p.alive:
                survived[i] += 1
        steps += 1
        if on_step is not None:
            on_step(world, events)

        lost = -1
        for s in env_config.active_sides:
            if not any(p.alive and p.side is s for p in paddles):
                lost = int(s)
                break
        if lost >= 0:
            termination, breached = TERM_BREACHED, lost
            break
        total = 0.0
        reached = False
        for i in range(n):
            f = fitness_of(hits[i], misses[i], survived[i], hit_reward, miss_penalty, survival_reward)
            if not threshold_mean and f >= threshold:
                reached = True
                break
            total += f
        if threshold_mean and n and total / n >= threshold:
            reached = True
        if reached:
            termination = TERM_THRESHOLD
            break

    b = world.ball
    return KernelResult(
        steps=steps,
        termination=termination,
        breached_side=breached,
        hits=hits,
        misses=misses,
        survived=survived,
        alive=[p.alive for p in paddles],
        tracks=[p.track for p in paddles],
        ball=(b.x, b.y, b.vx, b.vy),
    )

