"""Compare the compiled and pure-Python episode kernels.

Plays the same batch of episodes on each available backend, checks that the
results agree exactly, and reports simulated steps per second.

    python3 benchmarks/bench_kernel.py --episodes 5 --steps 5000
"""

from __future__ import annotations

import argparse
import random
import sys
import time

from quadpong import kernel
from quadpong.env import ALL_SIDES, EnvConfig, sample_ball
from quadpong.evolution import EvolutionConfig, InnovationRegistry, crossover, mutate
from quadpong.genome import minimal_genome


def make_batch(n_episodes: int, per_side: int, seed: int):
    """Evolved-looking genomes and launch states, fixed by ``seed``."""
    rng = random.Random(seed)
    registry = InnovationRegistry()
    cfg = EvolutionConfig()
    size = 4 * per_side
    pool = [minimal_genome(rng, registry) for _ in range(size)]
    for _ in range(40 * size):
        a, b = rng.sample(pool, 2)
        pool[rng.randrange(size)] = mutate(crossover(a, b, rng), cfg, registry, rng)
    # full-width paddles never miss, so every episode runs to the step cap
    env = EnvConfig(paddle_length=800.0)
    sides = [int(s) for s in ALL_SIDES for _ in range(per_side)]
    batch = []
    for _ in range(n_episodes):
        rng.shuffle(pool)
        b = sample_ball(env, rng)
        batch.append(([g.network() for g in pool], (b.x, b.y, b.vx, b.vy)))
    return env, sides, batch


def run_batch(backend: str, env, sides, batch, steps: int):
    results, total = [], 0
    start = time.perf_counter()
    for networks, ball in batch:
        r = kernel.run_episode(env, sides, networks, ball, 10.0, 5.0, 1.0,
                               float("inf"), False, steps, backend=backend)
        results.append(r)
        total += r.steps
    return results, total, time.perf_counter() - start


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--episodes", type=int, default=5)
    parser.add_argument("--steps", type=int, default=5000, help="step cap per episode")
    parser.add_argument("--per-side", type=int, default=5, help="paddles per side")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    env, sides, batch = make_batch(args.episodes, args.per_side, args.seed)
    print(f"{args.episodes} episodes, {len(sides)} paddles, cap {args.steps} steps")
    timings, outputs = {}, {}
    for backend in kernel.AVAILABLE:
        outputs[backend], total, secs = run_batch(backend, env, sides, batch, args.steps)
        timings[backend] = secs
        print(f"  {backend:>6}: {total} steps in {secs:.3f} s ({total / secs:,.0f} steps/s)")
    if len(outputs) == 2:
        same = outputs["c"] == outputs["python"]
        print(f"  speedup c/python: {timings['python'] / timings['c']:.1f}x; "
              f"results identical: {same}")
        if not same:
            return 1
    else:
        print("  compiled kernel not built; only the Python fallback was timed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
