"""Episode-kernel backend selection.

The compiled Cython kernel is used when it was built; otherwise the
pure-Python loop runs the same episode with identical results, only slower.
"""

from __future__ import annotations

import math
from array import array

from . import _pykernel
from .env import ALL_SIDES, EnvConfig
from .kernel_types import KernelResult

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

AVAILABLE = ("c", "python") if _ckernel is not None else ("python",)
_backend = AVAILABLE[0]


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Select ``"c"`` or ``"python"`` for subsequent episodes."""
    global _backend
    if name not in AVAILABLE:
        raise ValueError(f"backend {name!r} unavailable; choose from {AVAILABLE}")
    _backend = name


class use_backend:
    """Context manager that temporarily switches backend."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        self.previous = get_backend()
        set_backend(self.name)
        return self

    def __exit__(self, *exc):
        set_backend(self.previous)
        return False


def pack_networks(networks):
    """Concatenate compiled networks into the flat arrays the C kernel reads."""
    slot_base, output, step_start = array("i"), array("i"), array("i")
    step_slot, step_bias = array("i"), array("d")
    edge_start, edge_end = array("i"), array("i")
    edge_src, edge_weight = array("i"), array("d")
    slots = 0
    for net in networks:
        slot_base.append(slots)
        output.append(slots + net.output_slot)
        step_start.append(len(step_slot))
        edge_base = len(edge_src)
        for slot, bias, lo, hi in zip(net.step_slot, net.step_bias,
                                      net.step_edge_start, net.step_edge_end):
            step_slot.append(slots + slot)
            step_bias.append(bias)
            edge_start.append(edge_base + lo)
            edge_end.append(edge_base + hi)
        for src, w in zip(net.edge_src, net.edge_weight):
            edge_src.append(slots + src)
            edge_weight.append(w)
        slots += net.n_slots
    step_start.append(len(step_slot))
    return (slot_base, output, step_start, step_slot, step_bias,
            edge_start, edge_end, edge_src, edge_weight)


def run_episode(
    env_config: EnvConfig,
    sides,
    networks,
    ball,
    hit_reward: float,
    miss_penalty: float,
    survival_reward: float,
    threshold: float,
    threshold_mean: bool,
    max_steps: int,
    backend: str | None = None,
    on_step=None,
    controllers=None,
) -> KernelResult:
    """Run one episode on the selected backend.

    ``on_step`` hooks and scripted ``controllers`` are only supported by the
    Python loop, so passing either forces that backend.
    """
    backend = backend or _backend
    if backend == "python" or on_step is not None or controllers is not None:
        return _pykernel.run_episode(
            env_config, sides, networks, ball, hit_reward, miss_penalty,
            survival_reward, threshold, threshold_mean, max_steps,
            controllers=controllers, on_step=on_step,
        )
    if _ckernel is None:
        raise ValueError("compiled kernel not built")
    c = env_config
    active = array("i", [1 if c.is_active(s) else 0 for s in ALL_SIDES])
    out = _ckernel.run_episode(
        float(c.width), float(c.height), float(c.paddle_length), float(c.paddle_thickness),
        float(c.paddle_offset), float(c.paddle_speed), float(c.ball_radius),
        math.radians(c.max_deflection_deg), math.radians(c.max_exit_angle_deg),
        active, array("i", [int(s) for s in sides]),
        *pack_networks(networks),
        *(float(v) for v in ball),
        float(hit_reward), float(miss_penalty), float(survival_reward),
        float(threshold), bool(threshold_mean), int(max_steps),
    )
    steps, termination, breached, hits, misses, survived, alive, tracks, final_ball = out
    return KernelResult(steps, termination, breached, hits, misses, survived,
                        alive, tracks, final_ball)
