"""Headless four-sided pong with a fixed timestep.

Coordinates are y-up: the bottom paddle line sits near y = 0 and the top
one near y = height.  Top/Bottom paddles slide along x, Left/Right along y,
and a positive network output always moves a paddle toward larger track
coordinates (right, or up).

Sides listed in ``EnvConfig.active_sides`` carry paddles; the others are
plain reflective walls.  Any number of paddles can share a side; they pass
through each other.

Per-step evaluation order (the compiled kernel repeats it operation for
operation, which is what keeps the two backends bit-identical):

1. alive paddles move ``paddle_speed`` in their decoded direction, in owner
   order, clamped to the track;
2. the ball advances along its velocity; the earliest crossing of a contact
   line is resolved, the remaining fraction of the step continues with the
   new velocity, up to four crossings per step;
3. at an active side every alive paddle whose span overlaps the ball's
   center +- radius hits, the rest miss and die.  With at least one hitter
   the ball bounces with a deflection set by the offset from the closest
   hitter's center; otherwise it bounces plainly and the side is breached.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields

MAX_CROSSINGS_PER_STEP = 4


class MissingAction(KeyError):
    """An alive paddle received no action for this step."""


class Side(enum.IntEnum):
    TOP = 0
    BOTTOM = 1
    LEFT = 2
    RIGHT = 3

    @property
    def horizontal(self) -> bool:
        """True for paddles that slide along x."""
        return self in (Side.TOP, Side.BOTTOM)

    @classmethod
    def parse(cls, name: "str | Side") -> "Side":
        if isinstance(name, Side):
            return name
        return cls[str(name).upper()]


ALL_SIDES = (Side.TOP, Side.BOTTOM, Side.LEFT, Side.RIGHT)

# Scenario presets: one paddle class, two opposite classes, all four.
SCENARIO_SIDES = {
    1: (Side.BOTTOM,),
    2: (Side.LEFT, Side.RIGHT),
    4: ALL_SIDES,
}


class Action(enum.IntEnum):
    NEGATIVE = -1
    HOLD = 0
    POSITIVE = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    width: float = 800.0
    height: float = 800.0
    paddle_length: float = 100.0
    paddle_thickness: float = 10.0
    paddle_offset: float = 10.0
    paddle_speed: float = 8.0
    ball_radius: float = 8.0
    ball_speed_min: float = 5.0
    ball_speed_max: float = 9.0
    active_sides: tuple[Side, ...] = ALL_SIDES
    axis_exclusion_deg: float = 10.0
    max_deflection_deg: float = 45.0
    max_exit_angle_deg: float = 75.0

    def __post_init__(self):
        sides = tuple(sorted({Side.parse(s) for s in self.active_sides}))
        object.__setattr__(self, "active_sides", sides)
        if not sides:
            raise ConfigError("active_sides must not be empty")
        if not 0 < self.ball_speed_min <= self.ball_speed_max < self.paddle_length / 2:
            raise ConfigError("need 0 < ball_speed_min <= ball_speed_max < paddle_length / 2")
        if min(self.width, self.height) <= 2 * (self.paddle_offset + self.paddle_thickness + self.ball_radius):
            raise ConfigError("arena too small for paddles and ball")
        if self.paddle_length > min(self.width, self.height):
            raise ConfigError("paddle longer than its track")
        if not 0 <= self.axis_exclusion_deg < 45:
            raise ConfigError("axis_exclusion_deg must lie in [0, 45)")
        if not 0 < self.max_exit_angle_deg < 90:
            raise ConfigError("max_exit_angle_deg must lie in (0, 90)")

    @classmethod
    def from_dict(cls, data: dict) -> "EnvConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown env settings: {sorted(unknown)}")
        data = dict(data)
        if "active_sides" in data:
            data["active_sides"] = tuple(Side.parse(s) for s in data["active_sides"])
        return cls(**data)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["active_sides"] = [s.name for s in self.active_sides]
        return out

    def is_active(self, side: Side) -> bool:
        return side in self.active_sides

    # -- derived geometry -------------------------------------------------

    def paddle_line(self, side: Side) -> float:
        """Fixed-axis coordinate of a paddle's center on ``side``."""
        inset = self.paddle_offset + self.paddle_thickness / 2
        if side is Side.BOTTOM or side is Side.LEFT:
            return inset
        return (self.height if side is Side.TOP else self.width) - inset

    def contact_line(self, side: Side) -> float:
        """Ball-center coordinate at which the ball touches ``side``.

        Paddle sides are touched at the paddle's inner face, wall sides at the
        wall line ``paddle_offset`` in from the window edge.
        """
        inset = self.paddle_offset + self.ball_radius
        if self.is_active(side):
            inset += self.paddle_thickness
        if side is Side.BOTTOM or side is Side.LEFT:
            return inset
        return (self.height if side is Side.TOP else self.width) - inset

    def track_extent(self, side: Side) -> float:
        return self.width if side.horizontal else self.height

    def track_bounds(self, side: Side) -> tuple[float, float]:
        half = self.paddle_length / 2
        return half, self.track_extent(side) - half


@dataclass
class Ball:
    x: float
    y: float
    vx: float
    vy: float

    @property
    def speed(self) -> float:
        return math.sqrt(self.vx * self.vx + self.vy * self.vy)


@dataclass
class Paddle:
    side: Side
    track: float
    owner: int
    alive: bool = True

    def center(self, config: EnvConfig) -> tuple[float, float]:
        line = config.paddle_line(self.side)
        return (self.track, line) if self.side.horizontal else (line, self.track)


@dataclass
class WorldState:
    ball: Ball
    paddles: list[Paddle]
    steps: int = 0

    def alive_on(self, side: Side) -> list[Paddle]:
        return [p for p in self.paddles if p.side is side and p.alive]

    def survivors_per_side(self) -> dict[Side, int]:
        counts = {s: 0 for s in ALL_SIDES}
        for p in self.paddles:
            if p.alive:
                counts[p.side] += 1
        return counts


@dataclass
class StepEvents:
    hits: list[int] = field(default_factory=list)
    misses: list[int] = field(default_factory=list)
    side_breached: Side | None = None
    wall_bounce: bool = False

    def to_dict(self) -> dict:
        return {
            "hits": list(self.hits),
            "misses": list(self.misses),
            "side_breached": None if self.side_breached is None else self.side_breached.name,
            "wall_bounce": self.wall_bounce,
        }


def sample_ball(config: EnvConfig, rng) -> Ball:
    """Ball at the center with uniform speed and a direction outside the axis bands."""
    speed = rng.uniform(config.ball_speed_min, config.ball_speed_max)
    band = 90.0 - 2.0 * config.axis_exclusion_deg
    u = rng.random() * 4.0 * band
    quadrant = min(3, int(u // band))
    angle = math.radians(90.0 * quadrant + config.axis_exclusion_deg + (u - band * quadrant))
    return Ball(config.width / 2, config.height / 2, speed * math.cos(angle), speed * math.sin(angle))


def reset(config: EnvConfig, rng, assignments=(), ball: Ball | None = None) -> WorldState:
    """Fresh world: centered ball with a random velocity, paddles centered and alive.

    ``assignments`` is an iterable of (owner, side) pairs.  Passing ``ball``
    skips the velocity draw (scripted scenarios).
    """
    paddles = []
    for owner, side in sorted(assignments, key=lambda a: a[0]):
        side = Side.parse(side)
        if not config.is_active(side):
            raise ConfigError(f"paddle {owner} assigned to inactive side {side.name}")
        paddles.append(Paddle(side, config.track_extent(side) / 2, owner))
    if ball is None:
        ball = sample_ball(config, rng)
    return WorldState(ball, paddles)


def observe(world: WorldState, paddle: Paddle, config: EnvConfig) -> tuple[float, float]:
    """Normalised absolute x and y distance between ball center and paddle center."""
    px, py = paddle.center(config)
    b = world.ball
    return math.fabs(b.x - px) / config.width, math.fabs(b.y - py) / config.height


def decode_action(side: Side, raw: float) -> Action:
    # Top/Bottom: negative = left, positive = right.  Left/Right: negative =
    # down, positive = up.  Both are the sign of the track-coordinate change.
    if raw > 0.0:
        return Action.POSITIVE
    if raw < 0.0:
        return Action.NEGATIVE
    return Action.HOLD


def is_side_lost(world: WorldState, side: Side) -> bool:
    return not world.alive_on(side)


def _deflect(u: float, n: float, frac: float, config: EnvConfig) -> tuple[float, float]:
    """Rotate an outgoing (along, outward) velocity by the hit-offset angle."""
    speed = math.sqrt(u * u + n * n)
    limit = math.radians(config.max_exit_angle_deg)
    phi = math.atan2(u, n) + math.radians(config.max_deflection_deg) * frac
    if phi > limit:
        phi = limit
    elif phi < -limit:
        phi = -limit
    return speed * math.sin(phi), speed * math.cos(phi)


def _resolve_side(world: WorldState, side: Side, along: float, config: EnvConfig,
                  events: StepEvents) -> None:
    ball = world.ball
    # velocity components relative to the side: along the track, and
    # outward (away from the wall) after the bounce
    if side.horizontal:
        u, n_in = ball.vx, ball.vy
    else:
        u, n_in = ball.vy, ball.vx
    n_out = math.fabs(n_in)
    sign = 1.0 if side in (Side.BOTTOM, Side.LEFT) else -1.0

    if not config.is_active(side):
        events.wall_bounce = True
    else:
        reach = config.paddle_length / 2 + config.ball_radius
        hitters, missers = [], []
        for p in world.paddles:
            if p.side is side and p.alive:
                (hitters if math.fabs(along - p.track) <= reach else missers).append(p)
        for p in missers:
            p.alive = False
            events.misses.append(p.owner)
        if hitters:
            best = hitters[0]
            for p in hitters[1:]:
                if math.fabs(along - p.track) < math.fabs(along - best.track):
                    best = p
            frac = (along - best.track) / (config.paddle_length / 2)
            if frac > 1.0:
                frac = 1.0
            elif frac < -1.0:
                frac = -1.0
            u, n_out = _deflect(u, n_out, frac, config)
            events.hits.extend(p.owner for p in hitters)
        elif events.side_breached is None:
            events.side_breached = side

    if side.horizontal:
        ball.vx, ball.vy = u, sign * n_out
    else:
        ball.vx, ball.vy = sign * n_out, u


def _advance_ball(world: WorldState, config: EnvConfig, events: StepEvents) -> None:
    ball = world.ball
    lo_x, hi_x = config.contact_line(Side.LEFT), config.contact_line(Side.RIGHT)
    lo_y, hi_y = config.contact_line(Side.BOTTOM), config.contact_line(Side.TOP)
    remaining = 1.0
    for _ in range(MAX_CROSSINGS_PER_STEP):
        nx = ball.x + ball.vx * remaining
        ny = ball.y + ball.vy * remaining
        tx = ty = 2.0
        if nx > hi_x and ball.vx > 0.0:
            tx, side_x, line_x = (hi_x - ball.x) / ball.vx, Side.RIGHT, hi_x
        elif nx < lo_x and ball.vx < 0.0:
            tx, side_x, line_x = (lo_x - ball.x) / ball.vx, Side.LEFT, lo_x
        if ny > hi_y and ball.vy > 0.0:
            ty, side_y, line_y = (hi_y - ball.y) / ball.vy, Side.TOP, hi_y
        elif ny < lo_y and ball.vy < 0.0:
            ty, side_y, line_y = (lo_y - ball.y) / ball.vy, Side.BOTTOM, lo_y
        if tx > 1.0 and ty > 1.0:
            ball.x, ball.y = nx, ny
            return
        if tx <= ty:
            ball.y = ball.y + ball.vy * tx
            ball.x = line_x
            remaining = remaining - tx
            _resolve_side(world, side_x, ball.y, config, events)
        else:
            ball.x = ball.x + ball.vx * ty
            ball.y = line_y
            remaining = remaining - ty
            _resolve_side(world, side_y, ball.x, config, events)
    # pathological corner ping-pong: stay put for the rest of the step
    return


def step(world: WorldState, actions, config: EnvConfig) -> tuple[WorldState, StepEvents]:
    """Advance ``world`` in place by one timestep and report what happened.

    ``actions`` maps owner id to the raw network output for every alive
    paddle.  No randomness is involved.
    """
    events = StepEvents()
    speed = config.paddle_speed
    for p in world.paddles:
        if not p.alive:
            continue
        try:
            raw = actions[p.owner]
        except KeyError:
            raise MissingAction(f"no action for alive paddle {p.owner}") from None
        d = int(decode_action(p.side, raw))
        if d:
            lo, hi = config.track_bounds(p.side)
            t = p.track + d * speed
            p.track = hi if t > hi else (lo if t < lo else t)
    _advance_ball(world, config, events)
    world.steps += 1
    return world, events


def trace_record(world: WorldState, events: StepEvents) -> str:
    """One newline-free JSON record of the trace format."""
    b = world.ball
    return json.dumps(
        {
            "step": world.steps,
            "ball_x": b.x,
            "ball_y": b.y,
            "vx": b.vx,
            "vy": b.vy,
            "events": events.to_dict(),
        },
        separators=(",", ":"),
    )
