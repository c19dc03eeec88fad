# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled episode loop.

Same arithmetic, in the same order, as env.step + _pykernel.run_episode.
Built without fast-math or FMA contraction so results match the Python
backend bit for bit.
"""

from libc.math cimport atan2, copysign, cos, expm1, fabs, nextafter, sin, sqrt
from libc.stdlib cimport free, malloc

DEF TOP = 0
DEF BOTTOM = 1
DEF LEFT = 2
DEF RIGHT = 3
DEF MAX_CROSSINGS = 4


cdef double _BELOW_ONE = nextafter(1.0, 0.0)


cdef inline double tanh_activate(double x) nogil:
    cdef double ax = fabs(x)
    cdef double t, r
    if ax >= 20.0:
        return copysign(_BELOW_ONE, x)
    t = expm1(2.0 * ax)
    r = t / (t + 2.0)
    if r >= 1.0:
        r = _BELOW_ONE
    return copysign(r, x)


cdef struct Geometry:
    double width
    double height
    double half_len
    double reach
    double speed
    double max_defl
    double max_exit
    double contact[4]
    double line[4]
    double lo[4]
    double hi[4]
    int active[4]


cdef struct World:
    double x
    double y
    double vx
    double vy
    int n
    int* side
    int* alive
    double* track
    int* hit_flag
    int* miss_flag
    int breached


cdef inline void resolve_side(World* w, Geometry* g, int side, double along) nogil:
    cdef double u, n_in, n_out, sign, frac, speed, phi
    cdef int i, best, horizontal = side == TOP or side == BOTTOM
    if horizontal:
        u = w.vx
        n_in = w.vy
    else:
        u = w.vy
        n_in = w.vx
    n_out = fabs(n_in)
    sign = 1.0 if (side == BOTTOM or side == LEFT) else -1.0

    if g.active[side]:
        best = -1
        for i in range(w.n):
            if w.side[i] == side and w.alive[i]:
                if fabs(along - w.track[i]) <= g.reach:
                    w.hit_flag[i] = 1
                    if best < 0 or fabs(along - w.track[i]) < fabs(along - w.track[best]):
                        best = i
                else:
                    w.alive[i] = 0
                    w.miss_flag[i] = 1
        if best >= 0:
            frac = (along - w.track[best]) / g.half_len
            if frac > 1.0:
                frac = 1.0
            elif frac < -1.0:
                frac = -1.0
            speed = sqrt(u * u + n_out * n_out)
            phi = atan2(u, n_out) + g.max_defl * frac
            if phi > g.max_exit:
                phi = g.max_exit
            elif phi < -g.max_exit:
                phi = -g.max_exit
            u = speed * sin(phi)
            n_out = speed * cos(phi)
        elif w.breached < 0:
            w.breached = side

    if horizontal:
        w.vx = u
        w.vy = sign * n_out
    else:
        w.vx = sign * n_out
        w.vy = u


cdef inline void advance_ball(World* w, Geometry* g) nogil:
    cdef double remaining = 1.0
    cdef double nx, ny, tx, ty, line_x = 0.0, line_y = 0.0
    cdef int k, side_x = 0, side_y = 0
    cdef double lo_x = g.contact[LEFT], hi_x = g.contact[RIGHT]
    cdef double lo_y = g.contact[BOTTOM], hi_y = g.contact[TOP]
    for k in range(MAX_CROSSINGS):
        nx = w.x + w.vx * remaining
        ny = w.y + w.vy * remaining
        tx = 2.0
        ty = 2.0
        if nx > hi_x and w.vx > 0.0:
            tx = (hi_x - w.x) / w.vx
            side_x = RIGHT
            line_x = hi_x
        elif nx < lo_x and w.vx < 0.0:
            tx = (lo_x - w.x) / w.vx
            side_x = LEFT
            line_x = lo_x
        if ny > hi_y and w.vy > 0.0:
            ty = (hi_y - w.y) / w.vy
            side_y = TOP
            line_y = hi_y
        elif ny < lo_y and w.vy < 0.0:
            ty = (lo_y - w.y) / w.vy
            side_y = BOTTOM
            line_y = lo_y
        if tx > 1.0 and ty > 1.0:
            w.x = nx
            w.y = ny
            return
        if tx <= ty:
            w.y = w.y + w.vy * tx
            w.x = line_x
            remaining = remaining - tx
            resolve_side(w, g, side_x, w.y)
        else:
            w.x = w.x + w.vx * ty
            w.y = line_y
            remaining = remaining - ty
            resolve_side(w, g, side_y, w.x)


def run_episode(
    double width, double height, double paddle_length, double paddle_thickness,
    double paddle_offset, double paddle_speed, double ball_radius,
    double max_deflection_rad, double max_exit_rad,
    int[::1] active,
    int[::1] sides,
    int[::1] net_slot_base,
    int[::1] net_output,
    int[::1] net_step_start,
    int[::1] step_slot,
    double[::1] step_bias,
    int[::1] step_edge_start,
    int[::1] step_edge_end,
    int[::1] edge_src,
    double[::1] edge_weight,
    double bx, double by, double bvx, double bvy,
    double hit_reward, double miss_penalty, double survival_reward,
    double threshold, bint threshold_mean, long max_steps,
):
    """Run one episode.

    Networks are packed back to back: agent ``i`` owns slots starting at
    ``net_slot_base[i]`` (its two inputs first) and evaluation steps
    ``net_step_start[i]`` up to ``net_step_start[i + 1]``.  Slot and edge
    indices are global.  Returns (steps, termination, breached_side, hits,
    misses, survived, alive, tracks, ball).
    """
    cdef Geometry g
    cdef World w
    cdef int n = sides.shape[0]
    cdef int n_slots = 2
    cdef int i, s, d, k, e, base, lost, reached
    cdef double inset, extent, t, acc, px, py, f, total
    cdef long steps = 0
    cdef int termination = 2, breached = -1
    cdef double* values = NULL
    cdef double* raw = NULL
    cdef long* hits = NULL
    cdef long* misses = NULL
    cdef long* survived = NULL

    if n > 0:
        n_slots = net_slot_base[n - 1] + 2
        for k in range(step_slot.shape[0]):
            if step_slot[k] + 1 > n_slots:
                n_slots = step_slot[k] + 1

    g.width = width
    g.height = height
    g.half_len = paddle_length / 2
    g.reach = paddle_length / 2 + ball_radius
    g.speed = paddle_speed
    g.max_defl = max_deflection_rad
    g.max_exit = max_exit_rad
    for s in range(4):
        g.active[s] = active[s]
        inset = paddle_offset + paddle_thickness / 2
        if s == BOTTOM or s == LEFT:
            g.line[s] = inset
        elif s == TOP:
            g.line[s] = height - inset
        else:
            g.line[s] = width - inset
        inset = paddle_offset + ball_radius
        if active[s]:
            inset += paddle_thickness
        if s == BOTTOM or s == LEFT:
            g.contact[s] = inset
        elif s == TOP:
            g.contact[s] = height - inset
        else:
            g.contact[s] = width - inset
        extent = width if (s == TOP or s == BOTTOM) else height
        g.lo[s] = paddle_length / 2
        g.hi[s] = extent - paddle_length / 2

    w.x = bx
    w.y = by
    w.vx = bvx
    w.vy = bvy
    w.n = n
    w.breached = -1
    w.side = <int*> malloc((n + 1) * sizeof(int))
    w.alive = <int*> malloc((n + 1) * sizeof(int))
    w.track = <double*> malloc((n + 1) * sizeof(double))
    w.hit_flag = <int*> malloc((n + 1) * sizeof(int))
    w.miss_flag = <int*> malloc((n + 1) * sizeof(int))
    hits = <long*> malloc((n + 1) * sizeof(long))
    misses = <long*> malloc((n + 1) * sizeof(long))
    survived = <long*> malloc((n + 1) * sizeof(long))
    raw = <double*> malloc((n + 1) * sizeof(double))
    values = <double*> malloc(n_slots * sizeof(double))
    try:
        if (w.side == NULL or w.alive == NULL or w.track == NULL or w.hit_flag == NULL
                or w.miss_flag == NULL or hits == NULL or misses == NULL
                or survived == NULL or raw == NULL or values == NULL):
            raise MemoryError()
        with nogil:
            for i in range(n):
                w.side[i] = sides[i]
                w.alive[i] = 1
                extent = width if (sides[i] == TOP or sides[i] == BOTTOM) else height
                w.track[i] = extent / 2
                hits[i] = 0
                misses[i] = 0
                survived[i] = 0
            for k in range(n_slots):
                values[k] = 0.0

            while steps < max_steps:
                # every alive paddle decides from the same pre-move state
                for i in range(n):
                    if not w.alive[i]:
                        continue
                    s = w.side[i]
                    if s == TOP or s == BOTTOM:
                        px = w.track[i]
                        py = g.line[s]
                    else:
                        px = g.line[s]
                        py = w.track[i]
                    base = net_slot_base[i]
                    values[base] = fabs(w.x - px) / width
                    values[base + 1] = fabs(w.y - py) / height
                    for k in range(net_step_start[i], net_step_start[i + 1]):
                        acc = step_bias[k]
                        for e in range(step_edge_start[k], step_edge_end[k]):
                            acc = acc + edge_weight[e] * values[edge_src[e]]
                        values[step_slot[k]] = tanh_activate(acc)
                    raw[i] = values[net_output[i]]

                for i in range(n):
                    w.hit_flag[i] = 0
                    w.miss_flag[i] = 0
                    if not w.alive[i]:
                        continue
                    if raw[i] > 0.0:
                        d = 1
                    elif raw[i] < 0.0:
                        d = -1
                    else:
                        d = 0
                    if d != 0:
                        s = w.side[i]
                        t = w.track[i] + d * g.speed
                        if t > g.hi[s]:
                            w.track[i] = g.hi[s]
                        elif t < g.lo[s]:
                            w.track[i] = g.lo[s]
                        else:
                            w.track[i] = t

                w.breached = -1
                advance_ball(&w, &g)

                for i in range(n):
                    if w.hit_flag[i]:
                        hits[i] += 1
                    if w.miss_flag[i]:
                        misses[i] += 1
                    if w.alive[i]:
                        survived[i] += 1
                steps += 1

                lost = -1
                for s in range(4):
                    if not g.active[s]:
                        continue
                    lost = s
                    for i in range(n):
                        if w.alive[i] and w.side[i] == s:
                            lost = -1
                            break
                    if lost >= 0:
                        break
                if lost >= 0:
                    termination = 0
                    breached = lost
                    break
                total = 0.0
                reached = 0
                for i in range(n):
                    f = hit_reward * hits[i] - miss_penalty * misses[i] + survival_reward * survived[i]
                    if not threshold_mean and f >= threshold:
                        reached = 1
                        break
                    total = total + f
                if threshold_mean and n > 0 and total / n >= threshold:
                    reached = 1
                if reached:
                    termination = 1
                    break

        return (
            steps,
            termination,
            breached,
            [hits[i] for i in range(n)],
            [misses[i] for i in range(n)],
            [survived[i] for i in range(n)],
            [bool(w.alive[i]) for i in range(n)],
            [w.track[i] for i in range(n)],
            (w.x, w.y, w.vx, w.vy),
        )
    finally:
        free(w.side)
        free(w.alive)
        free(w.track)
        free(w.hit_flag)
        free(w.miss_flag)
        free(hits)
        free(misses)
        free(survived)
        free(raw)
        free(values)
