"""Compiled inner loops of the simulator.

Every public simulator entry point funnels into these functions, so a single
rollout and a batched sweep execute the same floating-point operations in the
same order.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def clearance(x, y, obstacles, walls):
    """Signed distance from (x, y) to the nearest obstacle boundary or wall."""
    best = math.inf
    for k in range(obstacles.shape[0]):
        fx = x - obstacles[k, 0]
        fy = y - obstacles[k, 1]
        d = math.sqrt(fx * fx + fy * fy) - obstacles[k, 2]
        if d < best:
            best = d
    for k in range(walls.shape[0]):
        x1 = walls[k, 0]
        y1 = walls[k, 1]
        ex = walls[k, 2] - x1
        ey = walls[k, 3] - y1
        u = ((x - x1) * ex + (y - y1) * ey) / (ex * ex + ey * ey)
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
        px = x1 + u * ex - x
        py = y1 + u * ey - y
        d = math.sqrt(px * px + py * py)
        if d < best:
            best = d
    return best


@njit(cache=True)
def raycast_into(x, y, psi, angles, obstacles, walls, horizon, out):
    """Fill ``out`` with clipped hit distances; all zeros if (x, y) is inside a disc."""
    n_obs = obstacles.shape[0]
    hx = -math.sin(psi)
    hy = math.cos(psi)
    # obstacles that can be hit at all: within reach and not fully behind
    cand = np.empty(n_obs, dtype=np.int64)
    n_cand = 0
    for k in range(n_obs):
        fx = x - obstacles[k, 0]
        fy = y - obstacles[k, 1]
        r = obstacles[k, 2]
        dist2 = fx * fx + fy * fy
        if dist2 <= r * r:
            for i in range(out.shape[0]):
                out[i] = 0.0
            return
        reach = horizon + r
        if dist2 > reach * reach:
            continue
        if -(fx * hx + fy * hy) < -r:
            continue
        cand[n_cand] = k
        n_cand += 1

    for i in range(angles.shape[0]):
        a = psi - angles[i]
        dx = -math.sin(a)
        dy = math.cos(a)
        best = horizon
        for j in range(n_cand):
            k = cand[j]
            fx = x - obstacles[k, 0]
            fy = y - obstacles[k, 1]
            r = obstacles[k, 2]
            b = fx * dx + fy * dy
            if b >= 0.0:
                continue
            c = fx * fx + fy * fy - r * r
            disc = b * b - c
            if disc < 0.0:
                continue
            # near root of t^2 + 2bt + c = 0 in cancellation-free form
            t = c / (-b + math.sqrt(disc))
            if t < best:
                best = t
        for k in range(walls.shape[0]):
            x1 = walls[k, 0]
            y1 = walls[k, 1]
            ex = walls[k, 2] - x1
            ey = walls[k, 3] - y1
            denom = dx * ey - dy * ex
            if denom == 0.0:
                continue
            wx = x1 - x
            wy = y1 - y
            t = (wx * ey - wy * ex) / denom
            u = (wx * dy - wy * dx) / denom
            if t > 0.0 and 0.0 <= u <= 1.0 and t < best:
                best = t
        out[i] = best


@njit(cache=True)
def control_from_depths(gains, depths, min_depth):
    u = 0.0
    for i in range(gains.shape[0]):
        d = depths[i]
        if d < min_depth:
            d = min_depth
        u += gains[i] / d
    return u


@njit(cache=True)
def clamp_turn(u, max_turn):
    if u > max_turn:
        return max_turn
    if u < -max_turn:
        return -max_turn
    return u


@njit(cache=True)
def euler_step(x, y, psi, u_diff, wheel_radius, base_width, u0, dt):
    u_l = u0 - u_diff
    u_r = u0 + u_diff
    v = 0.5 * wheel_radius * (u_l + u_r)
    nx = x - v * math.sin(psi) * dt
    ny = y + v * math.cos(psi) * dt
    npsi = psi + (wheel_radius / base_width) * (u_r - u_l) * dt
    return nx, ny, npsi


@njit(cache=True)
def rollout_kernel(gains, obstacles, walls, angles, x0, y0, psi0, wheel_radius, base_width,
                   u0, dt, n_steps, body_radius, horizon, min_depth, noise, use_noise):
    """One rollout; returns (collided, steps_survived, min_clearance)."""
    max_turn = 0.5 * u0
    x = x0
    y = y0
    psi = psi0
    min_clear = clearance(x, y, obstacles, walls)
    if min_clear < body_radius:
        return 1, 0, min_clear
    depths = np.empty(angles.shape[0])
    for t in range(n_steps):
        raycast_into(x, y, psi, angles, obstacles, walls, horizon, depths)
        u = control_from_depths(gains, depths, min_depth)
        if use_noise:
            u += noise[t]
        u = clamp_turn(u, max_turn)
        x, y, psi = euler_step(x, y, psi, u, wheel_radius, base_width, u0, dt)
        c = clearance(x, y, obstacles, walls)
        if c < min_clear:
            min_clear = c
        if c < body_radius:
            return 1, t + 1, min_clear
    return 0, n_steps, min_clear


@njit(cache=True)
def rollout_batch(gain_rows, obstacles, walls, angles, x0, y0, psi0, wheel_radius, base_width,
                  u0, dt, n_steps, body_radius, horizon, min_depth, noise, use_noise):
    """Independent rollouts of each gain row in one environment."""
    b = gain_rows.shape[0]
    collided = np.empty(b, dtype=np.int64)
    steps = np.empty(b, dtype=np.int64)
    min_clear = np.empty(b)
    for i in range(b):
        c, s, m = rollout_kernel(gain_rows[i], obstacles, walls, angles, x0, y0, psi0,
                                 wheel_radius, base_width, u0, dt, n_steps, body_radius,
                                 horizon, min_depth, noise[i], use_noise)
        collided[i] = c
        steps[i] = s
        min_clear[i] = m
    return collided, steps, min_clear
