"""Reactive gain vectors: u_diff = K . (1 / depths)."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .world import RobotParams, SensorParams


def check_gains(K, sp: SensorParams = SensorParams()) -> np.ndarray:
    K = np.ascontiguousarray(K, dtype=float)
    if K.shape != (sp.n_rays,) or not np.all(np.isfinite(K)):
        raise ValueError(f"gain vector must be {sp.n_rays} finite values")
    return K


def k_from_intercepts(x0: float, y0: float, sp: SensorParams = SensorParams()) -> np.ndarray:
    """Piecewise-linear gains through (x0, 0) and (0, y0), reflected about the origin."""
    if not x0 > 0:
        raise ValueError("x-intercept must be positive")
    th = sp.angles()
    slope = y0 / x0
    return np.where(th >= 0.0, slope * (x0 - th), slope * (-x0 - th))


def finite_policy_grid(sp: SensorParams = SensorParams(), n_x: int = 5, n_y: int = 10,
                       x_range=(0.1, 5.0), y_range=(0.0, 10.0)) -> list[np.ndarray]:
    """The 5 x 10 intercept grid, x0 outer."""
    return [k_from_intercepts(x0, y0, sp)
            for x0 in np.linspace(*x_range, n_x)
            for y0 in np.linspace(*y_range, n_y)]


def grid_policy_ids(n_x: int = 5, n_y: int = 10) -> list[str]:
    return [f"k{i}_{j}" for i in range(n_x) for j in range(n_y)]


def control(K, depths, rp: RobotParams = RobotParams(),
            sp: SensorParams = SensorParams()) -> float:
    """Clamped turn command for one sensor reading."""
    K = check_gains(K, sp)
    depths = np.ascontiguousarray(depths, dtype=float)
    if depths.shape != K.shape:
        raise ValueError("depth vector length mismatch")
    u = _kernels.control_from_depths(K, depths, sp.min_depth)
    return float(_kernels.clamp_turn(u, rp.max_turn))
