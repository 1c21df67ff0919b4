"""Robot/sensor parameters, obstacle environments and their distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..divergences import BetaParams

# x = -5 wall, x = +5 wall, far wall at y = 10; the side behind the start is open
WALLS = np.array([
    [-5.0, 0.0, -5.0, 10.0],
    [5.0, 0.0, 5.0, 10.0],
    [-5.0, 10.0, 5.0, 10.0],
])
INIT_STATE = (0.0, 1.0, 0.0)

# independent random streams under one master seed
STREAM_TRAIN_ENVS = 0
STREAM_TEST_ENVS = 1
STREAM_POLICY_DRAWS = 2
STREAM_CERT_SAMPLES = 3
STREAM_TRAINER = 4
STREAM_NOISE = 5


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic 64-bit child seed of ``master`` for the given key path."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master),
                                                        spawn_key=tuple(int(k) for k in keys)))


@dataclass(frozen=True)
class RobotParams:
    wheel_radius: float = 0.1
    base_width: float = 0.5
    speed: float = 2.5
    dt: float = 0.05
    horizon: int = 100
    body_radius: float = 0.27

    def __post_init__(self):
        for name in ("wheel_radius", "base_width", "speed", "dt", "body_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")

    @property
    def u0(self) -> float:
        return self.speed / self.wheel_radius

    @property
    def max_turn(self) -> float:
        return 0.5 * self.u0


@dataclass(frozen=True)
class SensorParams:
    n_rays: int = 20
    fov: float = math.pi / 3
    horizon: float = 5.0
    min_depth: float = 1e-3

    def __post_init__(self):
        if self.n_rays < 1 or not (0.0 < self.fov <= math.pi / 2) or self.horizon <= 0:
            raise ValueError("invalid sensor parameters (fov must lie in (0, pi/2])")

    def angles(self) -> np.ndarray:
        """Ray angles, positive clockwise from the heading, index 0 at -fov.

        Mirrored rays are exact negatives of each other so antisymmetric gains
        cancel exactly on symmetric readings.
        """
        th = np.linspace(-self.fov, self.fov, self.n_rays)
        half = self.n_rays // 2
        th[self.n_rays - half:] = -th[:half][::-1]
        if self.n_rays % 2:
            th[half] = 0.0
        return th


@dataclass
class Environment:
    """Obstacle discs as rows (x, y, radius), plus the fixed walls and start."""

    obstacles: np.ndarray
    seed: int | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        obs = np.asarray(self.obstacles, dtype=float).reshape(-1, 3)
        if np.any(obs[:, 2] <= 0.0):
            raise ValueError("obstacle radii must be positive")
        self.obstacles = np.ascontiguousarray(obs)

    @property
    def n_obstacles(self) -> int:
        return self.obstacles.shape[0]

    def to_dict(self) -> dict[str, Any]:
        return {"seed": self.seed, "meta": self.meta,
                "obstacles": [[float(v) for v in row] for row in self.obstacles]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Environment":
        return cls(np.array(d["obstacles"], dtype=float).reshape(-1, 3), d.get("seed"),
                   dict(d.get("meta", {})))


@dataclass(frozen=True)
class EnvDistribution:
    """Obstacle-field distribution.

    ``default``: each radius iid uniform on ``radius_range``.
    ``beta_radius``: one radius per environment, ``r_min + Beta(a, b) * (r_max - r_min)``.
    """

    variant: str = "default"
    beta: BetaParams | None = None
    r_min: float = 0.10
    r_max: float = 1.10
    radius_range: tuple[float, float] = (0.05, 0.2)
    n_obs_range: tuple[int, int] = (20, 40)
    x_range: tuple[float, float] = (-5.0, 5.0)
    y_range: tuple[float, float] = (2.0, 10.0)

    def __post_init__(self):
        if self.variant not in ("default", "beta_radius"):
            raise ValueError(f"unknown environment variant {self.variant!r}")
        if self.variant == "beta_radius" and self.beta is None:
            raise ValueError("beta_radius variant needs beta parameters")
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")

    @classmethod
    def beta_radius(cls, alpha: float, beta: float, **kw) -> "EnvDistribution":
        return cls(variant="beta_radius", beta=BetaParams(alpha, beta), **kw)

    def mean_radius(self) -> float:
        if self.variant == "default":
            return 0.5 * sum(self.radius_range)
        return self.beta.mean * (self.r_max - self.r_min) + self.r_min

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"variant": self.variant}
        if self.variant == "beta_radius":
            d.update(alpha=self.beta.alpha, beta=self.beta.beta, r_min=self.r_min,
                     r_max=self.r_max)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EnvDistribution":
        if d.get("variant", "default") == "default":
            return cls()
        return cls.beta_radius(d["alpha"], d["beta"], r_min=d.get("r_min", 0.10),
                               r_max=d.get("r_max", 1.10))


def sample_environment(dist: EnvDistribution, seed: int) -> Environment:
    rng = np.random.default_rng(int(seed))
    lo, hi = dist.n_obs_range
    n_obs = int(rng.integers(lo, hi + 1))
    xs = rng.uniform(*dist.x_range, size=n_obs)
    ys = rng.uniform(*dist.y_range, size=n_obs)
    if dist.variant == "default":
        radii = rng.uniform(*dist.radius_range, size=n_obs)
    else:
        r = dist.r_min + rng.beta(dist.beta.alpha, dist.beta.beta) * (dist.r_max - dist.r_min)
        radii = np.full(n_obs, r)
    return Environment(np.column_stack([xs, ys, radii]), seed=int(seed), meta=dist.to_dict())


def sample_environments(dist: EnvDistribution, n: int, master_seed: int,
                        stream: int = STREAM_TRAIN_ENVS) -> list[Environment]:
    """``n`` environments whose seeds are derived from ``(master_seed, stream, i)``."""
    return [sample_environment(dist, derive_seed(master_seed, stream, i)) for i in range(n)]
