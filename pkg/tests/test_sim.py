import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import ray_circle_distance
from pacctrl.sim import (
    WALLS,
    EnvDistribution,
    Environment,
    FinitePosterior,
    RobotParams,
    SensorParams,
    control,
    cost_matrix,
    derive_seed,
    estimate_true_cost,
    finite_policy_grid,
    k_from_intercepts,
    raycast,
    rollout,
    rollout_many,
    rollout_with_disturbance,
    sample_environment,
    sample_environments,
    sample_true_costs,
    step,
    surrogate_cost,
)
from pacctrl.sim import _kernels

RP, SP = RobotParams(), SensorParams()


def test_straight_line_wall_contact_step(empty_env):
    # far wall at y = 10, start at y = 1, forward speed 2.5 m/s, dt = 0.05
    expected = math.ceil((10.0 - RP.body_radius - 1.0) / (RP.speed * RP.dt))
    res = rollout(np.zeros(20), empty_env)
    assert expected == 70
    assert res.cost01 == 1 and res.steps_survived == expected
    assert res.min_clearance < RP.body_radius


def test_ray_angles():
    th = SP.angles()
    assert th[0] == pytest.approx(-math.pi / 3) and th[-1] == pytest.approx(math.pi / 3)
    np.testing.assert_array_equal(th, -th[::-1])
    assert np.all(np.diff(th) > 0)


def test_euler_step_closed_form():
    x, y, psi = step((0.0, 1.0, 0.0), 0.0)
    assert (x, y, psi) == pytest.approx((0.0, 1.0 + RP.speed * RP.dt, 0.0))
    # wheel speeds u0 -/+ u_diff: forward speed is unchanged, heading turns
    x, y, psi = step((0.0, 1.0, 0.3), 4.0)
    v = RP.wheel_radius * RP.u0
    assert (x, y) == pytest.approx((-v * math.sin(0.3) * RP.dt, 1.0 + v * math.cos(0.3) * RP.dt))
    assert psi == pytest.approx(0.3 + RP.wheel_radius / RP.base_width * 8.0 * RP.dt)
    x, y, _ = step((0.0, 0.0, math.pi / 2), 0.0)
    assert (x, y) == pytest.approx((-RP.speed * RP.dt, 0.0))


def test_raycast_empty_world_hits_walls():
    d = raycast((0.0, 1.0, 0.0), Environment(np.zeros((0, 3))))
    assert d.shape == (20,)
    assert np.all(d <= SP.horizon) and np.all(d > 0)
    np.testing.assert_allclose(d, d[::-1])
    # edge rays reach the side walls at 5 / sin(60 deg) > horizon
    assert d[0] == pytest.approx(SP.horizon)


def test_raycast_inside_obstacle_reads_zero():
    env = Environment(np.array([[0.0, 1.0, 0.5]]))
    assert np.all(raycast((0.0, 1.0, 0.0), env) == 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-4, 4), st.floats(0, 9), st.floats(-math.pi, math.pi),
       st.floats(-6, 6), st.floats(-3, 12), st.floats(0.05, 1.5))
def test_raycast_matches_quadratic_oracle(x, y, psi, cx, cy, r):
    if math.hypot(x - cx, y - cy) <= r:
        return
    th = SP.angles()
    out = np.empty(20)
    _kernels.raycast_into(x, y, psi, th, np.array([[cx, cy, r]]), np.zeros((0, 4)), 5.0, out)
    for k, t in enumerate(th):
        dx, dy = -math.sin(psi - t), math.cos(psi - t)
        assert out[k] == pytest.approx(ray_circle_distance(x, y, dx, dy, cx, cy, r, 5.0), abs=1e-9)


def test_symmetric_world_gives_zero_turn():
    env = Environment(np.array([[-1.0, 4.0, 0.3], [1.0, 4.0, 0.3]]))
    d = raycast((0.0, 1.0, 0.0), env)
    K = k_from_intercepts(2.5, 10.0)
    assert control(K, d) == pytest.approx(0.0, abs=1e-12)


def test_control_clamps():
    K = k_from_intercepts(5.0, 10.0)
    d = np.full(20, 5.0)
    d[15] = 0.0  # floored at min_depth
    assert control(K, d) == RP.max_turn
    assert control(-K, d) == -RP.max_turn


def test_obstacle_on_the_right_turns_left():
    env = Environment(np.array([[0.6, 3.0, 0.4]]))
    d = raycast((0.0, 1.0, 0.0), env)
    assert d[10:].min() < d[:10].min()
    u = control(k_from_intercepts(2.5, 10.0), d)
    # positive u_diff speeds up the right wheel and increases psi (counter-clockwise)
    assert u > 0.0


def test_k_from_intercepts():
    K = k_from_intercepts(2.0, 4.0)
    th = SP.angles()
    np.testing.assert_allclose(K[th >= 0], 2.0 * (2.0 - th[th >= 0]))
    np.testing.assert_allclose(K, -K[::-1])
    assert len(finite_policy_grid()) == 50
    with pytest.raises(ValueError):
        k_from_intercepts(0.0, 1.0)


def test_initial_collision_costs_one():
    env = Environment(np.array([[0.0, 1.2, 0.1]]))
    res = rollout(np.zeros(20), env)
    assert res.cost01 == 1 and res.steps_survived == 0


def test_rollout_pure_and_batch_consistent():
    envs = sample_environments(EnvDistribution(), 5, 11)
    pols = finite_policy_grid()[::7]
    for env in envs:
        c, s = rollout_many(np.stack(pols), env)
        for j, K in enumerate(pols):
            r1, r2 = rollout(K, env), rollout(K, env)
            assert r1 == r2
            assert c[j] == r1.cost01 and s[j] == r1.surrogate


def test_surrogate_cost_values():
    np.testing.assert_allclose(surrogate_cost([0.0, 2.5, 5.0, 9.0, -1.0]), [1, 0.5, 0, 0, 1])


def test_disturbance_zero_noise_is_nominal():
    env = sample_environment(EnvDistribution(), 3)
    K = finite_policy_grid()[49]
    assert rollout_with_disturbance(K, env, noise_std=0.0) == rollout(K, env)
    a = rollout_with_disturbance(K, env, noise_std=0.3, noise_seed=5)
    b = rollout_with_disturbance(K, env, noise_std=0.3, noise_seed=5)
    assert a == b
    with pytest.raises(ValueError):
        rollout_with_disturbance(K, env, noise_std=-1.0)


def test_environment_sampling_ranges_and_determinism():
    env = sample_environment(EnvDistribution(), 123)
    o = env.obstacles
    assert 20 <= len(o) <= 40
    assert np.all((o[:, 0] >= -5) & (o[:, 0] <= 5) & (o[:, 1] >= 2) & (o[:, 1] <= 10))
    assert np.all((o[:, 2] >= 0.05) & (o[:, 2] <= 0.2))
    np.testing.assert_array_equal(sample_environment(EnvDistribution(), 123).obstacles, o)
    beta = sample_environment(EnvDistribution.beta_radius(0.8, 1.25), 7).obstacles
    assert np.unique(beta[:, 2]).size == 1 and 0.1 <= beta[0, 2] <= 1.1
    back = Environment.from_dict(env.to_dict())
    np.testing.assert_array_equal(back.obstacles, env.obstacles)
    assert back.seed == env.seed


def test_beta_radius_mean():
    d = EnvDistribution.beta_radius(1.0, 1.0)
    radii = [sample_environment(d, s).obstacles[0, 2] for s in range(2000)]
    assert np.mean(radii) == pytest.approx(d.mean_radius(), abs=0.03)
    assert EnvDistribution.from_dict(d.to_dict()) == d


def test_derived_seeds_distinct():
    seeds = {derive_seed(0, 0, i) for i in range(1000)} | {derive_seed(0, 1, i) for i in range(1000)}
    assert len(seeds) == 2000


def test_cost_matrix_worker_independent():
    envs = sample_environments(EnvDistribution(), 6, 4)
    pols = finite_policy_grid()
    a = cost_matrix(envs, pols, workers=1)
    b = cost_matrix(envs, pols, workers=3)
    np.testing.assert_array_equal(a.entries, b.entries)
    assert a.entries.shape == (6, 50)


def test_true_cost_estimate_deterministic():
    post = FinitePosterior(np.stack(finite_policy_grid()), np.full(50, 1 / 50))
    a = sample_true_costs(post, EnvDistribution(), 40, seed=9)
    b = sample_true_costs(post, EnvDistribution(), 40, seed=9, workers=2, chunk=7)
    np.testing.assert_array_equal(a, b)
    assert estimate_true_cost(post, EnvDistribution(), 40, seed=9) == a.mean()
    with pytest.raises(ValueError):
        sample_true_costs(post, EnvDistribution(), 0, seed=9)


def test_walls_layout():
    assert WALLS.shape == (3, 4)
    assert {tuple(w) for w in WALLS} == {(-5, 0, -5, 10), (5, 0, 5, 10), (-5, 10, 5, 10)}
