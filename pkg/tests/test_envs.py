"""Environment contracts: resets, dynamics, teachers, rollouts, dominance."""

import numpy as np
import pytest

from ilfo import envs, streams


def test_env_names_lists_both():
    names = envs.env_names()
    assert "double-integrator" in names
    assert "pendulum" in names


def test_unknown_env_raises():
    with pytest.raises(envs.UnknownEnvError):
        envs.get_spec("no-such-env")


def test_get_spec_rejects_bad_horizon():
    with pytest.raises(ValueError):
        envs.get_spec("pendulum", horizon=0)


def test_spec_shapes():
    di = envs.get_spec("double-integrator")
    assert (di.state_dim, di.action_dim) == (4, 2)
    assert len(di.state_scale) == 4
    pend = envs.get_spec("pendulum", horizon=50)
    assert (pend.state_dim, pend.action_dim) == (3, 1)
    assert pend.horizon == 50
    assert len(pend.state_scale) == 3


# --- reset ---------------------------------------------------------------------


def test_di_reset_replicates_named_stream():
    """The initial state must come verbatim from the reset stream of the seed."""
    spec = envs.get_spec("double-integrator")
    for seed in (0, 1, 77, 123456):
        state = envs.reset(spec, seed)
        rng = streams.rng_stream(seed, streams.RESET)
        expected = rng.uniform(-1.0, 1.0, size=2)
        assert np.array_equal(state.vector[:2], expected)
        assert np.array_equal(state.vector[2:], [0.0, 0.0])
        assert state.step_index == 0


def test_di_reset_positions_stay_in_unit_box():
    spec = envs.get_spec("double-integrator")
    for seed in range(200):
        vec = envs.reset(spec, seed).vector
        assert np.all(np.abs(vec[:2]) <= 1.0)


def test_pendulum_reset_is_on_the_circle():
    spec = envs.get_spec("pendulum")
    for seed in range(200):
        vec = envs.reset(spec, seed).vector
        assert vec[0] ** 2 + vec[1] ** 2 == pytest.approx(1.0, rel=1e-12)
        assert abs(vec[2]) <= 1.0


def test_reset_is_deterministic_per_seed():
    for name in envs.env_names():
        spec = envs.get_spec(name)
        a = envs.reset(spec, 42).vector
        b = envs.reset(spec, 42).vector
        assert np.array_equal(a, b)
        c = envs.reset(spec, 43).vector
        assert not np.array_equal(a, c)


# --- step ----------------------------------------------------------------------


def test_di_rest_at_unit_x_is_position_fixed_point():
    spec = envs.get_spec("double-integrator")
    state = envs.EnvState(vector=np.array([1.0, 0.0, 0.0, 0.0]), step_index=0)
    nxt, reward, done = envs.step(spec, state, np.zeros(2))
    assert np.array_equal(nxt.vector, [1.0, 0.0, 0.0, 0.0])
    assert reward == pytest.approx(-1.0, rel=1e-12)
    assert not done


def test_di_position_moves_under_old_velocity():
    spec = envs.get_spec("double-integrator")
    state = envs.EnvState(vector=np.array([0.0, 0.0, 1.0, 0.0]), step_index=0)
    nxt, _, _ = envs.step(spec, state, np.zeros(2))
    assert np.allclose(nxt.vector, [0.05, 0.0, 1.0, 0.0], atol=1e-15)


def test_di_action_changes_velocity_only():
    spec = envs.get_spec("double-integrator")
    state = envs.EnvState(vector=np.zeros(4), step_index=0)
    nxt, _, _ = envs.step(spec, state, np.array([1.0, -1.0]))
    assert np.allclose(nxt.vector, [0.0, 0.0, 0.05, -0.05], atol=1e-15)


def test_di_fails_outside_radius_ten():
    spec = envs.get_spec("double-integrator")
    state = envs.EnvState(vector=np.array([10.0, 0.0, 1.0, 0.0]), step_index=0)
    _, _, done = envs.step(spec, state, np.zeros(2))
    assert done


def test_di_action_is_clipped():
    spec = envs.get_spec("double-integrator")
    state = envs.EnvState(vector=np.zeros(4), step_index=0)
    big, _, _ = envs.step(spec, state, np.array([10.0, 10.0]))
    unit, _, _ = envs.step(spec, state, np.array([1.0, 1.0]))
    assert np.array_equal(big.vector, unit.vector)


def test_step_rejects_wrong_action_shape():
    spec = envs.get_spec("double-integrator")
    state = envs.reset(spec, 0)
    with pytest.raises(envs.DimensionError):
        envs.step(spec, state, np.zeros(3))


def test_done_at_horizon():
    spec = envs.get_spec("double-integrator", horizon=2)
    state = envs.reset(spec, 0)
    state, _, done = envs.step(spec, state, np.zeros(2))
    assert not done
    state, _, done = envs.step(spec, state, np.zeros(2))
    assert done


def test_pendulum_upright_is_equilibrium_for_one_step():
    spec = envs.get_spec("pendulum")
    state = envs.EnvState(vector=np.array([1.0, 0.0, 0.0]), step_index=0)
    nxt, reward, done = envs.step(spec, state, np.zeros(1))
    th = np.arctan2(nxt.vector[1], nxt.vector[0])
    assert abs(th) < 1e-6
    assert reward == pytest.approx(0.0, abs=1e-12)
    assert not done


def test_pendulum_speed_is_clamped():
    spec = envs.get_spec("pendulum")
    state = envs.EnvState(vector=np.array([-1.0, 0.0, 7.99]), step_index=0)
    nxt, _, _ = envs.step(spec, state, np.array([1.0]))
    assert abs(nxt.vector[2]) <= 8.0


def test_pendulum_reward_is_worst_at_the_bottom():
    spec = envs.get_spec("pendulum")
    bottom = envs.EnvState(vector=np.array([-1.0, 0.0, 0.0]), step_index=0)
    top = envs.EnvState(vector=np.array([1.0, 0.0, 0.0]), step_index=0)
    _, r_bottom, _ = envs.step(spec, bottom, np.zeros(1))
    _, r_top, _ = envs.step(spec, top, np.zeros(1))
    assert r_bottom == pytest.approx(-np.pi**2, rel=1e-9)
    assert r_top > r_bottom


# --- teachers --------------------------------------------------------------------


def test_di_teacher_at_origin_rest_is_zero():
    spec = envs.get_spec("double-integrator")
    state = envs.EnvState(vector=np.zeros(4), step_index=0)
    assert np.array_equal(envs.teacher_action(spec, state), [0.0, 0.0])


def test_di_teacher_pd_gains():
    spec = envs.get_spec("double-integrator")
    state = envs.EnvState(vector=np.array([1.0, 0.0, 0.0, 0.0]), step_index=0)
    assert np.allclose(envs.teacher_action(spec, state), [-1.0, 0.0], atol=1e-15)
    state = envs.EnvState(vector=np.array([0.0, 0.5, 0.0, 0.25]), step_index=0)
    assert np.allclose(
        envs.teacher_action(spec, state), [0.0, -0.5 - 1.8 * 0.25], atol=1e-15
    )


def test_teacher_actions_respect_bounds():
    for name in envs.env_names():
        spec = envs.get_spec(name)
        for seed in range(20):
            traj = envs.rollout(spec, envs.teacher_policy(spec), seed, record_actions=True)
            assert np.all(np.abs(traj.actions) <= 1.0)


def test_teacher_dominates_random_on_100_seeds():
    """Precondition for the performance metric's denominator."""
    for name in envs.env_names():
        spec = envs.get_spec(name)
        teacher_returns, random_returns = [], []
        for seed in range(100):
            t = envs.rollout(spec, envs.teacher_policy(spec), seed, record_actions=True)
            r = envs.rollout(spec, envs.random_policy(spec, seed), seed, record_actions=True)
            teacher_returns.append(t.episode_return())
            random_returns.append(r.episode_return())
        assert np.mean(teacher_returns) > np.mean(random_returns), name


def test_pendulum_teacher_reaches_the_top():
    spec = envs.get_spec("pendulum", horizon=200)
    for seed in range(10):
        traj = envs.rollout(spec, envs.teacher_policy(spec), seed)
        # cos(theta) near 1 somewhere in the tail: the swing-up succeeded
        assert np.max(traj.states[100:, 0]) > 0.95, seed


# --- rollouts --------------------------------------------------------------------


def test_rollout_shapes_and_determinism():
    spec = envs.get_spec("double-integrator", horizon=40)
    a = envs.rollout(spec, envs.teacher_policy(spec), 5, record_actions=True)
    b = envs.rollout(spec, envs.teacher_policy(spec), 5, record_actions=True)
    assert a.states.shape == (a.n_steps + 1, 4)
    assert a.actions.shape == (a.n_steps, 2)
    assert a.rewards.shape == (a.n_steps,)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.actions, b.actions)
    assert a.seed == 5


def test_rollout_without_recording_keeps_states_only():
    spec = envs.get_spec("pendulum", horizon=10)
    traj = envs.rollout(spec, envs.teacher_policy(spec), 0)
    assert traj.actions is None
    assert traj.rewards is None
    assert traj.states.shape[0] == traj.n_steps + 1


def test_rollout_states_are_finite():
    for name in envs.env_names():
        spec = envs.get_spec(name)
        for seed in range(20):
            traj = envs.rollout(spec, envs.random_policy(spec, seed), seed)
            assert np.all(np.isfinite(traj.states))


def test_zero_policy_from_rest_keeps_position():
    spec = envs.get_spec("double-integrator", horizon=3)
    traj = envs.rollout(spec, lambda s: np.zeros(2), 11)
    assert traj.states.shape == (4, 4)
    for row in traj.states:
        assert np.array_equal(row[:2], traj.states[0, :2])


def test_random_policy_is_bounded_and_seeded():
    spec = envs.get_spec("double-integrator")
    pol_a = envs.random_policy(spec, 3)
    pol_b = envs.random_policy(spec, 3)
    state = envs.reset(spec, 0).vector
    seq_a = [pol_a(state) for _ in range(50)]
    seq_b = [pol_b(state) for _ in range(50)]
    assert np.array_equal(seq_a, seq_b)
    assert np.all(np.abs(seq_a) <= 1.0)


def test_rollout_respects_failure_termination():
    spec = envs.get_spec("double-integrator", horizon=500)
    # constant full push in +x: position must cross the failure disc early
    traj = envs.rollout(spec, lambda s: np.array([1.0, 0.0]), 0)
    assert traj.n_steps < 500
    assert np.linalg.norm(traj.states[-1, :2]) > 10.0
