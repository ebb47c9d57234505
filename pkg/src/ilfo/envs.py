"""Two deterministic toy control environments and the rollout loop.

Both environments follow the same contract: continuous state, actions in
[-1, 1]^m, fixed dt, episodes ending at the horizon or on failure, and a
scripted teacher that solves the task. All randomness (initial states,
random-policy draws) comes from named Philox streams, so a (spec, policy,
seed) triple pins a rollout bitwise.
"""

from dataclasses import dataclass

import numpy as np

from . import streams
from .data import Trajectory


class UnknownEnvError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    horizon: int
    dt: float
    # Per-component magnitude bound on reachable states; networks divide
    # observations by this so tanh layers stay unsaturated.
    state_scale: tuple = ()


@dataclass
class EnvState:
    vector: np.ndarray
    step_index: int


# --- double integrator -----------------------------------------------------
#
# State (x, y, vx, vy). Semi-explicit Euler: position moves under the old
# velocity, then velocity absorbs the acceleration. Failure when the position
# leaves a radius-10 disc.

_DI_FAIL_RADIUS = 10.0


def _di_reset(spec, rng):
    pos = rng.uniform(-1.0, 1.0, size=2)
    return np.array([pos[0], pos[1], 0.0, 0.0])


def _di_step(spec, vec, action):
    pos = vec[:2] + vec[2:] * spec.dt
    vel = vec[2:] + action * spec.dt
    reward = -float(vec[0] ** 2 + vec[1] ** 2) - 0.01 * float(action @ action)
    failed = bool(pos @ pos > _DI_FAIL_RADIUS**2)
    return np.concatenate([pos, vel]), reward, failed


def _di_teacher(spec, vec):
    return np.clip(-1.0 * vec[:2] - 1.8 * vec[2:], -1.0, 1.0)


# --- pendulum --------------------------------------------------------------
#
# State (cos th, sin th, th_dot), th = 0 pointing up (unstable equilibrium).
# th_ddot = 15 sin th + 6 u, th_dot clamped to +/-8 so the state stays
# bounded for any action sequence. The teacher pumps energy toward the
# upright level E_top and hands over to a PD law near the top.

_PEND_MAX_SPEED = 8.0
_PEND_E_TOP = 15.0


def _pend_reset(spec, rng):
    th = rng.uniform(-np.pi, np.pi)
    th_dot = rng.uniform(-1.0, 1.0)
    return np.array([np.cos(th), np.sin(th), th_dot])


def _pend_step(spec, vec, action):
    th = np.arctan2(vec[1], vec[0])
    th_dot = vec[2]
    u = float(action[0])
    reward = -float(th * th + 0.1 * th_dot * th_dot + 0.001 * u * u)
    th_ddot = 15.0 * np.sin(th) + 6.0 * u
    th_dot = np.clip(th_dot + th_ddot * spec.dt, -_PEND_MAX_SPEED, _PEND_MAX_SPEED)
    th = th + th_dot * spec.dt
    return np.array([np.cos(th), np.sin(th), th_dot]), reward, False


def _pend_teacher(spec, vec):
    th = np.arctan2(vec[1], vec[0])
    th_dot = vec[2]
    if vec[0] > 0.95 and abs(th_dot) < 2.5:
        u = -3.2 * th - 0.85 * th_dot
    elif abs(th_dot) < 0.05:
        u = 1.0  # turning point or hanging rest: full push to get moving
    else:
        energy = 0.5 * th_dot * th_dot + _PEND_E_TOP * vec[0]
        u = 0.55 * th_dot * (_PEND_E_TOP - energy)
    return np.clip(np.array([u]), -1.0, 1.0)


_REGISTRY = {
    "double-integrator": {
        "state_dim": 4,
        "action_dim": 2,
        "dt": 0.05,
        # position bounded by the failure disc, velocity by horizon * |a| * dt
        "state_scale": (_DI_FAIL_RADIUS, _DI_FAIL_RADIUS, 5.0, 5.0),
        "reset": _di_reset,
        "step": _di_step,
        "teacher": _di_teacher,
    },
    "pendulum": {
        "state_dim": 3,
        "action_dim": 1,
        "dt": 0.05,
        "state_scale": (1.0, 1.0, _PEND_MAX_SPEED),
        "reset": _pend_reset,
        "step": _pend_step,
        "teacher": _pend_teacher,
    },
}


def env_names() -> list:
    return list(_REGISTRY)


def _entry(name: str) -> dict:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownEnvError(
            f"unknown environment {name!r}; known: {sorted(_REGISTRY)}"
        ) from None


def get_spec(name: str, horizon: int = 100) -> EnvSpec:
    entry = _entry(name)
    if horizon < 1:
        raise ValueError(f"horizon must be positive: {horizon}")
    return EnvSpec(
        name=name,
        state_dim=entry["state_dim"],
        action_dim=entry["action_dim"],
        horizon=int(horizon),
        dt=entry["dt"],
        state_scale=entry["state_scale"],
    )


def reset(spec: EnvSpec, seed: int) -> EnvState:
    """Deterministic initial state from the reset stream of `seed`."""
    rng = streams.rng_stream(seed, streams.RESET)
    vec = _entry(spec.name)["reset"](spec, rng)
    return EnvState(vector=vec.astype(np.float64), step_index=0)


def step(spec: EnvSpec, state: EnvState, action) -> tuple:
    """Advance one step; returns (next_state, reward, done)."""
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (spec.action_dim,):
        raise DimensionError(
            f"action shape {action.shape} != ({spec.action_dim},)"
        )
    if state.vector.shape != (spec.state_dim,):
        raise DimensionError(
            f"state shape {state.vector.shape} != ({spec.state_dim},)"
        )
    action = np.clip(action, -1.0, 1.0)
    vec, reward, failed = _entry(spec.name)["step"](spec, state.vector, action)
    nxt = EnvState(vector=vec, step_index=state.step_index + 1)
    done = failed or nxt.step_index >= spec.horizon
    return nxt, reward, done


def teacher_action(spec: EnvSpec, state: EnvState) -> np.ndarray:
    return _entry(spec.name)["teacher"](spec, state.vector)


def teacher_policy(spec: EnvSpec):
    """The scripted teacher as a plain state -> action callable."""

    def policy(vec: np.ndarray) -> np.ndarray:
        return _entry(spec.name)["teacher"](spec, vec)

    return policy


def random_policy(spec: EnvSpec, seed: int):
    """Uniform actions on [-1, 1]^m from the random-policy stream of `seed`."""
    rng = streams.rng_stream(seed, streams.RANDOM_POLICY)

    def policy(vec: np.ndarray) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=spec.action_dim)

    return policy


def rollout(spec: EnvSpec, policy, seed: int, record_actions: bool = False) -> Trajectory:
    """Run `policy` (state vector -> action) from reset(seed) to episode end.

    record_actions=True keeps actions and rewards on the returned trajectory;
    otherwise it is state-only.
    """
    state = reset(spec, seed)
    states = [state.vector.copy()]
    actions = []
    rewards = []
    done = False
    while not done:
        action = np.clip(np.asarray(policy(state.vector), dtype=np.float64), -1.0, 1.0)
        state, reward, done = step(spec, state, action)
        states.append(state.vector.copy())
        if record_actions:
            actions.append(action)
            rewards.append(reward)
    return Trajectory(
        seed=seed,
        states=np.stack(states),
        actions=np.stack(actions) if record_actions else None,
        rewards=np.asarray(rewards) if record_actions else None,
    )
