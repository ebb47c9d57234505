"""Trajectory containers, the JSONL dataset format, and delta sequences."""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np


class DatasetFormatError(ValueError):
    pass


class TooShortError(ValueError):
    pass


class MissingActionsError(ValueError):
    pass


@dataclass
class Trajectory:
    """One episode. States has shape (T+1, n); actions/rewards, when present,
    have length T and line up with the transition they caused."""

    seed: int
    states: np.ndarray
    actions: np.ndarray = None
    rewards: np.ndarray = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim != 2 or len(self.states) < 1:
            raise DatasetFormatError(
                f"states must be a (T+1, n) array, got shape {self.states.shape}"
            )
        n_steps = len(self.states) - 1
        if self.actions is not None:
            self.actions = np.asarray(self.actions, dtype=np.float64)
            if len(self.actions) != n_steps:
                raise DatasetFormatError(
                    f"{len(self.actions)} actions for {n_steps} transitions"
                )
        if self.rewards is not None:
            self.rewards = np.asarray(self.rewards, dtype=np.float64)
            if len(self.rewards) != n_steps:
                raise DatasetFormatError(
                    f"{len(self.rewards)} rewards for {n_steps} transitions"
                )

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    def episode_return(self) -> float:
        if self.rewards is None:
            raise DatasetFormatError("trajectory carries no rewards")
        return float(self.rewards.sum())


@dataclass
class Dataset:
    """A bag of trajectories plus where they came from. The JSONL file format
    is trajectory-only; env_name/metadata exist in memory for bookkeeping."""

    trajectories: list
    env_name: str = None
    metadata: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.trajectories)

    def __len__(self):
        return len(self.trajectories)

    def __getitem__(self, i):
        return self.trajectories[i]


def _trajectories(dataset):
    return dataset.trajectories if isinstance(dataset, Dataset) else list(dataset)


@dataclass
class TransitionPair:
    s: np.ndarray
    s_next: np.ndarray


@dataclass
class DeltaSequence:
    """Per-step absolute state changes, shape (T, n). source is 'teacher'
    (successor observed from the environment) or 'agent' (successor predicted
    by the generator)."""

    deltas: np.ndarray
    source: str

    def __post_init__(self):
        self.deltas = np.asarray(self.deltas, dtype=np.float64)
        if self.source not in ("teacher", "agent"):
            raise ValueError(f"unknown delta source: {self.source}")
        if self.deltas.ndim != 2:
            raise DatasetFormatError(f"deltas must be 2-D, got {self.deltas.shape}")
        if np.any(self.deltas < 0):
            raise ValueError("deltas must be non-negative")

    def __len__(self):
        return len(self.deltas)


def extract_transition_pairs(dataset) -> list:
    """All consecutive (s_i, s_{i+1}) pairs, trajectory order then time order.

    Trajectories with fewer than 2 states contribute nothing; they are
    counted and reported once as a warning.
    """
    pairs = []
    skipped = 0
    for traj in _trajectories(dataset):
        if traj.n_steps < 1:
            skipped += 1
            continue
        for i in range(traj.n_steps):
            pairs.append(TransitionPair(traj.states[i], traj.states[i + 1]))
    if skipped:
        warnings.warn(f"skipped {skipped} trajectories with fewer than 2 states")
    return pairs


def transition_arrays(dataset):
    """extract_transition_pairs stacked into (S, S_next) arrays."""
    pairs = extract_transition_pairs(dataset)
    s = np.stack([p.s for p in pairs])
    s_next = np.stack([p.s_next for p in pairs])
    return s, s_next


def teacher_delta_sequence(trajectory: Trajectory) -> DeltaSequence:
    """Entry i is |s_i - s_{i+1}| with the environment's own successor."""
    states = trajectory.states
    if len(states) < 2:
        raise TooShortError("need at least 2 states for a delta sequence")
    return DeltaSequence(np.abs(states[:-1] - states[1:]), "teacher")


def save_dataset(dataset, path) -> None:
    """JSON Lines, one trajectory per line. Floats round-trip exactly."""
    with open(path, "w") as fh:
        for traj in _trajectories(dataset):
            record = {"seed": int(traj.seed), "states": traj.states.tolist()}
            if traj.actions is not None:
                record["actions"] = traj.actions.tolist()
            if traj.rewards is not None:
                record["rewards"] = traj.rewards.tolist()
            fh.write(json.dumps(record))
            fh.write("\n")


def load_dataset(path, env_name: str = None) -> Dataset:
    trajectories = []
    state_dim = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: bad JSON: {exc}") from None
            if not isinstance(record, dict) or "states" not in record or "seed" not in record:
                raise DatasetFormatError(
                    f"{path}:{lineno}: each line needs 'seed' and 'states'"
                )
            try:
                traj = Trajectory(
                    seed=record["seed"],
                    states=record["states"],
                    actions=record.get("actions"),
                    rewards=record.get("rewards"),
                )
            except (ValueError, TypeError) as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from None
            if state_dim is None:
                state_dim = traj.states.shape[1]
            elif traj.states.shape[1] != state_dim:
                raise DatasetFormatError(
                    f"{path}:{lineno}: state dimension {traj.states.shape[1]} "
                    f"does not match earlier {state_dim}"
                )
            trajectories.append(traj)
    return Dataset(trajectories, env_name=env_name, metadata={"path": str(path)})


def generate_teacher_dataset(
    spec, n: int, seed_base: int = 0, record_actions: bool = False
) -> Dataset:
    """n teacher episodes under seeds seed_base..seed_base+n-1.

    State-only by default: the imitation pipeline never sees teacher actions
    or rewards. record_actions=True exists for the supervised oracle.
    """
    from .envs import rollout, teacher_policy  # late import; envs uses Trajectory

    if n < 1:
        raise ValueError(f"need at least one trajectory: n={n}")
    policy = teacher_policy(spec)
    out = []
    for i in range(n):
        traj = rollout(spec, policy, seed_base + i, record_actions=True)
        out.append(
            Trajectory(
                seed=traj.seed,
                states=traj.states,
                actions=traj.actions if record_actions else None,
            )
        )
    return Dataset(
        out,
        env_name=spec.name,
        metadata={"seed_base": int(seed_base), "n": int(n), "teacher": "scripted"},
    )
