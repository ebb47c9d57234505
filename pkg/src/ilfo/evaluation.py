"""Metrics, the seed-disjoint evaluation protocol, and independent oracles.

The oracles (finite differences, supervised cloning, the closed-form
optimal discriminator) deliberately share no code with the training path:
they exist to check it.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import envs
from .data import MissingActionsError
from .models import PolicyNet
from .streams import SHUFFLE, rng_stream


class DegenerateBaselineError(ValueError):
    pass


class InsufficientSeedsError(RuntimeError):
    pass


class UndefinedInputError(ValueError):
    pass


def aer(policy, spec, seeds) -> tuple:
    """Average episodic reward: mean and population std of undiscounted
    episode returns of `policy` (state -> action) over the given seeds."""
    if len(seeds) == 0:
        raise ValueError("aer needs at least one seed")
    returns = []
    for seed in seeds:
        traj = envs.rollout(spec, policy, seed, record_actions=True)
        returns.append(traj.episode_return())
    returns = np.asarray(returns)
    return float(returns.mean()), float(returns.std())


def performance(aer_agent: float, aer_random: float, aer_teacher: float) -> float:
    """Normalized score: 0 at the random baseline, 1 at the teacher.

    P = (AER_agent - AER_random) / (AER_teacher - AER_random)
    """
    denom = aer_teacher - aer_random
    if denom == 0.0:
        raise DegenerateBaselineError(
            "teacher and random baselines coincide; performance undefined"
        )
    return (aer_agent - aer_random) / denom


def coefficient_of_variation(mean: float, std: float) -> float:
    """CV = std / |mean|; scale-free spread of episode returns."""
    if mean == 0.0:
        raise DegenerateBaselineError("coefficient of variation undefined at zero mean")
    return std / abs(mean)


@dataclass
class EvalReport:
    aer_mean: float
    aer_std: float
    cv: float
    performance: float
    n_seeds: int
    seed_digest: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "aer_mean": self.aer_mean,
                "aer_std": self.aer_std,
                "cv": self.cv,
                "performance": self.performance,
                "n_seeds": self.n_seeds,
                "seed_digest": self.seed_digest,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        raw = json.loads(text)
        return cls(**raw)


def seed_digest(seeds) -> str:
    h = hashlib.sha256()
    for s in seeds:
        h.update(int(s).to_bytes(8, "little"))
    return h.hexdigest()


def disjoint_eval_seeds(
    spec,
    trajectories,
    online_states,
    n: int,
    base: int = 0,
    tolerance: float = 1e-9,
    max_candidates: int = None,
) -> list:
    """First n seeds >= base whose reset states collide with nothing seen in
    training: neither dataset initial states nor online-play initial states.

    Collision = any recorded state matches the candidate's reset state to
    within `tolerance` per component.
    """
    seen = [traj.states[0] for traj in trajectories]
    if online_states is not None:
        for s in np.atleast_2d(np.asarray(online_states, dtype=np.float64)):
            if s.size:
                seen.append(s)
    seen = np.stack(seen) if seen else np.zeros((0, spec.state_dim))
    if max_candidates is None:
        max_candidates = 100 * n + 10_000
    out = []
    candidate = int(base)
    scanned = 0
    while len(out) < n:
        if scanned >= max_candidates:
            raise InsufficientSeedsError(
                f"found {len(out)}/{n} disjoint seeds in {scanned} candidates"
            )
        vec = envs.reset(spec, candidate).vector
        if seen.size == 0 or not bool(
            (np.abs(seen - vec).max(axis=1) <= tolerance).any()
        ):
            out.append(candidate)
        candidate += 1
        scanned += 1
    return out


def random_baseline_aer(spec, seeds) -> tuple:
    """AER of the uniform-random baseline; each seed gets its own action
    stream, so the value is a function of the seed set alone."""
    returns = []
    for seed in seeds:
        traj = envs.rollout(spec, envs.random_policy(spec, seed), seed, record_actions=True)
        returns.append(traj.episode_return())
    returns = np.asarray(returns)
    return float(returns.mean()), float(returns.std())


def evaluate_policy(policy, spec, seeds, aer_random=None, aer_teacher=None) -> EvalReport:
    """AER of `policy` on `seeds`, with baselines (computed on the same seeds
    when not supplied) turned into a performance score."""
    mean, std = aer(policy, spec, seeds)
    if aer_teacher is None:
        aer_teacher, _ = aer(envs.teacher_policy(spec), spec, seeds)
    if aer_random is None:
        aer_random, _ = random_baseline_aer(spec, seeds)
    return EvalReport(
        aer_mean=mean,
        aer_std=std,
        cv=coefficient_of_variation(mean, std),
        performance=performance(mean, aer_random, aer_teacher),
        n_seeds=len(seeds),
        seed_digest=seed_digest(seeds),
    )


def optimal_discriminator_oracle(p_teacher: float, p_agent: float) -> float:
    """The exact optimum of the two-label (1 teacher / 0 agent) log loss at a
    support point: p_teacher / (p_teacher + p_agent)."""
    if p_teacher < 0 or p_agent < 0 or p_teacher + p_agent <= 0:
        raise UndefinedInputError(
            f"need non-negative masses with positive sum: {p_teacher}, {p_agent}"
        )
    return p_teacher / (p_teacher + p_agent)


def finite_difference_gradient(loss_fn, params: ad.ParameterSet, h: float = 1e-5) -> dict:
    """Central-difference gradient of loss_fn(params) w.r.t. every trainable
    component. loss_fn may return a float or a scalar graph node. Parameters
    are restored bitwise afterwards."""

    def scalar() -> float:
        out = loss_fn(params)
        if isinstance(out, ad.Value):
            return float(np.asarray(out.data).reshape(()))
        return float(out)

    grads = {}
    for name in params.trainable_names():
        arr = params.data(name)
        original = arr.copy()
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            up = scalar()
            flat[i] = saved - h
            down = scalar()
            flat[i] = saved
            gflat[i] = (up - down) / (2.0 * h)
        np.copyto(arr, original)
        grads[name] = g
    return grads


def bc_oracle_train(
    spec,
    trajectories,
    hidden=(64, 64, 64),
    lr: float = 1e-3,
    epochs: int = 20,
    batch_size: int = 128,
    seed: int = 0,
):
    """Supervised behavioral cloning on a labelled dataset; the reference
    ceiling the observation-only pipeline is compared against.

    Returns (policy, per-epoch mean losses). Raises MissingActionsError on a
    state-only dataset.
    """
    states, actions = [], []
    for traj in trajectories:
        if traj.actions is None:
            raise MissingActionsError("behavioral cloning needs recorded actions")
        states.append(traj.states[:-1])
        actions.append(traj.actions)
    states = np.concatenate(states)
    actions = np.concatenate(actions)
    policy = PolicyNet(spec.state_dim, spec.action_dim, hidden=hidden, seed=seed)
    adam = ad.AdamState(policy.params)
    losses = []
    for epoch in range(epochs):
        order = rng_stream(seed, SHUFFLE, index=epoch).permutation(len(states))
        total, count = 0.0, 0
        for lo in range(0, len(states), batch_size):
            idx = order[lo : lo + batch_size]
            pred = policy.forward_batch(ad.Value(states[idx]))
            diff = ad.sub(pred, ad.Value(actions[idx]))
            loss = ad.scale(ad.sum_all(ad.square(diff)), 1.0 / len(idx))
            grads = ad.backward(loss)
            ad.adam_step(policy.params, grads, adam, lr)
            total += float(loss.data) * len(idx)
            count += len(idx)
        losses.append(total / count)
    return policy, losses
