"""The two-stage training loop.

Stage 1 (reconstruction) alternates per epoch: the policy trains through a
frozen generator to reproduce teacher next states, then the generator trains
on fresh transitions from the agent's own rollouts with the policy frozen.
Stage 2 (adversarial) freezes the generator for good and refines the policy
against a recurrent discriminator that reads delta sequences, taking small
clipped steps so the reconstruction-stage behavior is preserved.

Everything is deterministic given the config: weights, shuffles and dropout
come from streams keyed by master_seed; environment seeds come from fixed
disjoint ranges (teacher / agent rollouts / generator eval / probes).
"""

import json
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import autodiff as ad
from . import envs
from .data import (
    Dataset,
    DeltaSequence,
    generate_teacher_dataset,
    teacher_delta_sequence,
    transition_arrays,
)
from .models import (
    DiscriminatorNet,
    FrozenViolationError,
    GeneratorNet,
    PolicyNet,
    frozen,
    save_models,
)
from .streams import DROPOUT, SHUFFLE, rng_stream

# environment seed ranges; disjoint so no training stream replays another
AGENT_SEED_BASE = 1_000_000  # stage-1 generator rollouts
GEN_EVAL_SEED_BASE = 5_000_000  # held-out generator eval rollouts
ADV_SEED_BASE = 7_000_000  # stage-2 agent rollouts
PROBE_SEED_BASE = 9_000_000  # per-epoch AER probe
_SEEDS_PER_EPOCH = 1_000


class ConfigError(ValueError):
    pass


class NumericAbortError(RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


@dataclass
class ExperimentConfig:
    """Everything a run depends on. Defaults are the desk-scale setup that
    the acceptance thresholds are calibrated to."""

    env_name: str = "double-integrator"
    n_teacher_trajectories: int = 700
    epochs_r: int = 200
    epochs_a: int = 10
    lr_reconstruction: float = 1e-3
    lr_policy_adversarial: float = 1e-5
    lr_discriminator: float = 1e-3
    reconstruction_loss: str = "squared"
    rollouts_per_epoch: int = 10
    batch_size: int = 32
    clip_norm: float = 1.0
    master_seed: int = 0
    policy_hidden: tuple = (64, 64, 64)
    generator_hidden: tuple = (64, 64, 64)
    disc_lstm_hidden: int = 32
    disc_lstm_layers: int = 1
    disc_head_hidden: int = 64
    disc_dropout: float = 0.5
    horizon: int = 100
    teacher_seed_base: int = 0
    probe_rollouts: int = 8
    gen_eval_rollouts: int = 2

    def validate(self) -> None:
        problems = []
        if self.env_name not in envs.env_names():
            problems.append(f"env_name {self.env_name!r} not in {envs.env_names()}")
        if self.n_teacher_trajectories < 1:
            problems.append("n_teacher_trajectories must be >= 1")
        if self.epochs_r < 0 or self.epochs_a < 0:
            problems.append("epoch counts must be >= 0")
        if self.epochs_a > self.epochs_r:
            problems.append(
                f"epochs_a ({self.epochs_a}) must not exceed epochs_r ({self.epochs_r})"
            )
        for name in ("lr_reconstruction", "lr_policy_adversarial", "lr_discriminator"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.lr_policy_adversarial >= self.lr_reconstruction:
            problems.append(
                "lr_policy_adversarial must be lower than lr_reconstruction"
            )
        if self.reconstruction_loss not in ("squared", "absolute"):
            problems.append(
                f"reconstruction_loss must be 'squared' or 'absolute', "
                f"got {self.reconstruction_loss!r}"
            )
        if not 1 <= self.rollouts_per_epoch < _SEEDS_PER_EPOCH:
            problems.append(f"rollouts_per_epoch must be in [1, {_SEEDS_PER_EPOCH})")
        if not 1 <= self.gen_eval_rollouts < _SEEDS_PER_EPOCH:
            problems.append(f"gen_eval_rollouts must be in [1, {_SEEDS_PER_EPOCH})")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.clip_norm <= 0:
            problems.append("clip_norm must be positive")
        if self.master_seed < 0:
            problems.append("master_seed must be >= 0")
        if self.horizon < 1:
            problems.append("horizon must be >= 1")
        if self.probe_rollouts < 1:
            problems.append("probe_rollouts must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy_hidden"] = list(self.policy_hidden)
        d["generator_hidden"] = list(self.generator_hidden)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg = cls(**raw)
        cfg.policy_hidden = tuple(cfg.policy_hidden)
        cfg.generator_hidden = tuple(cfg.generator_hidden)
        return cfg


@dataclass
class EpochRecord:
    epoch: int
    stage: str
    policy_loss: float
    gen_loss_train: float
    gen_loss_eval: float
    aer_probe: float


class TrainingLog:
    """Per-epoch training curves with a fixed CSV schema."""

    CSV_HEADER = "epoch,stage,policy_loss,gen_loss_train,gen_loss_eval,aer_probe"

    def __init__(self, records=None):
        self.records = list(records) if records else []

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def stage_records(self, stage: str) -> list:
        return [r for r in self.records if r.stage == stage]

    def __len__(self):
        return len(self.records)

    @staticmethod
    def _fmt(x) -> str:
        return "" if x is None else repr(float(x))

    def to_csv(self, path) -> None:
        lines = [self.CSV_HEADER]
        for r in self.records:
            lines.append(
                f"{r.epoch},{r.stage},{self._fmt(r.policy_loss)},"
                f"{self._fmt(r.gen_loss_train)},{self._fmt(r.gen_loss_eval)},"
                f"{self._fmt(r.aer_probe)}"
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines))
            fh.write("\n")

    @classmethod
    def from_csv(cls, path) -> "TrainingLog":
        with open(path) as fh:
            lines = [ln for ln in fh.read().splitlines() if ln]
        if not lines or lines[0] != cls.CSV_HEADER:
            raise ValueError(f"{path}: not a training log")
        records = []
        for ln in lines[1:]:
            epoch, stage, p, gt, ge, probe = ln.split(",")
            records.append(
                EpochRecord(
                    epoch=int(epoch),
                    stage=stage,
                    policy_loss=float(p) if p else None,
                    gen_loss_train=float(gt) if gt else None,
                    gen_loss_eval=float(ge) if ge else None,
                    aer_probe=float(probe) if probe else None,
                )
            )
        return cls(records)


def _reconstruction_loss(pred: ad.Value, target: np.ndarray, kind: str) -> ad.Value:
    """Mean over the batch of per-pair |s' - G|, squared or absolute."""
    diff = ad.sub(ad.Value(target), pred)
    per = ad.square(diff) if kind == "squared" else ad.absolute(diff)
    return ad.scale(ad.sum_all(per), 1.0 / len(target))


def reconstruction_policy_epoch(
    policy: PolicyNet,
    generator: GeneratorNet,
    states: np.ndarray,
    next_states: np.ndarray,
    lr: float,
    batch_size: int,
    adam: ad.AdamState,
    shuffle_rng,
    loss_kind: str = "squared",
) -> float:
    """One pass over the teacher pairs: minimize |s' - G(s, pi(s))| in theta.

    The generator must already be frozen; gradients flow through it into the
    policy only.
    """
    if not generator.params.all_frozen():
        raise FrozenViolationError("generator must be frozen during the policy epoch")
    order = shuffle_rng.permutation(len(states))
    total = 0.0
    for lo in range(0, len(order), batch_size):
        idx = order[lo : lo + batch_size]
        s = ad.Value(states[idx])
        actions = policy.forward_batch(s)
        pred = generator.forward_batch(s, actions)
        loss = _reconstruction_loss(pred, next_states[idx], loss_kind)
        grads = ad.backward(loss)
        ad.adam_step(policy.params, grads, adam, lr)
        total += float(loss.data) * len(idx)
    return total / len(order)


def _collect_agent_transitions(policy, spec, seeds, online_sink=None):
    """Fresh on-policy rollouts, merged in seed order; returns (S, A, S')."""
    s_parts, a_parts, s1_parts = [], [], []
    for seed in seeds:
        traj = envs.rollout(spec, policy.act, seed, record_actions=True)
        if online_sink is not None:
            online_sink.append(traj.states[0].copy())
        s_parts.append(traj.states[:-1])
        a_parts.append(traj.actions)
        s1_parts.append(traj.states[1:])
    return (
        np.concatenate(s_parts),
        np.concatenate(a_parts),
        np.concatenate(s1_parts),
    )


def reconstruction_generator_epoch(
    generator: GeneratorNet,
    policy: PolicyNet,
    spec,
    seeds,
    lr: float,
    batch_size: int,
    adam: ad.AdamState,
    shuffle_rng,
    loss_kind: str = "squared",
    online_sink=None,
) -> float:
    """One pass over fresh agent transitions: minimize |s' - G(s, a)| in phi.

    s' here is the environment's real successor, so the generator tracks the
    true dynamics on the agent's visitation distribution.
    """
    if not policy.params.all_frozen():
        raise FrozenViolationError("policy must be frozen during the generator epoch")
    s_all, a_all, s1_all = _collect_agent_transitions(policy, spec, seeds, online_sink)
    order = shuffle_rng.permutation(len(s_all))
    total = 0.0
    for lo in range(0, len(order), batch_size):
        idx = order[lo : lo + batch_size]
        pred = generator.forward_batch(ad.Value(s_all[idx]), ad.Value(a_all[idx]))
        loss = _reconstruction_loss(pred, s1_all[idx], loss_kind)
        grads = ad.backward(loss)
        ad.adam_step(generator.params, grads, adam, lr)
        total += float(loss.data) * len(idx)
    return total / len(order)


def generator_eval_loss(
    generator: GeneratorNet, policy: PolicyNet, spec, seeds, loss_kind: str = "squared",
    online_sink=None,
) -> float:
    """Reconstruction loss on held-out fresh rollouts, no updates."""
    s_all, a_all, s1_all = _collect_agent_transitions(policy, spec, seeds, online_sink)
    pred = generator.predict(s_all, a_all)
    diff = s1_all - pred
    per = diff**2 if loss_kind == "squared" else np.abs(diff)
    return float(per.sum() / len(s_all))


def probe_aer(policy: PolicyNet, spec, probe_seeds) -> float:
    """Mean episode return of the current policy on the fixed probe seeds."""
    returns = []
    for seed in probe_seeds:
        traj = envs.rollout(spec, policy.act, seed, record_actions=True)
        returns.append(traj.episode_return())
    return float(np.mean(returns))


def compute_agent_delta_sequence(
    policy: PolicyNet, generator: GeneratorNet, spec, seed: int
) -> DeltaSequence:
    """Roll the policy out and score each visited state by |s - G(s, pi(s))|.

    The successor is the frozen generator's prediction, not the
    environment's: that is what ties the discriminator's verdict back to
    theta. agent_delta_graph builds the same quantity as a differentiable
    graph; the two agree to float64 rounding (per-step act() and the batched
    graph pass may differ in the last ulp).
    """
    if not generator.params.all_frozen():
        raise FrozenViolationError("agent delta sequences require a frozen generator")
    traj = envs.rollout(spec, policy.act, seed, record_actions=True)
    s = traj.states[:-1]
    pred = generator.predict(s, traj.actions)
    return DeltaSequence(np.abs(s - pred), "agent")


def agent_delta_graph(policy: PolicyNet, generator: GeneratorNet, states: np.ndarray) -> ad.Value:
    """Differentiable |s - G(s, pi(s))| over the visited states (T+1, n)."""
    s = ad.Value(np.asarray(states)[:-1])
    actions = policy.forward_batch(s)
    pred = generator.forward_batch(s, actions)
    return ad.absolute(ad.sub(s, pred))


def adversarial_epoch(
    policy: PolicyNet,
    generator: GeneratorNet,
    discriminator: DiscriminatorNet,
    teacher_dataset,
    spec,
    lr_policy: float,
    lr_discriminator: float,
    clip_norm: float,
    adam_policy: ad.AdamState,
    adam_disc: ad.AdamState,
    master_seed: int,
    epoch: int,
    rollouts: int = 10,
    online_sink=None,
) -> tuple:
    """One adversarial epoch; returns (discriminator loss, policy objective).

    The discriminator maximizes E[log D(teacher deltas)] + E[log(1 - D(agent
    deltas))] (labels 1/0), one paired update per sequence. The policy then
    takes non-saturating steps maximizing E[log D(agent deltas)] with the
    discriminator held still, gradients clipped to clip_norm and the Adam
    step capped at lr_policy * clip_norm. Both loss terms are evaluated
    through stable softplus identities on the logit.
    """
    if not generator.params.all_frozen():
        raise FrozenViolationError("generator must be frozen in the adversarial stage")

    agent_trajs = []
    for i in range(rollouts):
        seed = ADV_SEED_BASE + epoch * _SEEDS_PER_EPOCH + i
        traj = envs.rollout(spec, policy.act, seed, record_actions=True)
        agent_trajs.append(traj)
        if online_sink is not None:
            online_sink.append(traj.states[0].copy())

    trajs = list(teacher_dataset)
    pick_rng = rng_stream(master_seed, SHUFFLE, index=100_000 + epoch)
    picks = pick_rng.choice(len(trajs), size=min(rollouts, len(trajs)), replace=False)
    drop_rng = rng_stream(master_seed, DROPOUT, index=epoch)

    d_losses = []
    for k, pick in enumerate(picks):
        t_deltas = teacher_delta_sequence(trajs[pick]).deltas
        a_traj = agent_trajs[k % len(agent_trajs)]
        a_s = a_traj.states[:-1]
        a_deltas = np.abs(a_s - generator.predict(a_s, a_traj.actions))
        z_teacher = discriminator.forward_logit(t_deltas, train_mode=True, rng=drop_rng)
        z_agent = discriminator.forward_logit(a_deltas, train_mode=True, rng=drop_rng)
        # -log D(teacher) - log(1 - D(agent)) == softplus(-z_T) + softplus(z_A)
        loss = ad.add(ad.softplus(ad.scale(z_teacher, -1.0)), ad.softplus(z_agent))
        grads = ad.backward(loss)
        ad.adam_step(discriminator.params, grads, adam_disc, lr_discriminator)
        d_losses.append(float(loss.data))

    p_losses = []
    for traj in agent_trajs:
        deltas = agent_delta_graph(policy, generator, traj.states)
        z = discriminator.forward_logit(deltas, train_mode=False)
        loss = ad.softplus(ad.scale(z, -1.0))  # -log D(agent deltas)
        grads = ad.backward(loss)
        # discriminator leaves appear in this graph too; the policy step
        # only consumes theta, and a loss with no theta dependence at all
        # (e.g. a constant discriminator) legitimately has zero gradient
        pol_grads = {
            name: grads.get(name, np.zeros_like(policy.params.data(name)))
            for name in policy.params.trainable_names()
        }
        pol_grads = ad.clip_gradients(pol_grads, clip_norm)
        ad.adam_step(
            policy.params, pol_grads, adam_policy, lr_policy,
            max_step_norm=lr_policy * clip_norm,
        )
        p_losses.append(float(loss.data))
    return float(np.mean(d_losses)), float(np.mean(p_losses))


def _check_finite(epoch: int, **named) -> None:
    for label, value in named.items():
        if value is not None and not np.isfinite(value):
            raise NumericAbortError(
                f"non-finite {label} ({value}) at epoch {epoch}", epoch=epoch
            )


def run_reconstruction_stage(
    config: ExperimentConfig,
    policy: PolicyNet,
    generator: GeneratorNet,
    spec,
    teacher_dataset,
    log: TrainingLog,
    online_sink,
) -> None:
    """epochs_r alternating epochs, each: policy (G frozen), generator (pi
    frozen), held-out generator eval, AER probe."""
    states, next_states = (
        transition_arrays(teacher_dataset) if config.epochs_r else (None, None)
    )
    adam_policy = ad.AdamState(policy.params)
    adam_gen = ad.AdamState(generator.params)
    probe_seeds = [PROBE_SEED_BASE + j for j in range(config.probe_rollouts)]
    if config.epochs_r and online_sink is not None:
        for seed in probe_seeds:
            online_sink.append(envs.reset(spec, seed).vector.copy())
    for epoch in range(1, config.epochs_r + 1):
        with frozen(generator.params):
            policy_loss = reconstruction_policy_epoch(
                policy,
                generator,
                states,
                next_states,
                config.lr_reconstruction,
                config.batch_size,
                adam_policy,
                rng_stream(config.master_seed, SHUFFLE, index=epoch),
                config.reconstruction_loss,
            )
        gen_seeds = [
            AGENT_SEED_BASE + epoch * _SEEDS_PER_EPOCH + i
            for i in range(config.rollouts_per_epoch)
        ]
        with frozen(policy.params):
            gen_loss = reconstruction_generator_epoch(
                generator,
                policy,
                spec,
                gen_seeds,
                config.lr_reconstruction,
                config.batch_size,
                adam_gen,
                rng_stream(config.master_seed, SHUFFLE, index=500_000 + epoch),
                config.reconstruction_loss,
                online_sink,
            )
        eval_seeds = [
            GEN_EVAL_SEED_BASE + epoch * _SEEDS_PER_EPOCH + i
            for i in range(config.gen_eval_rollouts)
        ]
        gen_eval = generator_eval_loss(
            generator, policy, spec, eval_seeds, config.reconstruction_loss, online_sink
        )
        probe = probe_aer(policy, spec, probe_seeds)
        _check_finite(
            epoch,
            policy_loss=policy_loss,
            gen_loss_train=gen_loss,
            gen_loss_eval=gen_eval,
            aer_probe=probe,
        )
        log.append(
            EpochRecord(epoch, "reconstruction", policy_loss, gen_loss, gen_eval, probe)
        )


def run_adversarial_stage(
    config: ExperimentConfig,
    policy: PolicyNet,
    generator: GeneratorNet,
    discriminator: DiscriminatorNet,
    spec,
    teacher_dataset,
    log: TrainingLog,
    online_sink,
) -> None:
    """epochs_a adversarial epochs under one freeze guard on the generator."""
    if config.epochs_a == 0:
        return
    adam_policy = ad.AdamState(policy.params)
    adam_disc = ad.AdamState(discriminator.params)
    probe_seeds = [PROBE_SEED_BASE + j for j in range(config.probe_rollouts)]
    with frozen(generator.params):
        for epoch in range(1, config.epochs_a + 1):
            d_loss, p_obj = adversarial_epoch(
                policy,
                generator,
                discriminator,
                teacher_dataset,
                spec,
                config.lr_policy_adversarial,
                config.lr_discriminator,
                config.clip_norm,
                adam_policy,
                adam_disc,
                config.master_seed,
                epoch,
                config.rollouts_per_epoch,
                online_sink,
            )
            probe = probe_aer(policy, spec, probe_seeds)
            _check_finite(epoch, disc_loss=d_loss, policy_objective=p_obj, aer_probe=probe)
            log.append(
                EpochRecord(epoch, "adversarial", p_obj, d_loss, None, probe)
            )


@dataclass
class TrainResult:
    config: ExperimentConfig
    spec: envs.EnvSpec
    policy: PolicyNet
    generator: GeneratorNet
    discriminator: DiscriminatorNet
    teacher_dataset: Dataset
    log: TrainingLog
    online_states: np.ndarray


def build_nets(config: ExperimentConfig, spec) -> tuple:
    state_scale = np.asarray(spec.state_scale, dtype=np.float64)
    policy = PolicyNet(
        spec.state_dim, spec.action_dim, hidden=config.policy_hidden,
        seed=config.master_seed, input_scale=state_scale,
    )
    generator = GeneratorNet(
        spec.state_dim, spec.action_dim, hidden=config.generator_hidden,
        seed=config.master_seed, input_scale=state_scale, output_scale=state_scale,
    )
    # deltas shrink with dt, so the sequence scale is dt * state scale
    discriminator = DiscriminatorNet(
        spec.state_dim,
        lstm_hidden=config.disc_lstm_hidden,
        lstm_layers=config.disc_lstm_layers,
        head_hidden=config.disc_head_hidden,
        dropout_p=config.disc_dropout,
        seed=config.master_seed,
        input_scale=spec.dt * state_scale,
    )
    return policy, generator, discriminator


def train(config: ExperimentConfig, run_dir=None, stage1_only: bool = False) -> TrainResult:
    """Algorithm: collect teacher data, run stage 1, checkpoint, run stage 2,
    checkpoint. When run_dir is given, config/checkpoints/log/online states
    are written there (no timestamps; reruns are byte-identical).
    """
    config.validate()
    spec = envs.get_spec(config.env_name, horizon=config.horizon)
    teacher_dataset = generate_teacher_dataset(
        spec, config.n_teacher_trajectories, config.teacher_seed_base
    )
    policy, generator, discriminator = build_nets(config, spec)
    log = TrainingLog()
    online_sink = []

    if run_dir is not None:
        os.makedirs(str(run_dir), exist_ok=True)

    run_reconstruction_stage(
        config, policy, generator, spec, teacher_dataset, log, online_sink
    )
    nets = {"policy": policy, "generator": generator, "discriminator": discriminator}
    if run_dir is not None:
        save_models(_join(run_dir, "stage1.ckpt"), nets)

    if not stage1_only:
        run_adversarial_stage(
            config, policy, generator, discriminator, spec, teacher_dataset, log,
            online_sink,
        )
        if run_dir is not None:
            save_models(_join(run_dir, "stage2.ckpt"), nets)

    online_states = (
        np.stack(online_sink) if online_sink else np.zeros((0, spec.state_dim))
    )
    if run_dir is not None:
        log.to_csv(_join(run_dir, "training_log.csv"))
        with open(_join(run_dir, "config.json"), "w") as fh:
            json.dump(config.to_dict(), fh, indent=2)
            fh.write("\n")
        with open(_join(run_dir, "online_initial_states.json"), "w") as fh:
            json.dump(online_states.tolist(), fh)
            fh.write("\n")
    return TrainResult(
        config=config,
        spec=spec,
        policy=policy,
        generator=generator,
        discriminator=discriminator,
        teacher_dataset=teacher_dataset,
        log=log,
        online_states=online_states,
    )


def _join(run_dir, name: str) -> str:
    return os.path.join(str(run_dir), name)
