"""The three networks: policy, transition generator, sequence discriminator.

Weights are uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from a per-network
init stream, so two nets of the same class and seed are bitwise identical.
Parameter names carry a network prefix ("policy.", "generator.",
"discriminator."); several networks meet inside one graph during training
and the prefixes keep their gradient maps and checkpoint entries apart.
"""

import hashlib
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import streams


class EmptyInputError(ValueError):
    pass


class FrozenViolationError(RuntimeError):
    pass


def _add_affine(params, name, fan_in, fan_out, rng):
    bound = 1.0 / np.sqrt(fan_in)
    params.add(f"{name}.w", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    params.add(f"{name}.b", rng.uniform(-bound, bound, size=(fan_out,)))


def _inv_scale(scale, dim, label):
    """Fixed per-component input normalization constants. None disables scaling.

    Stored as reciprocals so the graph and numpy paths share one multiply and
    stay bitwise identical."""
    if scale is None:
        return None
    arr = np.asarray(scale, dtype=np.float64)
    if arr.shape != (dim,):
        raise ad.ShapeMismatchError(f"{label} scale shape {arr.shape}, expected ({dim},)")
    if not np.all(arr > 0):
        raise ValueError(f"{label} scale must be positive: {arr}")
    return 1.0 / arr


class PolicyNet:
    """tanh MLP, tanh on the output too, so actions live strictly in (-1, 1)."""

    def __init__(self, state_dim, action_dim, hidden=(64, 64, 64), seed=0, input_scale=None):
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.widths = [self.state_dim, *map(int, hidden), self.action_dim]
        self.inv_input_scale = _inv_scale(input_scale, self.state_dim, "policy input")
        self.params = ad.ParameterSet()
        rng = streams.rng_stream(seed, streams.POLICY_INIT)
        for i in range(len(self.widths) - 1):
            _add_affine(self.params, f"policy.layer{i}", self.widths[i], self.widths[i + 1], rng)

    def forward_batch(self, states) -> ad.Value:
        """Graph pass over a (B, state_dim) batch; returns a (B, action_dim) node."""
        h = ad.as_value(states)
        if h.data.ndim != 2 or h.data.shape[1] != self.state_dim:
            raise ad.ShapeMismatchError(
                f"policy input shape {h.data.shape}, expected (*, {self.state_dim})"
            )
        if self.inv_input_scale is not None:
            h = ad.mul(h, ad.Value(self.inv_input_scale))
        for i in range(len(self.widths) - 1):
            w = self.params.value(f"policy.layer{i}.w")
            b = self.params.value(f"policy.layer{i}.b")
            h = ad.tanh(ad.add(ad.matmul(h, w), b))
        return h

    def act(self, state: np.ndarray) -> np.ndarray:
        """Plain-numpy single-state pass for rollouts; mirrors forward_batch."""
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (self.state_dim,):
            raise ad.ShapeMismatchError(
                f"policy state shape {state.shape}, expected ({self.state_dim},)"
            )
        h = state[None, :]
        if self.inv_input_scale is not None:
            h = h * self.inv_input_scale
        for i in range(len(self.widths) - 1):
            w = self.params.data(f"policy.layer{i}.w")
            b = self.params.data(f"policy.layer{i}.b")
            h = np.tanh(h @ w + b)
        return h[0]


class GeneratorNet:
    """Transition model s' ~ G(s, a): tanh hidden layers, linear output of state_dim."""

    def __init__(
        self,
        state_dim,
        action_dim,
        hidden=(64, 64, 64),
        seed=0,
        input_scale=None,
        output_scale=None,
    ):
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.widths = [self.state_dim + self.action_dim, *map(int, hidden), self.state_dim]
        self.inv_input_scale = _inv_scale(input_scale, self.state_dim, "generator input")
        if output_scale is None:
            self.output_scale = None
        else:
            self.output_scale = np.asarray(output_scale, dtype=np.float64)
            if self.output_scale.shape != (self.state_dim,):
                raise ad.ShapeMismatchError(
                    f"generator output scale shape {self.output_scale.shape}, "
                    f"expected ({self.state_dim},)"
                )
            if not np.all(self.output_scale > 0):
                raise ValueError(f"generator output scale must be positive: {output_scale}")
        self.params = ad.ParameterSet()
        rng = streams.rng_stream(seed, streams.GENERATOR_INIT)
        for i in range(len(self.widths) - 1):
            _add_affine(self.params, f"generator.layer{i}", self.widths[i], self.widths[i + 1], rng)

    def forward_batch(self, states, actions) -> ad.Value:
        states, actions = ad.as_value(states), ad.as_value(actions)
        if (
            states.data.ndim != 2
            or actions.data.ndim != 2
            or states.data.shape[1] != self.state_dim
            or actions.data.shape[1] != self.action_dim
            or states.data.shape[0] != actions.data.shape[0]
        ):
            raise ad.ShapeMismatchError(
                f"generator input shapes {states.data.shape}, {actions.data.shape}; "
                f"expected (B, {self.state_dim}) and (B, {self.action_dim})"
            )
        if self.inv_input_scale is not None:
            states = ad.mul(states, ad.Value(self.inv_input_scale))
        h = ad.concat([states, actions], axis=1)
        last = len(self.widths) - 2
        for i in range(len(self.widths) - 1):
            w = self.params.value(f"generator.layer{i}.w")
            b = self.params.value(f"generator.layer{i}.b")
            h = ad.add(ad.matmul(h, w), b)
            if i != last:
                h = ad.tanh(h)
        if self.output_scale is not None:
            h = ad.mul(h, ad.Value(self.output_scale))
        return h

    def predict(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Numpy mirror of forward_batch for rollout-time prediction."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        if self.inv_input_scale is not None:
            states = states * self.inv_input_scale
        h = np.concatenate([states, actions], axis=1)
        last = len(self.widths) - 2
        for i in range(len(self.widths) - 1):
            h = h @ self.params.data(f"generator.layer{i}.w") + self.params.data(
                f"generator.layer{i}.b"
            )
            if i != last:
                h = np.tanh(h)
        if self.output_scale is not None:
            h = h * self.output_scale
        return h


class DiscriminatorNet:
    """Recurrent classifier over delta sequences.

    A stack of LSTM layers reads the (T, input_dim) sequence; the final
    hidden state feeds two leaky-relu + dropout blocks and an affine head.
    forward() returns P(sequence is teacher); forward_logit() exposes the
    pre-sigmoid score for numerically stable loss terms.
    """

    def __init__(
        self,
        input_dim,
        lstm_hidden=32,
        lstm_layers=1,
        head_hidden=64,
        dropout_p=0.5,
        seed=0,
        input_scale=None,
    ):
        self.input_dim = int(input_dim)
        self.lstm_hidden = int(lstm_hidden)
        self.lstm_layers = int(lstm_layers)
        self.head_hidden = int(head_hidden)
        self.dropout_p = float(dropout_p)
        self.inv_input_scale = _inv_scale(input_scale, self.input_dim, "discriminator input")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1): {dropout_p}")
        self.params = ad.ParameterSet()
        rng = streams.rng_stream(seed, streams.DISCRIMINATOR_INIT)
        for layer in range(self.lstm_layers):
            in_dim = self.input_dim if layer == 0 else self.lstm_hidden
            bound = 1.0 / np.sqrt(in_dim + self.lstm_hidden)
            for gate in ("i", "f", "g", "o"):
                self.params.add(
                    f"discriminator.lstm{layer}.w_{gate}",
                    rng.uniform(-bound, bound, size=(in_dim + self.lstm_hidden, self.lstm_hidden)),
                )
                self.params.add(
                    f"discriminator.lstm{layer}.b_{gate}",
                    rng.uniform(-bound, bound, size=(self.lstm_hidden,)),
                )
        _add_affine(self.params, "discriminator.fc1", self.lstm_hidden, self.head_hidden, rng)
        _add_affine(self.params, "discriminator.fc2", self.head_hidden, self.head_hidden, rng)
        _add_affine(self.params, "discriminator.out", self.head_hidden, 1, rng)

    def _unwrap(self, deltas) -> ad.Value:
        deltas = getattr(deltas, "deltas", deltas)  # accept DeltaSequence
        v = ad.as_value(deltas)
        if v.data.ndim != 2 or v.data.shape[1] != self.input_dim:
            raise ad.ShapeMismatchError(
                f"discriminator input shape {v.data.shape}, expected (T, {self.input_dim})"
            )
        if v.data.shape[0] == 0:
            raise EmptyInputError("discriminator got an empty sequence")
        return v

    def forward_logit(self, deltas, train_mode: bool = False, rng=None) -> ad.Value:
        seq = self._unwrap(deltas)
        if train_mode and self.dropout_p > 0.0 and rng is None:
            raise ValueError("train_mode dropout needs an rng")
        if self.inv_input_scale is not None:
            seq = ad.mul(seq, ad.Value(self.inv_input_scale))
        n_steps = seq.data.shape[0]
        hs = [ad.Value(np.zeros((1, self.lstm_hidden))) for _ in range(self.lstm_layers)]
        cs = [ad.Value(np.zeros((1, self.lstm_hidden))) for _ in range(self.lstm_layers)]
        gates = [
            tuple(
                self.params.value(f"discriminator.lstm{layer}.{slot}_{gate}")
                for gate in ("i", "f", "g", "o")
                for slot in ("w", "b")
            )
            for layer in range(self.lstm_layers)
        ]
        for t in range(n_steps):
            inp = ad.take_row(seq, t)
            for layer in range(self.lstm_layers):
                hs[layer], cs[layer] = ad.lstm_cell(inp, hs[layer], cs[layer], *gates[layer])
                inp = hs[layer]
        h = hs[-1]
        keep = 1.0 - self.dropout_p
        for name in ("fc1", "fc2"):
            w = self.params.value(f"discriminator.{name}.w")
            b = self.params.value(f"discriminator.{name}.b")
            h = ad.leaky_relu(ad.add(ad.matmul(h, w), b))
            if train_mode and self.dropout_p > 0.0:
                mask = (rng.random(h.data.shape) < keep).astype(np.float64)
                h = ad.dropout(h, mask, keep)
        w = self.params.value("discriminator.out.w")
        b = self.params.value("discriminator.out.b")
        return ad.sum_all(ad.add(ad.matmul(h, w), b))

    def forward(self, deltas, train_mode: bool = False, rng=None) -> ad.Value:
        return ad.sigmoid(self.forward_logit(deltas, train_mode=train_mode, rng=rng))


def policy_forward(net: PolicyNet, state: np.ndarray) -> np.ndarray:
    return net.act(state)


def generator_forward(net: GeneratorNet, state: np.ndarray, action: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if state.shape != (net.state_dim,) or action.shape != (net.action_dim,):
        raise ad.ShapeMismatchError(
            f"generator got shapes {state.shape}, {action.shape}; "
            f"expected ({net.state_dim},), ({net.action_dim},)"
        )
    return net.predict(state[None, :], action[None, :])[0]


def discriminator_forward(net: DiscriminatorNet, deltas, train_mode=False, rng=None) -> ad.Value:
    return net.forward(deltas, train_mode=train_mode, rng=rng)


@dataclass
class FreezeGuard:
    params: ad.ParameterSet
    digest: str
    saved_flags: dict


def freeze(params: ad.ParameterSet) -> FreezeGuard:
    """Mark every entry non-trainable and fingerprint the current bytes."""
    guard = FreezeGuard(
        params=params,
        digest=params.digest(),
        saved_flags={n: params.trainable(n) for n in params.names()},
    )
    for name in params.names():
        params.set_trainable(name, False)
    return guard


def release(guard: FreezeGuard) -> None:
    """Restore trainable flags; raise if any frozen byte changed."""
    if guard.params.digest() != guard.digest:
        raise FrozenViolationError("frozen parameters were modified")
    for name, flag in guard.saved_flags.items():
        guard.params.set_trainable(name, flag)


@contextmanager
def frozen(params: ad.ParameterSet):
    guard = freeze(params)
    try:
        yield guard
    finally:
        release(guard)


def save_models(path, nets: dict) -> None:
    """All networks in one checkpoint; prefixes keep the names disjoint."""
    merged = ad.ParameterSet()
    for net in nets.values():
        for name, arr in net.params.items():
            merged.add(name, arr)
    ad.save_checkpoint(path, merged)


def load_models(path, nets: dict) -> None:
    """Copy checkpoint arrays into existing networks, matching by name."""
    loaded, _ = ad.load_checkpoint(path)
    for net in nets.values():
        for name in net.params.names():
            if name not in loaded:
                raise ad.CheckpointError(f"{path}: missing parameter {name}")
            net.params.set_data(name, loaded.data(name))


def params_digest_with_prefix(path, prefix: str) -> str:
    """sha256 over the checkpoint entries whose names start with `prefix`."""
    loaded, _ = ad.load_checkpoint(path)
    h = hashlib.sha256()
    for name, arr in loaded.items():
        if name.startswith(prefix):
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()
