"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

Graphs are built eagerly: every op computes its output immediately and
records a closure that routes the output gradient to its parents. A graph
is built per batch and thrown away after backward().
"""

import hashlib
import json

import numpy as np


class ShapeMismatchError(ValueError):
    pass


class NonScalarRootError(ValueError):
    pass


class IncompleteGradientError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


class Value:
    """A node in the computation graph: an array, its gradient, and how it was made."""

    __slots__ = ("data", "grad", "op", "parents", "name", "trainable", "_backward")

    def __init__(self, data, parents=(), op="leaf", name=None, trainable=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self.op = op
        self.parents = tuple(parents)
        self.name = name
        self.trainable = trainable
        self._backward = None

    def __repr__(self):
        tag = self.name if self.name is not None else self.op
        return f"Value({tag}, shape={self.data.shape})"


def as_value(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


def _accum(node: Value, g: np.ndarray) -> None:
    # gradient w.r.t. a non-trainable leaf is never consumed; skip the write
    if node.op == "leaf" and not node.trainable:
        return
    node.grad = node.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g down to `shape`, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Value, b: Value, op: str) -> None:
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeMismatchError(
            f"{op}: shapes {a.data.shape} and {b.data.shape} do not broadcast"
        ) from None


def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    _check_broadcast(a, b, "add")
    out = Value(a.data + b.data, (a, b), "add")

    def _backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    out._backward = _backward
    return out


def sub(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    _check_broadcast(a, b, "sub")
    out = Value(a.data - b.data, (a, b), "sub")

    def _backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    out._backward = _backward
    return out


def mul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    _check_broadcast(a, b, "mul")
    out = Value(a.data * b.data, (a, b), "mul")

    def _backward(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    out._backward = _backward
    return out


def scale(a, c: float) -> Value:
    a = as_value(a)
    c = float(c)
    out = Value(a.data * c, (a,), "scale")

    def _backward(g):
        _accum(a, g * c)

    out._backward = _backward
    return out


def matmul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatchError(
            f"matmul: shapes {a.data.shape} and {b.data.shape} are incompatible"
        )
    out = Value(a.data @ b.data, (a, b), "matmul")

    def _backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    out._backward = _backward
    return out


def tanh(a) -> Value:
    a = as_value(a)
    t = np.tanh(a.data)
    out = Value(t, (a,), "tanh")

    def _backward(g):
        _accum(a, g * (1.0 - t * t))

    out._backward = _backward
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Value:
    a = as_value(a)
    s = _sigmoid(a.data)
    out = Value(s, (a,), "sigmoid")

    def _backward(g):
        _accum(a, g * s * (1.0 - s))

    out._backward = _backward
    return out


def leaky_relu(a, slope: float = 0.01) -> Value:
    a = as_value(a)
    out = Value(np.where(a.data > 0, a.data, slope * a.data), (a,), "leaky_relu")

    def _backward(g):
        _accum(a, g * np.where(a.data > 0, 1.0, slope))

    out._backward = _backward
    return out


def log(a) -> Value:
    a = as_value(a)
    out = Value(np.log(a.data), (a,), "log")

    def _backward(g):
        _accum(a, g / a.data)

    out._backward = _backward
    return out


def softplus(a) -> Value:
    """log(1 + exp(x)), computed stably; gradient is sigmoid(x)."""
    a = as_value(a)
    out = Value(np.logaddexp(0.0, a.data), (a,), "softplus")

    def _backward(g):
        _accum(a, g * _sigmoid(a.data))

    out._backward = _backward
    return out


def absolute(a) -> Value:
    a = as_value(a)
    out = Value(np.abs(a.data), (a,), "abs")

    def _backward(g):
        _accum(a, g * np.sign(a.data))

    out._backward = _backward
    return out


def square(a) -> Value:
    a = as_value(a)
    out = Value(a.data * a.data, (a,), "square")

    def _backward(g):
        _accum(a, g * 2.0 * a.data)

    out._backward = _backward
    return out


def sum_all(a) -> Value:
    a = as_value(a)
    out = Value(a.data.sum(), (a,), "sum")

    def _backward(g):
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    out._backward = _backward
    return out


def mean_all(a) -> Value:
    a = as_value(a)
    n = a.data.size
    out = Value(a.data.mean(), (a,), "mean")

    def _backward(g):
        _accum(a, np.broadcast_to(g / n, a.data.shape).copy())

    out._backward = _backward
    return out


def concat(parts, axis: int = 1) -> Value:
    parts = [as_value(p) for p in parts]
    if not parts:
        raise ShapeMismatchError("concat: no inputs")
    out = Value(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), "concat")
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def _backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(p, g[tuple(idx)])

    out._backward = _backward
    return out


def take_row(a, i: int) -> Value:
    """Row i of a 2-D array as a (1, n) node."""
    a = as_value(a)
    if a.data.ndim != 2:
        raise ShapeMismatchError(f"take_row: expected 2-D input, got {a.data.shape}")
    out = Value(a.data[i : i + 1], (a,), "take_row")

    def _backward(g):
        full = np.zeros_like(a.data)
        full[i : i + 1] = g
        _accum(a, full)

    out._backward = _backward
    return out


def dropout(a, mask: np.ndarray, keep_prob: float) -> Value:
    """Inverted dropout: multiply by mask/keep_prob so eval needs no rescale.

    The mask is supplied by the caller (drawn from a named stream), keeping
    the op itself deterministic.
    """
    a = as_value(a)
    if keep_prob <= 0.0 or keep_prob > 1.0:
        raise ValueError(f"keep_prob must be in (0, 1]: {keep_prob}")
    factor = np.asarray(mask, dtype=np.float64) / keep_prob
    if factor.shape != a.data.shape:
        raise ShapeMismatchError(
            f"dropout: mask shape {factor.shape} != input shape {a.data.shape}"
        )
    out = Value(a.data * factor, (a,), "dropout")

    def _backward(g):
        _accum(a, g * factor)

    out._backward = _backward
    return out


def lstm_cell(x, h, c, w_i, b_i, w_f, b_f, w_g, b_g, w_o, b_o):
    """One LSTM step; returns (h_next, c_next).

    Gates see concat(x, h). Composite of the primitive ops, so backward
    needs no special casing.
    """
    z = concat([as_value(x), as_value(h)], axis=1)
    gi = sigmoid(add(matmul(z, w_i), b_i))
    gf = sigmoid(add(matmul(z, w_f), b_f))
    gg = tanh(add(matmul(z, w_g), b_g))
    go = sigmoid(add(matmul(z, w_o), b_o))
    c_next = add(mul(gf, as_value(c)), mul(gi, gg))
    h_next = mul(go, tanh(c_next))
    return h_next, c_next


def _topo_order(root: Value) -> list:
    """Parents-before-children ordering, iterative to cope with long LSTM chains."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def forward(root: Value) -> np.ndarray:
    """Value of the root node. Graphs are eager, so this is just the cached data."""
    return root.data


def backward(root: Value) -> dict:
    """Gradient of the scalar root w.r.t. every named trainable leaf.

    Grads of all nodes in the graph are zeroed first, so calling backward
    twice on the same graph gives the same answer. A parameter used by
    several forward passes inside one graph appears as several leaf nodes
    sharing a name; their contributions sum, per the chain rule.
    """
    if root.data.size != 1:
        raise NonScalarRootError(
            f"backward requires a scalar root, got shape {root.data.shape}"
        )
    order = _topo_order(root)
    for node in order:
        node.grad = np.zeros_like(node.data)
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)
    grads = {}
    for node in order:
        if node.op == "leaf" and node.trainable and node.name is not None:
            if node.name in grads:
                grads[node.name] = grads[node.name] + node.grad
            else:
                grads[node.name] = node.grad.copy()
    return grads


class ParameterSet:
    """Ordered mapping of name -> float64 array with per-entry trainable flags.

    Shapes are fixed at add() time; set_data copies into the existing
    buffer so graph leaves built from the set always see current values.
    """

    def __init__(self):
        self._data = {}
        self._trainable = {}

    def add(self, name: str, array, trainable: bool = True) -> None:
        if name in self._data:
            raise ValueError(f"duplicate parameter name: {name}")
        self._data[name] = np.array(array, dtype=np.float64)
        self._trainable[name] = bool(trainable)

    def names(self) -> list:
        return list(self._data)

    def items(self):
        return self._data.items()

    def __contains__(self, name):
        return name in self._data

    def __len__(self):
        return len(self._data)

    def data(self, name: str) -> np.ndarray:
        return self._data[name]

    def set_data(self, name: str, array) -> None:
        arr = np.asarray(array, dtype=np.float64)
        if arr.shape != self._data[name].shape:
            raise ShapeMismatchError(
                f"{name}: cannot assign shape {arr.shape} to {self._data[name].shape}"
            )
        np.copyto(self._data[name], arr)

    def trainable(self, name: str) -> bool:
        return self._trainable[name]

    def set_trainable(self, name: str, flag: bool) -> None:
        if name not in self._trainable:
            raise KeyError(name)
        self._trainable[name] = bool(flag)

    def trainable_names(self) -> list:
        return [n for n, f in self._trainable.items() if f]

    def all_frozen(self) -> bool:
        return not any(self._trainable.values())

    def value(self, name: str) -> Value:
        """Graph leaf over the live array (no copy)."""
        return Value(
            self._data[name], op="leaf", name=name, trainable=self._trainable[name]
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        for name, arr in self._data.items():
            h.update(name.encode())
            h.update(str(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


class AdamState:
    """First/second moment accumulators plus step count for one ParameterSet."""

    def __init__(self, params: ParameterSet, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.t = 0
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)


def global_norm(grads: dict) -> float:
    """L2 norm of the whole gradient map viewed as one vector."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.asarray(g) ** 2))
    return float(np.sqrt(total))


def clip_gradients(grads: dict, max_norm: float) -> dict:
    """Scale the map so its global norm is at most max_norm; identity otherwise."""
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive: {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return dict(grads)
    factor = max_norm / norm
    return {name: np.asarray(g) * factor for name, g in grads.items()}


def adam_step(
    params: ParameterSet,
    grads: dict,
    state: AdamState,
    lr: float,
    max_step_norm: float = None,
) -> None:
    """One bias-corrected Adam update of every trainable entry, in place.

    Frozen entries are untouched, moments included. If max_step_norm is
    given the whole update vector is re-scaled so its global L2 norm never
    exceeds it (used by the adversarial-stage policy step, whose contract
    bounds parameter displacement, not just the gradient).
    """
    trainable = params.trainable_names()
    missing = [n for n in trainable if n not in grads]
    if missing:
        raise IncompleteGradientError(
            f"gradients missing for trainable parameters: {missing}"
        )
    state.t += 1
    b1, b2, eps, t = state.beta1, state.beta2, state.eps, state.t
    updates = {}
    for name in trainable:
        g = np.asarray(grads[name], dtype=np.float64)
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = state.m[name] / (1.0 - b1**t)
        v_hat = state.v[name] / (1.0 - b2**t)
        updates[name] = lr * m_hat / (np.sqrt(v_hat) + eps)
    if max_step_norm is not None:
        step_norm = global_norm(updates)
        if step_norm > max_step_norm:
            factor = max_step_norm / step_norm
            updates = {name: u * factor for name, u in updates.items()}
    for name in trainable:
        params._data[name] -= updates[name]


# --- checkpoint io ---------------------------------------------------------
#
# Layout: one JSON header line mapping name -> {"shape": [...], "offset": N},
# a single '\n', then the arrays as little-endian float64 in header order.
# Adam state rides along under reserved names "adam.m.<name>", "adam.v.<name>",
# "adam.t" and "adam.hyper" ([beta1, beta2, eps]).

def _checkpoint_entries(params: ParameterSet, adam: AdamState = None):
    for name, arr in params.items():
        yield name, arr
    if adam is not None:
        for name in params.names():
            yield f"adam.m.{name}", adam.m[name]
        for name in params.names():
            yield f"adam.v.{name}", adam.v[name]
        yield "adam.t", np.asarray(float(adam.t))
        yield "adam.hyper", np.asarray([adam.beta1, adam.beta2, adam.eps])


def save_checkpoint(path, params: ParameterSet, adam: AdamState = None) -> None:
    header = {}
    payload = []
    offset = 0
    for name, arr in _checkpoint_entries(params, adam):
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        header[name] = {"shape": list(arr.shape), "offset": offset}
        payload.append(raw)
        offset += len(raw)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode())
        fh.write(b"\n")
        fh.write(b"".join(payload))


def load_checkpoint(path):
    """Returns (ParameterSet, AdamState or None). Trainable flags default True."""
    with open(path, "rb") as fh:
        blob = fh.read()
    nl = blob.find(b"\n")
    if nl < 0:
        raise CheckpointError(f"{path}: no header line found")
    try:
        header = json.loads(blob[:nl].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: bad header: {exc}") from None
    if not isinstance(header, dict):
        raise CheckpointError(f"{path}: header must be an object")
    payload = blob[nl + 1 :]

    def read_array(name, meta):
        try:
            shape = tuple(int(s) for s in meta["shape"])
            offset = int(meta["offset"])
        except (TypeError, KeyError, ValueError) as exc:
            raise CheckpointError(f"{path}: bad entry for {name}: {exc}") from None
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 8
        if offset < 0 or end > len(payload):
            raise CheckpointError(
                f"{path}: entry {name} spans bytes [{offset}, {end}) "
                f"but payload has {len(payload)}"
            )
        return np.frombuffer(payload[offset:end], dtype="<f8").astype(
            np.float64
        ).reshape(shape)

    params = ParameterSet()
    adam_arrays = {}
    for name, meta in header.items():
        arr = read_array(name, meta)
        if name == "adam.t" or name == "adam.hyper" or name.startswith(("adam.m.", "adam.v.")):
            adam_arrays[name] = arr
        else:
            params.add(name, arr)

    adam = None
    if adam_arrays:
        if "adam.t" not in adam_arrays:
            raise CheckpointError(f"{path}: optimizer arrays present but adam.t missing")
        hyper = adam_arrays.get("adam.hyper", np.asarray([0.9, 0.999, 1e-8]))
        adam = AdamState(params, beta1=hyper[0], beta2=hyper[1], eps=hyper[2])
        adam.t = int(adam_arrays["adam.t"])
        for name in params.names():
            m_key, v_key = f"adam.m.{name}", f"adam.v.{name}"
            if m_key not in adam_arrays or v_key not in adam_arrays:
                raise CheckpointError(f"{path}: optimizer state incomplete for {name}")
            adam.m[name] = adam_arrays[m_key].copy()
            adam.v[name] = adam_arrays[v_key].copy()
    return params, adam
