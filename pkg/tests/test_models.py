"""Network construction, forward passes, freeze guards, scaling."""

import numpy as np
import pytest

from ilfo import autodiff as ad
from ilfo.data import DeltaSequence
from ilfo.evaluation import finite_difference_gradient
from ilfo.models import (
    DiscriminatorNet,
    EmptyInputError,
    FrozenViolationError,
    GeneratorNet,
    PolicyNet,
    discriminator_forward,
    freeze,
    frozen,
    generator_forward,
    policy_forward,
    release,
)
from ilfo.streams import rng_stream


# --- construction ---------------------------------------------------------------


def test_policy_init_is_deterministic():
    a = PolicyNet(4, 2, seed=7)
    b = PolicyNet(4, 2, seed=7)
    assert a.params.digest() == b.params.digest()
    c = PolicyNet(4, 2, seed=8)
    assert a.params.digest() != c.params.digest()


def test_networks_use_distinct_init_streams():
    """Same seed, different network class: weights must differ."""
    pol = PolicyNet(4, 4, hidden=(8,), seed=0)
    gen = GeneratorNet(2, 2, hidden=(8,), seed=0)
    w_pol = pol.params.data("policy.layer0.w")
    w_gen = gen.params.data("generator.layer0.w")
    assert w_pol.shape == w_gen.shape
    assert not np.array_equal(w_pol, w_gen)


def test_parameter_names_carry_prefixes():
    pol = PolicyNet(3, 1, hidden=(5,), seed=0)
    gen = GeneratorNet(3, 1, hidden=(5,), seed=0)
    disc = DiscriminatorNet(3, lstm_hidden=4, head_hidden=6, seed=0)
    assert all(n.startswith("policy.") for n in pol.params.names())
    assert all(n.startswith("generator.") for n in gen.params.names())
    assert all(n.startswith("discriminator.") for n in disc.params.names())


def test_init_respects_fan_in_bound():
    pol = PolicyNet(16, 2, hidden=(8,), seed=3)
    w = pol.params.data("policy.layer0.w")
    assert np.all(np.abs(w) <= 1.0 / 4.0)


# --- policy ---------------------------------------------------------------------


def test_policy_outputs_within_unit_interval():
    pol = PolicyNet(4, 2, seed=1)
    rng = rng_stream(0, 60)
    out = pol.forward_batch(rng.uniform(-50, 50, size=(20, 4))).data
    assert np.all(np.abs(out) < 1.0)


def test_policy_act_matches_forward_batch():
    """Single-state and batched paths agree to float64 noise (BLAS may
    reassociate dot products differently per batch shape)."""
    pol = PolicyNet(4, 2, seed=2, input_scale=np.array([10.0, 10.0, 5.0, 5.0]))
    rng = rng_stream(1, 60)
    states = rng.uniform(-9, 9, size=(32, 4))
    batch = pol.forward_batch(states).data
    for i, state in enumerate(states):
        assert np.allclose(pol.act(state), batch[i], rtol=1e-12, atol=1e-14)


def test_policy_act_is_reproducible():
    pol = PolicyNet(4, 2, seed=2)
    state = np.array([0.3, -0.4, 0.1, 0.9])
    assert np.array_equal(pol.act(state), pol.act(state))


def test_policy_rejects_wrong_input_dim():
    pol = PolicyNet(4, 2, seed=0)
    with pytest.raises(ad.ShapeMismatchError):
        pol.forward_batch(np.zeros((3, 5)))
    with pytest.raises(ad.ShapeMismatchError):
        pol.act(np.zeros(5))


def test_policy_forward_free_function():
    pol = PolicyNet(3, 1, seed=4)
    state = np.array([0.1, -0.2, 0.3])
    assert np.array_equal(policy_forward(pol, state), pol.act(state))


# --- generator ------------------------------------------------------------------


def test_generator_output_dim_is_state_dim():
    gen = GeneratorNet(4, 2, seed=0)
    out = gen.forward_batch(np.zeros((5, 4)), np.zeros((5, 2)))
    assert out.data.shape == (5, 4)


def test_generator_output_is_unbounded_linear():
    """With output scaling the prediction can leave (-1, 1)."""
    scale = np.full(3, 100.0)
    gen = GeneratorNet(3, 1, seed=5, output_scale=scale)
    for name in gen.params.names():
        if name.endswith("layer3.w") or name.endswith("layer3.b"):
            gen.params.set_data(name, np.ones_like(gen.params.data(name)))
    out = gen.predict(np.zeros((1, 3)), np.zeros((1, 1)))
    assert np.any(np.abs(out) > 1.0)


def test_generator_predict_matches_forward_batch_bitwise():
    """Same batch shape through both paths: identical ops, identical bits."""
    gen = GeneratorNet(
        4, 2, seed=6,
        input_scale=np.array([10.0, 10.0, 5.0, 5.0]),
        output_scale=np.array([10.0, 10.0, 5.0, 5.0]),
    )
    rng = rng_stream(2, 60)
    states = rng.uniform(-9, 9, size=(16, 4))
    actions = rng.uniform(-1, 1, size=(16, 2))
    batch = gen.forward_batch(states, actions).data
    assert np.array_equal(gen.predict(states, actions), batch)


def test_generator_rejects_mismatched_batches():
    gen = GeneratorNet(4, 2, seed=0)
    with pytest.raises(ad.ShapeMismatchError):
        gen.forward_batch(np.zeros((5, 4)), np.zeros((4, 2)))


def test_generator_forward_free_function_checks_shapes():
    gen = GeneratorNet(4, 2, seed=0)
    out = generator_forward(gen, np.zeros(4), np.zeros(2))
    assert out.shape == (4,)
    with pytest.raises(ad.ShapeMismatchError):
        generator_forward(gen, np.zeros(3), np.zeros(2))


def test_scaling_requires_matching_shape():
    with pytest.raises(ad.ShapeMismatchError):
        PolicyNet(4, 2, input_scale=np.ones(3))
    with pytest.raises(ValueError):
        GeneratorNet(4, 2, output_scale=np.zeros(4))


# --- discriminator ---------------------------------------------------------------


def test_discriminator_output_strictly_inside_unit_interval():
    disc = DiscriminatorNet(4, lstm_hidden=8, head_hidden=16, seed=0)
    rng = rng_stream(3, 60)
    for _ in range(20):
        deltas = rng.uniform(0, 1e3, size=(int(rng.integers(1, 30)), 4))
        p = float(disc.forward(deltas).data)
        assert 0.0 < p < 1.0


def test_discriminator_accepts_delta_sequence_objects():
    disc = DiscriminatorNet(3, lstm_hidden=4, head_hidden=8, seed=1)
    seq = DeltaSequence(np.abs(rng_stream(4, 60).normal(size=(6, 3))), "teacher")
    a = float(disc.forward(seq).data)
    b = float(disc.forward(seq.deltas).data)
    assert a == b


def test_discriminator_rejects_empty_sequence():
    disc = DiscriminatorNet(3, seed=0)
    with pytest.raises(EmptyInputError):
        disc.forward(np.zeros((0, 3)))


def test_discriminator_eval_mode_is_deterministic():
    disc = DiscriminatorNet(4, lstm_hidden=8, head_hidden=16, seed=2)
    deltas = np.abs(rng_stream(5, 60).normal(size=(10, 4)))
    a = float(disc.forward(deltas).data)
    b = float(disc.forward(deltas).data)
    assert a == b


def test_discriminator_train_mode_needs_rng():
    disc = DiscriminatorNet(4, seed=0)
    deltas = np.ones((5, 4))
    with pytest.raises(ValueError):
        disc.forward_logit(deltas, train_mode=True)


def test_discriminator_dropout_changes_with_stream():
    disc = DiscriminatorNet(4, lstm_hidden=8, head_hidden=16, dropout_p=0.5, seed=3)
    deltas = np.abs(rng_stream(6, 60).normal(size=(10, 4)))
    out_a = float(disc.forward_logit(deltas, train_mode=True, rng=rng_stream(0, 61)).data)
    out_b = float(disc.forward_logit(deltas, train_mode=True, rng=rng_stream(1, 61)).data)
    out_c = float(disc.forward_logit(deltas, train_mode=True, rng=rng_stream(0, 61)).data)
    assert out_a != out_b
    assert out_a == out_c


def test_discriminator_is_order_sensitive():
    """Reversing a sequence must change the score for some input; the LSTM
    reads order, unlike any pooled statistic."""
    disc = DiscriminatorNet(2, lstm_hidden=8, head_hidden=16, seed=4)
    rng = rng_stream(7, 60)
    changed = 0
    for _ in range(20):
        deltas = np.abs(rng.normal(size=(12, 2)))
        fwd = float(disc.forward(deltas).data)
        rev = float(disc.forward(deltas[::-1].copy()).data)
        changed += fwd != rev
    assert changed >= 19


def test_discriminator_forward_free_function():
    disc = DiscriminatorNet(3, lstm_hidden=4, head_hidden=8, seed=5)
    deltas = np.abs(rng_stream(8, 60).normal(size=(4, 3)))
    assert float(discriminator_forward(disc, deltas).data) == float(
        disc.forward(deltas).data
    )


def test_discriminator_rejects_bad_dropout():
    with pytest.raises(ValueError):
        DiscriminatorNet(3, dropout_p=1.0)


def test_multi_layer_lstm_stacks():
    disc = DiscriminatorNet(3, lstm_hidden=4, lstm_layers=2, head_hidden=8, seed=6)
    layer_names = {n for n in disc.params.names() if ".lstm" in n}
    assert any("lstm0." in n for n in layer_names)
    assert any("lstm1." in n for n in layer_names)
    out = float(disc.forward(np.ones((5, 3))).data)
    assert 0.0 < out < 1.0


# --- freeze guards ----------------------------------------------------------------


def test_freeze_marks_everything_non_trainable():
    pol = PolicyNet(3, 1, hidden=(4,), seed=0)
    guard = freeze(pol.params)
    assert pol.params.all_frozen()
    release(guard)
    assert not pol.params.all_frozen()


def test_release_detects_mutation():
    pol = PolicyNet(3, 1, hidden=(4,), seed=0)
    guard = freeze(pol.params)
    arr = pol.params.data("policy.layer0.w")
    arr[0, 0] += 1e-9
    with pytest.raises(FrozenViolationError):
        release(guard)


def test_frozen_context_manager_round_trips():
    gen = GeneratorNet(3, 1, hidden=(4,), seed=0)
    flags_before = {n: gen.params.trainable(n) for n in gen.params.names()}
    with frozen(gen.params):
        assert gen.params.all_frozen()
    assert {n: gen.params.trainable(n) for n in gen.params.names()} == flags_before


def test_frozen_context_detects_mutation_on_exit():
    gen = GeneratorNet(3, 1, hidden=(4,), seed=0)
    with pytest.raises(FrozenViolationError):
        with frozen(gen.params):
            gen.params.data("generator.layer0.b")[0] += 1.0


def test_gradients_flow_through_frozen_generator_into_policy():
    """The reconstruction loss backpropagates THROUGH frozen G into pi."""
    pol = PolicyNet(3, 2, hidden=(6,), seed=1)
    gen = GeneratorNet(3, 2, hidden=(6,), seed=2)
    states = rng_stream(9, 60).uniform(-1, 1, size=(4, 3))
    target = rng_stream(10, 60).uniform(-1, 1, size=(4, 3))
    with frozen(gen.params):
        pred = gen.forward_batch(states, pol.forward_batch(states))
        loss = ad.mean_all(ad.square(ad.sub(pred, ad.Value(target))))
        grads = ad.backward(loss)
    assert set(grads) == set(pol.params.names())
    assert any(np.any(g != 0.0) for g in grads.values())


def test_two_forward_passes_in_one_graph_match_finite_differences():
    """The paired two-label loss runs the discriminator twice per graph;
    each weight's gradient must sum both passes' contributions."""
    disc = DiscriminatorNet(
        2, lstm_hidden=3, lstm_layers=1, head_hidden=3, dropout_p=0.0, seed=1
    )
    seq_a = rng_stream(11, 60).uniform(0.0, 1.0, size=(3, 2))
    seq_b = rng_stream(12, 60).uniform(0.0, 1.0, size=(3, 2))

    def loss():
        z_a = disc.forward_logit(seq_a, train_mode=False)
        z_b = disc.forward_logit(seq_b, train_mode=False)
        return ad.add(ad.softplus(ad.scale(z_a, -1.0)), ad.softplus(z_b))

    analytic = ad.backward(loss())
    numeric = finite_difference_gradient(lambda params: loss(), disc.params)
    for name in analytic:
        err = np.abs(analytic[name] - numeric[name]).max()
        scale = max(1.0, np.abs(numeric[name]).max())
        assert err / scale < 1e-6, name
