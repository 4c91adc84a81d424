"""Tests for the tensor engine, layers and optimizer."""

import numpy as np
import pytest

from anchor_scene.domain.errors import ContractViolation, NumericError
from anchor_scene.numerics import ops
from anchor_scene.numerics.layers import Linear, MultiHeadAttention, TransformerEncoder, causal_mask
from anchor_scene.numerics.optim import AdamState, adam_step
from anchor_scene.numerics.tensor import Tape, Tensor, parameter

from tests.conftest import assert_gradients


class TestTape:
    """Recording and backward pass."""

    def test_nothing_recorded_outside_tape(self) -> None:
        """Inference does not build a graph."""
        x = parameter(np.ones(3))
        y = ops.mul(x, 2.0)
        assert y.requires_grad
        with Tape() as tape:
            pass
        assert len(tape) == 0

    def test_shared_input_accumulates(self) -> None:
        """x * x + x has gradient 2x + 1."""
        x = parameter(np.array([1.0, -2.0, 3.0]))
        with Tape() as tape:
            loss = ops.sum(ops.add(ops.mul(x, x), x))
            tape.backward(loss)
        assert x.grad is not None
        np.testing.assert_allclose(x.grad, 2 * x.data + 1)

    def test_backward_needs_scalar(self) -> None:
        """Non-scalar losses are rejected."""
        x = parameter(np.ones(3))
        with Tape() as tape:
            y = ops.mul(x, 2.0)
            with pytest.raises(ContractViolation):
                tape.backward(y)

    def test_loss_from_other_tape(self) -> None:
        """A loss must come from the tape it is differentiated on."""
        x = parameter(np.ones(2))
        with Tape():
            loss = ops.sum(x)
        with Tape() as other, pytest.raises(ContractViolation, match="not produced"):
            other.backward(loss)

    def test_non_finite_forward(self) -> None:
        """NaN results raise NumericError."""
        with pytest.raises(NumericError):
            ops.log(Tensor(np.array([-1.0])))

    def test_item(self) -> None:
        """item() only works on one element."""
        assert Tensor([2.5]).item() == 2.5
        with pytest.raises(ContractViolation):
            Tensor([1.0, 2.0]).item()


class TestGradients:
    """Finite-difference checks of the operator set."""

    def test_matmul(self, rng: np.random.Generator) -> None:
        """Batched matrix product."""
        assert_gradients(ops.matmul, [rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 5))], rng)

    def test_broadcast_arithmetic(self, rng: np.random.Generator) -> None:
        """Broadcasting reduces gradients back to the input shape."""
        assert_gradients(
            lambda a, b: ops.div(ops.sub(ops.mul(a, b), b), ops.add(ops.square(b), 1.0)),
            [rng.normal(size=(3, 4)), rng.normal(size=(4,))],
            rng,
        )

    def test_softmax_and_log_softmax(self, rng: np.random.Generator) -> None:
        """Normalizations over the last axis."""
        assert_gradients(ops.softmax, [rng.normal(size=(3, 5))], rng)
        assert_gradients(ops.log_softmax, [rng.normal(size=(3, 5))], rng)

    def test_masked_softmax(self, rng: np.random.Generator) -> None:
        """Masked entries get zero weight and zero gradient."""
        mask = np.array([[False, True, False, False]])
        out = ops.softmax(Tensor(rng.normal(size=(1, 4))), mask=mask)
        assert out.data[0, 1] == 0.0
        assert_gradients(lambda a: ops.softmax(a, mask=mask), [rng.normal(size=(1, 4))], rng)

    def test_logsumexp(self, rng: np.random.Generator) -> None:
        """Stable log-sum-exp."""
        assert_gradients(lambda a: ops.logsumexp(a, axis=-1), [rng.normal(size=(4, 6))], rng)

    def test_layer_norm(self, rng: np.random.Generator) -> None:
        """Input, gain and bias gradients."""
        assert_gradients(
            ops.layer_norm,
            [rng.normal(size=(3, 6)), rng.normal(size=(6,)), rng.normal(size=(6,))],
            rng,
            rtol=1e-3,
        )

    def test_conv2d(self, rng: np.random.Generator) -> None:
        """Strided, padded cross-correlation."""
        assert_gradients(
            lambda x, w, b: ops.conv2d(x, w, b, stride=2, padding=1),
            [rng.normal(size=(2, 2, 5, 5)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=(3,))],
            rng,
        )

    def test_reductions_and_indexing(self, rng: np.random.Generator) -> None:
        """Sum, mean, reshape, transpose and integer indexing."""
        idx = np.array([0, 2, 2])
        assert_gradients(
            lambda a: ops.mean(ops.index(ops.transpose(ops.reshape(a, (3, 4)), (1, 0)), (slice(None), idx)), axis=0),
            [rng.normal(size=(12,))],
            rng,
        )

    def test_smooth_nonlinearities(self, rng: np.random.Generator) -> None:
        """Sigmoid, softplus and exp."""
        assert_gradients(lambda a: ops.add(ops.sigmoid(a), ops.softplus(ops.exp(a))), [rng.normal(size=(5,))], rng)

    def test_concat_stack_embedding(self, rng: np.random.Generator) -> None:
        """Joining ops and row lookups with repeated ids."""
        assert_gradients(
            lambda a, b: ops.stack([ops.concat([a, b], axis=-1), ops.concat([b, a], axis=-1)]),
            [rng.normal(size=(2, 3)), rng.normal(size=(2, 2))],
            rng,
        )
        assert_gradients(lambda t: ops.embedding(t, [1, 1, 0]), [rng.normal(size=(3, 4))], rng)

    def test_attention(self, rng: np.random.Generator) -> None:
        """Causal multi-head attention through its projections."""
        attention = MultiHeadAttention(4, 2, 2, rng)
        assert_gradients(lambda x: attention(x, causal=True), [rng.normal(size=(2, 3, 4))], rng, rtol=1e-3)

    def test_straight_through(self, rng: np.random.Generator) -> None:
        """Forward the replacement, backward the identity."""
        x = parameter(rng.normal(size=(2, 2)))
        target = np.zeros((2, 2))
        with Tape() as tape:
            y = ops.straight_through(x, target)
            tape.backward(ops.sum(y))
        np.testing.assert_array_equal(y.data, target)
        assert x.grad is not None
        np.testing.assert_array_equal(x.grad, np.ones((2, 2)))


class TestLayers:
    """Modules and attention masking."""

    def test_parameter_discovery(self, rng: np.random.Generator) -> None:
        """Parameters are named by attribute path in definition order."""
        encoder = TransformerEncoder(2, 4, 2, 2, 8, rng)
        names = [name for name, _ in encoder.named_parameters()]
        assert names[0].startswith("layers.0.norm1")
        assert names[-1] == "norm.beta"

    def test_state_dict_round_trip(self, rng: np.random.Generator) -> None:
        """Loading a state dict restores the parameters."""
        a, b = Linear(3, 2, rng), Linear(3, 2, rng)
        b.load_state_dict(a.state_dict())
        np.testing.assert_array_equal(a.weight.data, b.weight.data)

    def test_state_dict_shape_mismatch(self, rng: np.random.Generator) -> None:
        """Mismatched shapes are refused."""
        with pytest.raises(ContractViolation):
            Linear(3, 2, rng).load_state_dict(Linear(2, 2, rng).state_dict())

    def test_causal_attention_ignores_future(self, rng: np.random.Generator) -> None:
        """Changing a later token leaves earlier outputs unchanged."""
        attention = MultiHeadAttention(4, 2, 2, rng)
        x = rng.normal(size=(1, 4, 4))
        y = x.copy()
        y[0, 3] += 5.0
        out_x = attention(Tensor(x), causal=True).data
        out_y = attention(Tensor(y), causal=True).data
        np.testing.assert_allclose(out_x[0, :3], out_y[0, :3], atol=1e-12)
        assert not np.allclose(out_x[0, 3], out_y[0, 3])

    def test_causal_mask(self) -> None:
        """Upper triangle is masked."""
        mask = causal_mask(3)
        assert mask[0, 1] and not mask[1, 0] and not mask[1, 1]


class TestAdam:
    """Adam optimizer."""

    def test_minimizes_quadratic(self) -> None:
        """Converges to the minimum of (x - 3)^2."""
        x = parameter(np.array([0.0]))
        state = AdamState(lr=0.1)
        for _ in range(500):
            with Tape() as tape:
                tape.backward(ops.sum(ops.square(ops.sub(x, 3.0))))
            adam_step([x], state)
        assert abs(x.data[0] - 3.0) < 0.05
        assert state.step == 500

    def test_missing_gradient(self) -> None:
        """Parameters without gradient are an error unless allowed."""
        x = parameter(np.array([1.0]), name="w")
        with pytest.raises(ContractViolation, match="w"):
            adam_step([x], AdamState())
        adam_step([x], AdamState(), allow_missing=True)
        assert x.data[0] == 1.0

    def test_gradients_cleared(self) -> None:
        """A step consumes the gradients."""
        x = parameter(np.array([1.0]))
        with Tape() as tape:
            tape.backward(ops.sum(ops.square(x)))
        adam_step([x], AdamState())
        assert x.grad is None
