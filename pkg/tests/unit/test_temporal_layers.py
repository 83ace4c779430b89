"""
unit tests for the dilated temporal relational layers and recurrent encoders.

these tests verify:
- time span and receptive field arithmetic
- locality of a single DTR unit and zero padding at the edges
- batch-norm statistics handling in TRAIN and INFER modes
- causality of the two LSTM directions and a hand-computed three-step run
- isolation of far frames under the default holes, and a 2000-frame pass
- gradients of the stacked layers on toy shapes
"""

import math

import numpy as np
import pytest

from dtrsum.core import ops
from dtrsum.core.errors import ShapeError, ValidationError
from dtrsum.core.gradcheck import grad_check
from dtrsum.core.rng import make_rng
from dtrsum.core.tensor import Tensor
from dtrsum.models.temporal import (
    BiLstmParams,
    DtrLayerParams,
    DtrNetworkParams,
    DtrUnitParams,
    LstmParams,
)
from dtrsum.schemas.config import DEFAULT_HOLES, Mode
from dtrsum.services.temporal_service import (
    bilstm_forward,
    dtr_layer_forward,
    dtr_network_forward,
    dtr_unit_forward,
    lstm_forward,
    receptive_field,
    time_span,
)


def changed_rows(before: np.ndarray, after: np.ndarray) -> set[int]:
    return set(np.flatnonzero(np.any(np.abs(after - before) > 1e-12, axis=1)).tolist())


class TestTimeSpan:
    """tests for time_span and receptive_field."""

    @pytest.mark.parametrize("hole, span", [(1, 3), (4, 9), (16, 33), (64, 129)])
    def test_time_span(self, hole, span):
        assert time_span(hole) == span

    @pytest.mark.parametrize(
        "hole, layers, field", [(1, 1, 3), (1, 3, 7), (4, 3, 25), (64, 3, 385)]
    )
    def test_receptive_field(self, hole, layers, field):
        assert receptive_field(hole, 3, layers) == field

    def test_rejects_zero_hole(self):
        with pytest.raises(ValidationError):
            time_span(0)
        with pytest.raises(ValidationError):
            receptive_field(0, 3, 1)


class TestDtrUnit:
    """tests for dtr_unit_forward."""

    def test_output_shape(self, rng):
        unit = DtrUnitParams("unit", 2, 4, 6, rng)

        out = dtr_unit_forward(Tensor(rng.normal(size=(10, 4))), unit)

        assert out.shape == (10, 6)

    def test_locality(self, rng):
        """perturbing frame s changes exactly rows s - h, s and s + h."""

        unit = DtrUnitParams("unit", 2, 4, 4, rng)
        f = rng.normal(size=(12, 4))
        perturbed = f.copy()
        perturbed[5] += 1.0

        before = dtr_unit_forward(Tensor(f), unit).data
        after = dtr_unit_forward(Tensor(perturbed), unit).data

        assert changed_rows(before, after) == {3, 5, 7}

    def test_identity_kernel(self, rng):
        unit = DtrUnitParams("unit", 3, 4, 4, rng)
        unit.tap_prev.data[...] = 0.0
        unit.tap_next.data[...] = 0.0
        unit.tap_center.data[...] = np.eye(4)
        f = rng.normal(size=(7, 4))

        np.testing.assert_allclose(dtr_unit_forward(Tensor(f), unit).data, f)

    def test_edges_are_zero_padded(self, rng):
        unit = DtrUnitParams("unit", 2, 3, 3, rng)
        unit.tap_prev.data[...] = np.eye(3)
        unit.tap_center.data[...] = 0.0
        unit.tap_next.data[...] = 0.0
        f = rng.normal(size=(6, 3))

        out = dtr_unit_forward(Tensor(f), unit).data

        np.testing.assert_array_equal(out[:2], np.zeros((2, 3)))
        np.testing.assert_allclose(out[2:], f[:4])

    def test_hole_longer_than_sequence(self, rng):
        """both side taps fall outside, leaving the center tap alone."""

        unit = DtrUnitParams("unit", 64, 3, 3, rng)
        f = rng.normal(size=(5, 3))

        out = dtr_unit_forward(Tensor(f), unit).data

        np.testing.assert_allclose(out, f @ unit.tap_center.data)

    def test_depthwise_taps_scale_channels(self, rng):
        unit = DtrUnitParams("unit", 1, 3, 3, rng, depthwise=True)
        unit.tap_prev.data[...] = 0.0
        unit.tap_next.data[...] = 0.0
        unit.tap_center.data[...] = [1.0, 2.0, 3.0]
        f = rng.normal(size=(4, 3))

        np.testing.assert_allclose(dtr_unit_forward(Tensor(f), unit).data, f * [1.0, 2.0, 3.0])
        assert unit.tap_center.shape == (3,)

    def test_depthwise_needs_equal_widths(self, rng):
        with pytest.raises(ValidationError):
            DtrUnitParams("unit", 1, 3, 4, rng, depthwise=True)

    def test_empty_sequence(self, rng):
        unit = DtrUnitParams("unit", 1, 3, 3, rng)

        with pytest.raises(ShapeError):
            dtr_unit_forward(Tensor(np.zeros((0, 3))), unit)

    def test_wrong_width(self, rng):
        unit = DtrUnitParams("unit", 1, 3, 3, rng)

        with pytest.raises(ShapeError):
            dtr_unit_forward(Tensor(np.zeros((4, 5))), unit)


class TestDtrLayer:
    """tests for dtr_layer_forward and dtr_network_forward."""

    def test_layer_needs_four_holes(self, rng):
        with pytest.raises(ValidationError):
            DtrLayerParams("layer", (1, 2, 4), 3, rng)

    def test_train_mode_updates_running_statistics(self, rng):
        layer = DtrLayerParams("layer", (1, 2, 4, 8), 3, rng, momentum=0.9)
        f = Tensor(rng.normal(size=(10, 3)))
        total = sum(dtr_unit_forward(f, unit).data for unit in layer.units)

        dtr_layer_forward(f, layer, Mode.TRAIN)

        np.testing.assert_allclose(layer.running_mean.data, 0.1 * total.mean(axis=0))
        np.testing.assert_allclose(layer.running_var.data, 0.9 + 0.1 * total.var(axis=0))

    def test_infer_mode_leaves_statistics(self, rng):
        layer = DtrLayerParams("layer", (1, 2, 4, 8), 3, rng)

        dtr_layer_forward(Tensor(rng.normal(size=(10, 3))), layer, Mode.INFER)

        np.testing.assert_array_equal(layer.running_mean.data, np.zeros(3))
        np.testing.assert_array_equal(layer.running_var.data, np.ones(3))

    def test_single_frame_in_train_mode(self, rng):
        layer = DtrLayerParams("layer", (1, 2, 4, 8), 3, rng)

        out = dtr_layer_forward(Tensor(rng.normal(size=(1, 3))), layer, Mode.TRAIN)

        assert out.shape == (1, 3)
        np.testing.assert_array_equal(layer.running_mean.data, np.zeros(3))

    def test_output_is_non_negative(self, rng):
        layer = DtrLayerParams("layer", (1, 2, 4, 8), 3, rng)

        out = dtr_layer_forward(Tensor(rng.normal(size=(9, 3))), layer, Mode.TRAIN)

        assert np.all(out.data >= 0.0)

    def test_identity_layer_without_normalization(self, rng):
        """one identity unit and three zero units reproduce relu(f)."""

        layer = DtrLayerParams("layer", (1, 2, 4, 8), 3, rng)
        for unit in layer.units:
            for tap in unit.taps:
                tap.data[...] = 0.0
        layer.units[0].tap_center.data[...] = np.eye(3)
        f = rng.normal(size=(6, 3))

        out = dtr_layer_forward(Tensor(f), layer, Mode.TRAIN, normalize=False)

        np.testing.assert_allclose(out.data, np.maximum(f, 0.0))

    def test_network_receptive_field(self, rng):
        """in INFER mode an output frame only sees inputs within the stacked receptive field."""

        net = DtrNetworkParams("dtr", (2, 2, 2, 2), 4, 3, rng)
        f = rng.normal(size=(40, 4))
        perturbed = f.copy()
        perturbed[20] += 5.0

        before, _ = dtr_network_forward(Tensor(f), net, Mode.INFER)
        after, _ = dtr_network_forward(Tensor(perturbed), net, Mode.INFER)
        reach = (receptive_field(2, 3, 3) - 1) // 2

        changed = changed_rows(before.data, after.data)
        assert changed
        assert changed <= set(range(20 - reach, 20 + reach + 1))

    def test_network_returns_every_layer(self, rng):
        net = DtrNetworkParams("dtr", (1, 2, 4, 8), 4, 3, rng)

        out, layers = dtr_network_forward(Tensor(rng.normal(size=(8, 4))), net, Mode.TRAIN)

        assert len(layers) == 3
        assert layers[-1] is out
        assert all(layer.shape == (8, 4) for layer in layers)

    @pytest.mark.parametrize("depthwise", [False, True])
    def test_network_gradient(self, rng, depthwise):
        net = DtrNetworkParams("dtr", (1, 2, 4, 8), 4, 3, rng, depthwise=depthwise)
        f = Tensor(rng.normal(size=(8, 4)))
        weights = Tensor(rng.normal(size=(8, 4)))

        def loss_fn():
            out, _ = dtr_network_forward(f, net, Mode.TRAIN)
            return ops.reduce_sum(ops.mul(out, weights))

        report = grad_check(loss_fn, net.parameters(), tol=1e-4, rng=make_rng(0))

        assert report.passed, report.failures()


def reachable_offsets(holes: tuple[int, ...], layers: int) -> set[int]:
    """frame offsets an output row can see through some chain of taps."""

    steps = {0} | {sign * hole for hole in holes for sign in (-1, 1)}
    offsets = {0}
    for _ in range(layers):
        offsets = {offset + step for offset in offsets for step in steps}
    return offsets


class TestStackedReceptiveField:
    """perturbation checks of the three-layer network with the default holes."""

    FRAMES = 1000
    DIM = 8

    @pytest.fixture
    def net(self):
        return DtrNetworkParams("dtr", DEFAULT_HOLES, self.DIM, 3, make_rng(11))

    def test_field_of_the_default_network(self):
        assert receptive_field(max(DEFAULT_HOLES), 3, 3) == 385

    def test_far_frames_leave_the_output_bitwise_unchanged(self, net):
        rng = make_rng(12)
        for _ in range(50):
            f = rng.normal(size=(self.FRAMES, self.DIM))
            t = int(rng.integers(self.FRAMES))
            candidates = [s for s in range(self.FRAMES) if abs(s - t) >= 385]
            source = candidates[int(rng.integers(len(candidates)))]
            perturbed = f.copy()
            perturbed[source] += rng.normal(scale=10.0, size=self.DIM)

            before, _ = dtr_network_forward(Tensor(f), net, Mode.INFER)
            after, _ = dtr_network_forward(Tensor(perturbed), net, Mode.INFER)

            np.testing.assert_array_equal(after.data[t], before.data[t])

    def test_near_frames_reach_the_output(self, net):
        rng = make_rng(13)
        offsets = sorted(d for d in reachable_offsets(DEFAULT_HOLES, 3) if 0 < abs(d) <= 64)
        changed = 0
        for _ in range(50):
            f = rng.normal(size=(300, self.DIM))
            t = int(rng.integers(100, 200))
            perturbed = f.copy()
            perturbed[t + offsets[int(rng.integers(len(offsets)))]] += rng.normal(scale=5.0, size=self.DIM)

            before, _ = dtr_network_forward(Tensor(f), net, Mode.INFER)
            after, _ = dtr_network_forward(Tensor(perturbed), net, Mode.INFER)

            changed += int(np.any(after.data[t] != before.data[t]))

        # a relu can swallow a change, so a few misses are allowed
        assert changed >= 45

    def test_long_sequence_in_one_pass(self, net):
        bilstm = BiLstmParams("bilstm", self.DIM, 8, make_rng(14))
        f = Tensor(make_rng(15).normal(size=(2000, self.DIM)))

        out, _ = dtr_network_forward(f, net, Mode.INFER)
        hidden = bilstm_forward(f, bilstm)

        assert out.shape == (2000, self.DIM)
        assert hidden.shape == (2000, 16)
        assert np.all(np.isfinite(out.data)) and np.all(np.isfinite(hidden.data))


class TestLstm:
    """tests for lstm_forward and bilstm_forward."""

    def test_forget_bias_starts_at_one(self, rng):
        params = LstmParams("lstm", 3, 4, rng)

        np.testing.assert_array_equal(params.b.data[4:8], np.ones(4))
        np.testing.assert_array_equal(params.b.data[:4], np.zeros(4))

    def test_forward_direction_is_causal(self, rng):
        params = LstmParams("lstm", 3, 4, rng)
        x = rng.normal(size=(8, 3))
        perturbed = x.copy()
        perturbed[5] += 1.0

        before = lstm_forward(Tensor(x), params, "forward").data
        after = lstm_forward(Tensor(perturbed), params, "forward").data

        assert changed_rows(before, after) == set(range(5, 8))

    def test_backward_direction_is_anti_causal(self, rng):
        params = LstmParams("lstm", 3, 4, rng)
        x = rng.normal(size=(8, 3))
        perturbed = x.copy()
        perturbed[5] += 1.0

        before = lstm_forward(Tensor(x), params, "backward").data
        after = lstm_forward(Tensor(perturbed), params, "backward").data

        assert changed_rows(before, after) == set(range(0, 6))

    def test_causality_over_random_trials(self):
        rng = make_rng(21)
        for trial in range(100):
            steps, in_dim, hidden = int(rng.integers(2, 13)), int(rng.integers(1, 5)), int(rng.integers(1, 6))
            params = LstmParams("lstm", in_dim, hidden, make_rng(trial))
            x = rng.normal(size=(steps, in_dim))
            source = int(rng.integers(steps))
            perturbed = x.copy()
            perturbed[source] += 1.0

            for direction, expected in (("forward", range(source, steps)), ("backward", range(0, source + 1))):
                before = lstm_forward(Tensor(x), params, direction).data
                after = lstm_forward(Tensor(perturbed), params, direction).data
                assert changed_rows(before, after) == set(expected), (trial, direction)

    def test_three_steps_by_hand(self, rng):
        """one input, one hidden unit and hand-set gate weights against scalar arithmetic."""

        params = LstmParams("lstm", 1, 1, rng)
        w_x, w_h, b = [0.8, -0.4, 0.6, 1.2], [0.3, 0.5, -0.7, 0.9], [0.1, 1.0, -0.2, 0.05]
        params.w_x.data[...] = [w_x]
        params.w_h.data[...] = [w_h]
        params.b.data[...] = b
        xs = [0.5, -1.5, 2.0]

        def sigmoid(v):
            return 1.0 / (1.0 + math.exp(-v))

        h = c = 0.0
        expected = []
        for x in xs:
            i = sigmoid(w_x[0] * x + w_h[0] * h + b[0])
            f = sigmoid(w_x[1] * x + w_h[1] * h + b[1])
            o = sigmoid(w_x[2] * x + w_h[2] * h + b[2])
            g = math.tanh(w_x[3] * x + w_h[3] * h + b[3])
            c = f * c + i * g
            h = o * math.tanh(c)
            expected.append(h)

        out = lstm_forward(Tensor(np.array(xs)[:, None]), params, "forward").data

        np.testing.assert_allclose(out[:, 0], expected, rtol=0.0, atol=1e-12)

    def test_unknown_direction(self, rng):
        with pytest.raises(ValidationError):
            lstm_forward(Tensor(np.zeros((2, 3))), LstmParams("lstm", 3, 4, rng), "sideways")

    def test_bilstm_width_and_halves(self, rng):
        params = BiLstmParams("bilstm", 3, 4, rng)
        x = Tensor(rng.normal(size=(6, 3)))

        out = bilstm_forward(x, params).data

        assert out.shape == (6, 8)
        np.testing.assert_allclose(out[:, :4], lstm_forward(x, params.forward, "forward").data)
        np.testing.assert_allclose(out[:, 4:], lstm_forward(x, params.backward, "backward").data)

    def test_bilstm_gradient(self, rng):
        params = BiLstmParams("bilstm", 3, 2, rng)
        x = Tensor(rng.normal(size=(5, 3)))
        weights = Tensor(rng.normal(size=(5, 4)))

        def loss_fn():
            return ops.reduce_sum(ops.mul(bilstm_forward(x, params), weights))

        assert grad_check(loss_fn, params.parameters(), tol=1e-4).passed
