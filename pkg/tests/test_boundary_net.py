"""Proposal network: sampling-matrix oracle, shapes, validity, probabilities."""

import numpy as np
import pytest

from tapgkit.autodiff import tensor as T
from tapgkit.autodiff.tensor import Tape, Tensor
from tapgkit.boundary_net import (
    BoundaryNet,
    BoundaryNetConfig,
    build_sampling_weights,
    valid_cells,
)
from tapgkit.errors import ConfigError, ShapeError

from gradcheck import scalarize


def _interpolate_column(base: np.ndarray, position: float) -> np.ndarray:
    """Triangular-kernel read of one fractional column; zero outside the grid."""
    channels, num_snippets = base.shape
    out = np.zeros(channels)
    lo = int(np.floor(position))
    for j in (lo, lo + 1):
        if 0 <= j < num_snippets:
            weight = max(0.0, 1.0 - abs(position - j))
            out += weight * base[:, j]
    return out


def _sampled_oracle(base: np.ndarray, max_duration: int, num_samples: int) -> np.ndarray:
    """Per-proposal loop version of the matching layer, for cross-checking."""
    channels, num_snippets = base.shape
    out = np.zeros((channels, num_samples, max_duration, num_snippets))
    for r in range(max_duration):
        d = r + 1
        for t in range(num_snippets):
            if t + d > num_snippets:
                continue
            for s_idx, p in enumerate(np.linspace(t, t + d, num_samples)):
                out[:, s_idx, r, t] = _interpolate_column(base, p)
    return out


class TestSamplingWeights:
    @pytest.mark.parametrize("num_snippets,max_duration,num_samples",
                             [(8, 8, 4), (16, 16, 32), (12, 5, 8), (6, 6, 2)])
    def test_matmul_equals_per_proposal_interpolation(self, num_snippets,
                                                      max_duration, num_samples):
        rng = np.random.default_rng(num_snippets * 100 + num_samples)
        base = rng.standard_normal((3, num_snippets))
        weights = build_sampling_weights(num_snippets, max_duration, num_samples)
        got = (base @ weights.reshape(num_snippets, -1)).reshape(
            3, num_samples, max_duration, num_snippets)
        want = _sampled_oracle(base, max_duration, num_samples)
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_invalid_cells_have_all_zero_weights(self):
        weights = build_sampling_weights(8, 8, 4)
        valid = valid_cells(8, 8)
        for r in range(8):
            for t in range(8):
                if not valid[r, t]:
                    np.testing.assert_array_equal(weights[:, :, r, t], 0.0)

    def test_integer_positions_read_columns_exactly(self):
        # duration 1 with 2 samples puts points on integers t and t + 1
        rng = np.random.default_rng(3)
        base = rng.standard_normal((2, 6))
        weights = build_sampling_weights(6, 6, 2)
        got = (base @ weights.reshape(6, -1)).reshape(2, 2, 6, 6)
        for t in range(5):
            np.testing.assert_allclose(got[:, 0, 0, t], base[:, t], atol=1e-12)
            np.testing.assert_allclose(got[:, 1, 0, t], base[:, t + 1], atol=1e-12)

    def test_position_at_sequence_edge_reads_zero(self):
        # the cell [t, T] ends exactly one past the last column index T-1,
        # so its final sample has no in-range neighbour and reads zero
        base = np.ones((1, 4))
        weights = build_sampling_weights(4, 4, 2)
        got = (base @ weights.reshape(4, -1)).reshape(1, 2, 4, 4)
        np.testing.assert_array_equal(got[:, 1, 0, 3], 0.0)


class TestValidity:
    def test_triangle_shape(self):
        valid = valid_cells(6, 6)
        for r in range(6):
            for t in range(6):
                assert valid[r, t] == (t + r + 1 <= 6)

    def test_full_grid_when_duration_one(self):
        assert valid_cells(5, 1).all()


class TestNetwork:
    def _cfg(self, **overrides):
        base = dict(feature_dim=6, num_snippets=8, num_samples=4,
                    trunk_hidden=10, trunk_out=7, boundary_hidden=9,
                    proposal_conv3d_out=11, proposal_conv2d_hidden=5)
        base.update(overrides)
        return BoundaryNetConfig(**base)

    def test_output_shapes_and_ranges(self):
        rng = np.random.default_rng(0)
        net = BoundaryNet(rng, self._cfg())
        out = net(Tensor(rng.standard_normal((6, 8))))
        assert out.start.data.shape == (8,)
        assert out.end.data.shape == (8,)
        assert out.actionness.data.shape == (8, 8)
        for arr in (out.start.data, out.end.data, out.actionness.data):
            assert np.all((arr > 0.0) & (arr < 1.0))
        assert out.valid.shape == (8, 8)

    def test_max_duration_limits_grid_rows(self):
        rng = np.random.default_rng(1)
        net = BoundaryNet(rng, self._cfg(max_duration=3))
        out = net(Tensor(rng.standard_normal((6, 8))))
        assert out.actionness.data.shape == (3, 8)

    def test_reference_widths_give_documented_parameter_shapes(self):
        cfg = BoundaryNetConfig(feature_dim=32, num_snippets=16)
        net = BoundaryNet(np.random.default_rng(2), cfg)
        shapes = {name: p.data.shape for name, p in net.named_parameters()}
        assert shapes["trunk1.weight"] == (256, 32, 3)
        assert shapes["trunk2.weight"] == (128, 256, 3)
        assert shapes["boundary1.weight"] == (256, 128, 3)
        assert shapes["boundary2.weight"] == (2, 256, 3)
        assert shapes["sample_collapse.weight"] == (512, 128, 32, 1, 1)
        assert shapes["grid1.weight"] == (128, 512, 1, 1)
        assert shapes["grid2.weight"] == (128, 128, 3, 3)
        assert shapes["grid3.weight"] == (1, 128, 1, 1)
        out = net(Tensor(np.random.default_rng(3).standard_normal((32, 16))))
        assert out.actionness.data.shape == (16, 16)

    def test_wrong_input_shape_rejected(self):
        net = BoundaryNet(np.random.default_rng(4), self._cfg())
        with pytest.raises(ShapeError):
            net(Tensor(np.zeros((6, 9))))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            BoundaryNetConfig(feature_dim=4, num_snippets=8, max_duration=9).validate()
        with pytest.raises(ConfigError):
            BoundaryNetConfig(feature_dim=4, num_snippets=8, num_samples=1).validate()

    def test_gradients_reach_the_trunk(self):
        rng = np.random.default_rng(5)
        net = BoundaryNet(rng, self._cfg())
        x = Tensor(rng.standard_normal((6, 8)))
        with Tape() as tape:
            out = net(x)
            loss = T.add(scalarize(out.actionness),
                         T.add(scalarize(out.start), scalarize(out.end)))
            tape.backward(loss)
        for name, p in net.named_parameters():
            assert np.abs(p.grad).sum() > 0.0, f"{name} received no gradient"
