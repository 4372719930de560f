"""Boundary and proposal confidence maps over a snippet feature matrix.

Input is the (feature_dim, T) video representation. A shared 1-D conv trunk
produces a base sequence; from it, one head predicts per-snippet start and
end boundary probabilities, and a matching layer plus conv stack scores every
candidate interval on a duration x start grid.

The matching layer is a fixed linear map: for the grid cell with start t and
duration d (row index d-1), ``num_samples`` points are placed along
[t, t + d] (endpoints included) and each point reads the base sequence by
triangular interpolation between its two neighbouring snippet columns;
columns outside [0, T-1] contribute zero. Cells that overrun the sequence
(t + d > T) are all-zero and masked invalid. Because sampling is linear in
the base sequence, the whole layer is one matmul with a precomputed constant
matrix.

Grid cell (row r, column t) therefore covers the interval [t, t + r + 1] in
snippet coordinates.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from tapgkit.autodiff import tensor as T
from tapgkit.autodiff.layers import Conv1d, Conv2d, Conv3d, Module
from tapgkit.autodiff.tensor import Tensor
from tapgkit.errors import ConfigError, ShapeError


@dataclass
class BoundaryNetConfig:
    feature_dim: int
    num_snippets: int
    max_duration: int | None = None   # defaults to num_snippets
    num_samples: int = 32
    trunk_hidden: int = 256
    trunk_out: int = 128
    boundary_hidden: int = 256
    proposal_conv3d_out: int = 512
    proposal_conv2d_hidden: int = 128

    def resolved_max_duration(self) -> int:
        return self.num_snippets if self.max_duration is None else self.max_duration

    def validate(self) -> None:
        if self.feature_dim <= 0 or self.num_snippets <= 0:
            raise ConfigError("feature_dim and num_snippets must be positive")
        if not (1 <= self.resolved_max_duration() <= self.num_snippets):
            raise ConfigError("max_duration must lie in [1, num_snippets]")
        if self.num_samples < 2:
            raise ConfigError("num_samples must be at least 2")
        if min(self.trunk_hidden, self.trunk_out, self.boundary_hidden,
               self.proposal_conv3d_out, self.proposal_conv2d_hidden) <= 0:
            raise ConfigError("all channel widths must be positive")


def valid_cells(num_snippets: int, max_duration: int) -> np.ndarray:
    """Boolean (max_duration, T) grid: cell (r, t) is real iff t + r + 1 <= T."""
    r = np.arange(max_duration)[:, None]
    t = np.arange(num_snippets)[None, :]
    return (t + r + 1) <= num_snippets


@functools.lru_cache(maxsize=8)
def _sampling_weights_cached(num_snippets: int, max_duration: int,
                             num_samples: int) -> np.ndarray:
    T_ = num_snippets
    w = np.zeros((T_, num_samples, max_duration, T_))
    for r in range(max_duration):
        d = r + 1
        for t in range(T_ - d + 1):
            positions = np.linspace(t, t + d, num_samples)
            for s_idx, p in enumerate(positions):
                lo = int(np.floor(p))
                for j in (lo, lo + 1):
                    if 0 <= j < T_:
                        w[j, s_idx, r, t] += max(0.0, 1.0 - abs(p - j))
    w.flags.writeable = False
    return w


def build_sampling_weights(num_snippets: int, max_duration: int,
                           num_samples: int) -> np.ndarray:
    """Constant matrix (T, num_samples, max_duration, T) realizing the sampler."""
    return _sampling_weights_cached(num_snippets, max_duration, num_samples)


@dataclass
class BoundaryNetOutput:
    start: Tensor        # (T,)
    end: Tensor          # (T,)
    actionness: Tensor   # (max_duration, T)
    valid: np.ndarray    # boolean (max_duration, T)


class BoundaryNet(Module):
    def __init__(self, rng: np.random.Generator, cfg: BoundaryNetConfig):
        cfg.validate()
        self.cfg = cfg
        d = cfg.resolved_max_duration()
        self.trunk1 = Conv1d(rng, cfg.feature_dim, cfg.trunk_hidden, 3, padding=1)
        self.trunk2 = Conv1d(rng, cfg.trunk_hidden, cfg.trunk_out, 3, padding=1)
        self.boundary1 = Conv1d(rng, cfg.trunk_out, cfg.boundary_hidden, 3, padding=1)
        self.boundary2 = Conv1d(rng, cfg.boundary_hidden, 2, 3, padding=1)
        self.sample_collapse = Conv3d(rng, cfg.trunk_out, cfg.proposal_conv3d_out,
                                      (cfg.num_samples, 1, 1),
                                      stride=(cfg.num_samples, 1, 1))
        self.grid1 = Conv2d(rng, cfg.proposal_conv3d_out, cfg.proposal_conv2d_hidden, 1)
        self.grid2 = Conv2d(rng, cfg.proposal_conv2d_hidden, cfg.proposal_conv2d_hidden,
                            3, padding=1)
        self.grid3 = Conv2d(rng, cfg.proposal_conv2d_hidden, 1, 1)
        weights = build_sampling_weights(cfg.num_snippets, d, cfg.num_samples)
        flat = weights.reshape(cfg.num_snippets, -1)
        self._sampling = T.constant(flat)
        self._valid = valid_cells(cfg.num_snippets, d)

    def __call__(self, features: Tensor) -> BoundaryNetOutput:
        cfg = self.cfg
        d = cfg.resolved_max_duration()
        if features.data.shape != (cfg.feature_dim, cfg.num_snippets):
            raise ShapeError(
                f"features must be ({cfg.feature_dim}, {cfg.num_snippets}), "
                f"got {features.data.shape}"
            )
        base = T.relu(self.trunk2(T.relu(self.trunk1(features))))    # (trunk_out, T)

        bounds = T.sigmoid(self.boundary2(T.relu(self.boundary1(base))))  # (2, T)
        start = T.reshape(T.gather_rows(bounds, [0]), (cfg.num_snippets,))
        end = T.reshape(T.gather_rows(bounds, [1]), (cfg.num_snippets,))

        sampled = T.matmul(base, self._sampling)                     # (trunk_out, n*d*T)
        sampled = T.reshape(sampled, (cfg.trunk_out, cfg.num_samples, d, cfg.num_snippets))
        x = T.relu(self.sample_collapse(sampled))                    # (c3d, 1, d, T)
        x = T.reshape(x, (cfg.proposal_conv3d_out, d, cfg.num_snippets))
        x = T.relu(self.grid1(x))
        x = T.relu(self.grid2(x))
        actionness = T.reshape(T.sigmoid(self.grid3(x)), (d, cfg.num_snippets))
        return BoundaryNetOutput(start, end, actionness, self._valid)
