"""Context-adaptive selection and fusion of candidate feature rows.

Given a snippet context vector and M candidate rows (actors or objects), the
module scores each candidate against the context, keeps the rows whose
normalized score clears an adaptive threshold of 1/M, and fuses the kept
original rows with a small self-attention encoder followed by mean pooling.

Scoring: candidate rows and the context are embedded by two shallow MLPs, the
relevance of row i is the Euclidean norm of the concatenated embeddings, and
the norms are softmax-normalized across rows. Because softmax scores over M
rows sum to one, the maximum is always >= 1/M, so at least one row survives
selection whenever M >= 1.

The kept/dropped decision is treated as a constant during backprop: gradients
flow into the selected original rows through the fusion encoder, and the
scoring MLPs sit on a dead branch. Two reference baselines share the scoring
path: ``soft`` skips selection and returns the score-weighted sum of all rows
(scores do receive gradient there), ``hard`` returns the single best row.

With M == 0 the module returns a learned default vector instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tapgkit.autodiff import tensor as T
from tapgkit.autodiff.layers import MLP, Module, SelfAttentionEncoder
from tapgkit.autodiff.tensor import Tensor
from tapgkit.errors import ConfigError, ShapeError

MODES = ("adaptive", "soft", "hard")


@dataclass
class SelectionInfo:
    """What the selector decided for one snippet, for inspection and tests."""
    scores: np.ndarray        # normalized scores, shape (M,)
    threshold: float
    selected: np.ndarray      # indices into the candidate rows, ascending
    used_default: bool


class AdaptiveAttention(Module):
    def __init__(self, rng: np.random.Generator, candidate_dim: int, context_dim: int,
                 hidden_dim: int = 64, mode: str = "adaptive"):
        if mode not in MODES:
            raise ConfigError(f"attention mode must be one of {MODES}, got {mode!r}")
        self.candidate_embed = MLP(rng, [candidate_dim, hidden_dim, hidden_dim])
        self.context_embed = MLP(rng, [context_dim, hidden_dim, hidden_dim])
        self.encoder = SelfAttentionEncoder(rng, candidate_dim)
        self.default_output = T.parameter(np.zeros(candidate_dim))
        self.mode = mode
        self._candidate_dim = candidate_dim
        self._context_dim = context_dim

    def scores(self, candidates: Tensor, context: Tensor) -> Tensor:
        """Normalized relevance of each candidate row, shape (M,)."""
        m = candidates.data.shape[0]
        embedded = self.candidate_embed(candidates)                      # (M, h)
        ctx = self.context_embed(T.reshape(context, (1, -1)))            # (1, h)
        ctx_rows = T.concat([ctx] * m, axis=0)                           # (M, h)
        relevance = T.l2_norm(T.concat([embedded, ctx_rows], axis=1), axis=1)
        return T.softmax(relevance, axis=0)

    def __call__(self, candidates: Tensor, context: Tensor) -> tuple[Tensor, SelectionInfo]:
        if candidates.data.ndim != 2 or candidates.data.shape[1] != self._candidate_dim:
            raise ShapeError(
                f"candidates must be (M, {self._candidate_dim}), got {candidates.data.shape}"
            )
        if context.data.shape != (self._context_dim,):
            raise ShapeError(f"context must be ({self._context_dim},), got {context.data.shape}")

        m = candidates.data.shape[0]
        if m == 0:
            info = SelectionInfo(np.zeros(0), 0.0, np.zeros(0, dtype=np.int64), True)
            return self.default_output, info

        scores = self.scores(candidates, context)
        threshold = 1.0 / m

        if self.mode == "soft":
            fused = T.reshape(T.matmul(T.reshape(scores, (1, m)), candidates), (-1,))
            info = SelectionInfo(scores.data.copy(), threshold,
                                 np.arange(m, dtype=np.int64), False)
            return fused, info

        if self.mode == "hard":
            best = int(np.argmax(scores.data))
            fused = T.reshape(T.gather_rows(candidates, [best]), (-1,))
            info = SelectionInfo(scores.data.copy(), threshold,
                                 np.array([best], dtype=np.int64), False)
            return fused, info

        selected = np.flatnonzero(scores.data >= threshold).astype(np.int64)
        if selected.size == 0:
            # mathematically impossible (softmax max >= 1/M), but guard the
            # invariant against float rounding on near-uniform scores
            selected = np.array([int(np.argmax(scores.data))], dtype=np.int64)
        kept = T.gather_rows(candidates, selected)
        fused = T.mean(self.encoder(kept), axis=0)
        info = SelectionInfo(scores.data.copy(), threshold, selected, False)
        return fused, info
