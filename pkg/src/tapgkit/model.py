"""End-to-end model: snippet fusion feeding the boundary/proposal network."""

from __future__ import annotations

import numpy as np

from tapgkit.autodiff.layers import Module
from tapgkit.boundary_net import BoundaryNet, BoundaryNetConfig, BoundaryNetOutput
from tapgkit.data.features import VideoFeatureSequence
from tapgkit.errors import ConfigError, ShapeError
from tapgkit.representation import RepresentationConfig, SnippetRepresentation


class ProposalModel(Module):
    def __init__(self, rng: np.random.Generator, rep_cfg: RepresentationConfig,
                 net_cfg: BoundaryNetConfig):
        if rep_cfg.feature_dim != net_cfg.feature_dim:
            raise ConfigError(
                f"representation width {rep_cfg.feature_dim} != "
                f"boundary net input width {net_cfg.feature_dim}"
            )
        self.representation = SnippetRepresentation(rng, rep_cfg)
        self.boundary_net = BoundaryNet(rng, net_cfg)

    def __call__(self, seq: VideoFeatureSequence) -> BoundaryNetOutput:
        expected = self.boundary_net.cfg.num_snippets
        if seq.num_snippets != expected:
            raise ShapeError(
                f"{seq.video_id}: model expects {expected} snippets, got {seq.num_snippets}"
            )
        return self.boundary_net(self.representation.video(seq))
