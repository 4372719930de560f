"""Decode boundary and grid probabilities into de-overlapped proposals.

Candidate boundaries are local maxima of the start and end probability
sequences (sequence endpoints only compare against their single neighbour,
plateaus count because comparisons are non-strict) together with every point
reaching half the sequence maximum. Every start/end pair (s < e) within the
grid's duration range becomes a candidate interval, scored by the product

    start_prob[s] * end_prob[e] * grid_prob[e - s - 1, s].

Redundant candidates are thinned either by classic suppression (drop
everything overlapping a kept proposal beyond a threshold) or by score decay:
a proposal overlapping the last kept one enough has its score multiplied by
exp(-IoU / sigma). "Enough" is IoU >= overlap_offset + distance_weight *
normalized_center_distance, so far-apart intervals can be left alone even at
moderate IoU. Decayed proposals whose score falls under a floor are dropped.

Preset parameter sets are provided for the usual benchmark configurations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from tapgkit.boundary_net import BoundaryNetOutput
from tapgkit.errors import ConfigError, EmptyInputError, FileFormatError
from tapgkit.evaluation import Detection, interval_iou

SCORE_FLOOR = 1e-4


@dataclass
class Proposal:
    start: float
    end: float
    score: float

    def span(self) -> np.ndarray:
        return np.array([self.start, self.end], dtype=np.float64)


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of non-strict local maxima; endpoints use one-sided tests."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    keep = np.ones(n, dtype=bool)
    keep[1:] &= values[1:] >= values[:-1]
    keep[:-1] &= values[:-1] >= values[1:]
    return np.flatnonzero(keep).astype(np.int64)


def boundary_candidates(values: np.ndarray, ratio: float = 0.5) -> np.ndarray:
    """Candidate boundary points: local maxima plus high-probability points.

    A trained boundary head often puts a near-flat plateau of top
    probabilities around the true boundary; float noise then makes the
    plateau's argmax land one snippet off. Points reaching ``ratio`` times
    the sequence maximum are therefore candidates too, not just the maxima.
    """
    values = np.asarray(values, dtype=np.float64)
    maxima = local_maxima(values)
    if values.size == 0:
        return maxima
    high = np.flatnonzero(values >= ratio * values.max())
    return np.union1d(maxima, high).astype(np.int64)


def pair_candidates(output: BoundaryNetOutput) -> list[tuple[int, int, float]]:
    """All (start_index, end_index, score) pairs from boundary candidates."""
    p_start = output.start.data
    p_end = output.end.data
    p_grid = output.actionness.data
    max_duration = p_grid.shape[0]
    pairs = []
    for s in boundary_candidates(p_start):
        for e in boundary_candidates(p_end):
            d = int(e) - int(s)
            if d < 1 or d > max_duration or not output.valid[d - 1, s]:
                continue
            score = float(p_start[s]) * float(p_end[e]) * float(p_grid[d - 1, s])
            pairs.append((int(s), int(e), score))
    return pairs


# ---------------------------------------------------------------------------
# suppression
# ---------------------------------------------------------------------------

@dataclass
class SoftSuppressionConfig:
    sigma: float
    overlap_offset: float = 0.0        # IoU needed before any decay applies
    distance_weight: float = 0.0       # extra IoU required per unit of distance
    score_floor: float = SCORE_FLOOR
    max_keep: int = 100

    def validate(self) -> None:
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.max_keep < 1:
            raise ConfigError("max_keep must be at least 1")


@dataclass
class HardSuppressionConfig:
    threshold: float
    max_keep: int = 100

    def validate(self) -> None:
        if not (0.0 < self.threshold <= 1.0):
            raise ConfigError("suppression threshold must lie in (0, 1]")
        if self.max_keep < 1:
            raise ConfigError("max_keep must be at least 1")


PRESETS: dict[str, SoftSuppressionConfig | HardSuppressionConfig] = {
    "anet-tapg-snms": SoftSuppressionConfig(sigma=0.4, overlap_offset=0.5,
                                            distance_weight=0.4),
    "thumos-tapg-snms": SoftSuppressionConfig(sigma=0.3, overlap_offset=0.65,
                                              distance_weight=0.0),
    "anet-tad-snms": SoftSuppressionConfig(sigma=0.4),
    "thumos-tad-nms": HardSuppressionConfig(threshold=0.45),
}


def suppression_preset(name: str) -> SoftSuppressionConfig | HardSuppressionConfig:
    try:
        return replace(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown suppression preset {name!r}; "
                          f"known: {sorted(PRESETS)}") from None


def normalized_center_distance(kept: Proposal, other: Proposal) -> float:
    """Distance between interval centers in units of the kept duration."""
    duration = kept.end - kept.start
    gap = abs((kept.start + kept.end) - (other.start + other.end)) / 2.0
    return gap / duration if duration > 0 else math.inf


def _pop_best(pool: list[Proposal]) -> Proposal:
    # highest score wins; ties go to the earlier start, then insertion order
    best = min(range(len(pool)), key=lambda i: (-pool[i].score, pool[i].start, i))
    return pool.pop(best)


def soft_nms(proposals: list[Proposal], cfg: SoftSuppressionConfig,
             distance=normalized_center_distance) -> list[Proposal]:
    """Score-decay suppression; returns kept proposals in descending score."""
    cfg.validate()
    pool = [replace(p) for p in proposals]
    kept: list[Proposal] = []
    while pool and len(kept) < cfg.max_keep:
        top = _pop_best(pool)
        kept.append(top)
        survivors = []
        for p in pool:
            iou = float(interval_iou(top.span(), p.span()))
            if iou >= cfg.overlap_offset + cfg.distance_weight * distance(top, p):
                p = replace(p, score=p.score * math.exp(-iou / cfg.sigma))
            if p.score >= cfg.score_floor:
                survivors.append(p)
        pool = survivors
    return kept


def nms(proposals: list[Proposal], cfg: HardSuppressionConfig) -> list[Proposal]:
    """Classic suppression: drop everything overlapping a kept proposal
    strictly beyond the threshold."""
    cfg.validate()
    pool = [replace(p) for p in proposals]
    kept: list[Proposal] = []
    while pool and len(kept) < cfg.max_keep:
        top = _pop_best(pool)
        kept.append(top)
        pool = [p for p in pool
                if float(interval_iou(top.span(), p.span())) <= cfg.threshold]
    return kept


def suppress(proposals: list[Proposal],
             cfg: SoftSuppressionConfig | HardSuppressionConfig) -> list[Proposal]:
    if isinstance(cfg, SoftSuppressionConfig):
        return soft_nms(proposals, cfg)
    return nms(proposals, cfg)


# ---------------------------------------------------------------------------
# full decode
# ---------------------------------------------------------------------------

def generate_proposals(output: BoundaryNetOutput, snippet_stride: int, fps: float,
                       suppression: SoftSuppressionConfig | HardSuppressionConfig,
                       ) -> list[Proposal]:
    """Candidate pairing plus suppression, with intervals mapped to seconds."""
    seconds_per_snippet = snippet_stride / fps
    candidates = [
        Proposal(s * seconds_per_snippet, e * seconds_per_snippet, score)
        for s, e, score in pair_candidates(output)
    ]
    return suppress(candidates, suppression)


def merge_class_scores(proposals: list[Proposal], class_scores: dict[str, float],
                       top_k: int = 2) -> list[Detection]:
    """Turn proposals into detections by fusing video-level class scores.

    Each proposal spawns one detection per top-``top_k`` class, scored by the
    product of proposal and class scores.
    """
    if not class_scores:
        raise EmptyInputError("class_scores must not be empty")
    ranked = sorted(class_scores.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return [
        Detection(p.start, p.end, p.score * cls_score, label)
        for p in proposals
        for label, cls_score in ranked
    ]


# ---------------------------------------------------------------------------
# proposal files
# ---------------------------------------------------------------------------

def save_proposals(path, proposals_by_video: dict[str, list[Proposal]]) -> None:
    payload = {
        vid: [{"segment": [p.start, p.end], "score": p.score} for p in props]
        for vid, props in proposals_by_video.items()
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def load_proposals(path) -> dict[str, list[Proposal]]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
        return {
            vid: [Proposal(float(r["segment"][0]), float(r["segment"][1]),
                           float(r["score"])) for r in records]
            for vid, records in raw.items()
        }
    except (json.JSONDecodeError, KeyError, TypeError, IndexError, ValueError,
            AttributeError) as err:
        raise FileFormatError(f"{path}: malformed proposal file ({err})") from err
