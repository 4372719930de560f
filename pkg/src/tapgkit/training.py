"""Training labels, losses and the epoch loop.

Labels live on the model's snippet axis. Boundary labels mark the snippets
whose +-1 window overlaps enough of a region around an action start (or end);
grid labels mark, for each action, the valid duration x start cell(s) whose
interval overlaps it best. Both are binary.

The boundary and grid probability losses share one form: binary cross
entropy with the positive and negative sets each normalized by their own
count, so sparse positives are not drowned out. The grid adds a
lambda-weighted mean squared error term. The per-video loss is the plain sum
of the start, end and grid terms.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from functools import reduce

import numpy as np

from tapgkit.autodiff import tensor as T
from tapgkit.autodiff.checkpoint import load_checkpoint, save_checkpoint
from tapgkit.autodiff.optim import Adam
from tapgkit.autodiff.tensor import Tape, Tensor
from tapgkit.boundary_net import valid_cells
from tapgkit.data.annotations import VideoAnnotation, rescale_action
from tapgkit.data.features import VideoFeatureSequence
from tapgkit.errors import ConfigError, DegenerateInputError, EmptyInputError, ShapeError
from tapgkit.evaluation import interval_iou
from tapgkit.model import ProposalModel

log = logging.getLogger("tapgkit.training")

PROBABILITY_FLOOR = 1e-7
GRID_TIE_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# labels
# ---------------------------------------------------------------------------

def boundary_labels(points: list[float], num_snippets: int) -> np.ndarray:
    """Binary snippet labels around boundary points (starts or ends).

    Each point owns the region [p - 1.5, p + 1.5]; snippet t owns the window
    [t - 1, t + 1]. The label is 1 when the window captures at least half of
    its own width worth of region, summed over all points. Neither interval
    is clipped to the sequence.
    """
    labels = np.zeros(num_snippets)
    if not points:
        return labels
    for t in range(num_snippets):
        covered = 0.0
        for p in points:
            covered += max(0.0, min(t + 1.0, p + 1.5) - max(t - 1.0, p - 1.5)) / 3.0
        if covered >= 0.5:
            labels[t] = 1.0
    return labels


def grid_labels(segments: list[tuple[float, float]], num_snippets: int,
                max_duration: int) -> np.ndarray:
    """Binary (max_duration, T) labels: each action's best-overlap valid cell(s).

    Cell (r, t) covers [t, t + r + 1]. For every action the valid cells whose
    overlap is within a small tolerance of that action's maximum are set.
    """
    valid = valid_cells(num_snippets, max_duration)
    r = np.arange(max_duration, dtype=np.float64)[:, None]
    t = np.arange(num_snippets, dtype=np.float64)[None, :]
    starts = np.broadcast_to(t, (max_duration, num_snippets))
    ends = t + r + 1.0
    cells = np.stack([starts, ends], axis=-1)
    labels = np.zeros((max_duration, num_snippets))
    for s, e in segments:
        if not (s < e):
            raise DegenerateInputError(f"action segment [{s}, {e}] is empty")
        iou = interval_iou(cells, np.array([s, e]))
        iou = np.where(valid, iou, -1.0)
        best = iou.max()
        labels[iou >= best - GRID_TIE_TOLERANCE] = 1.0
    return labels


@dataclass
class VideoLabels:
    start: np.ndarray   # (T,)
    end: np.ndarray     # (T,)
    grid: np.ndarray    # (max_duration, T)


def video_labels(annotation: VideoAnnotation, num_snippets: int,
                 max_duration: int) -> VideoLabels:
    """Rescale a video's actions to the snippet axis and build all labels."""
    segments = [
        rescale_action(a.start, a.end, annotation.frame_count, annotation.fps, num_snippets)
        for a in annotation.annotations
    ]
    return VideoLabels(
        start=boundary_labels([s for s, _ in segments], num_snippets),
        end=boundary_labels([e for _, e in segments], num_snippets),
        grid=grid_labels(segments, num_snippets, max_duration),
    )


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def weighted_binary_loss(pred: Tensor, labels: np.ndarray,
                         floor: float = PROBABILITY_FLOOR) -> tuple[Tensor, bool]:
    """Count-balanced binary cross entropy.

    Positives and negatives are each averaged over their own population. When
    one population is empty its term is dropped; the returned flag reports
    that degenerate case.
    """
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if labels.size == 0:
        raise EmptyInputError("loss over zero entries")
    if pred.data.size != labels.size:
        raise ShapeError(f"{pred.data.size} predictions for {labels.size} labels")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    p = T.clip(T.reshape(pred, (-1,)), floor, 1.0 - floor)
    terms = []
    if n_pos:
        terms.append(T.sum_(T.mul(T.constant(labels / n_pos), T.log(p))))
    if n_neg:
        one_minus = T.sub(T.constant(np.ones_like(labels)), p)
        terms.append(T.sum_(T.mul(T.constant((1.0 - labels) / n_neg), T.log(one_minus))))
    degenerate = len(terms) < 2
    if degenerate:
        log.warning("one-sided labels (%d positive / %d negative): term dropped",
                    n_pos, n_neg)
    return T.neg(reduce(T.add, terms)), degenerate


def proposal_grid_loss(pred: Tensor, labels: np.ndarray, valid: np.ndarray,
                       mse_weight: float) -> tuple[Tensor, Tensor, Tensor, bool]:
    """Grid loss over valid cells: balanced cross entropy + weighted MSE.

    Returns (combined, cross_entropy_part, mse_part, degenerate_flag).
    """
    if pred.data.shape != labels.shape or labels.shape != valid.shape:
        raise ShapeError("prediction, labels and validity grids must share a shape")
    idx = np.flatnonzero(valid.ravel())
    if idx.size == 0:
        raise EmptyInputError("no valid grid cells")
    flat = T.gather_rows(T.reshape(pred, (-1,)), idx)
    flat_labels = labels.ravel()[idx]
    wb, degenerate = weighted_binary_loss(flat, flat_labels)
    diff = T.sub(flat, T.constant(flat_labels))
    mse = T.mean(T.mul(diff, diff))
    return T.add(wb, T.scale(mse, mse_weight)), wb, mse, degenerate


@dataclass
class LossReport:
    total: float
    start: float
    end: float
    grid_ce: float
    grid_mse: float
    degenerate_terms: int


def total_loss(output, labels: VideoLabels, mse_weight: float) -> tuple[Tensor, LossReport]:
    """Sum of start, end and grid losses for one video."""
    loss_start, deg_s = weighted_binary_loss(output.start, labels.start)
    loss_end, deg_e = weighted_binary_loss(output.end, labels.end)
    loss_grid, grid_ce, grid_mse, deg_g = proposal_grid_loss(
        output.actionness, labels.grid, output.valid, mse_weight)
    total = T.add(T.add(loss_start, loss_end), loss_grid)
    report = LossReport(
        total=total.item(), start=loss_start.item(), end=loss_end.item(),
        grid_ce=grid_ce.item(), grid_mse=grid_mse.item(),
        degenerate_terms=int(deg_s) + int(deg_e) + int(deg_g),
    )
    return total, report


# ---------------------------------------------------------------------------
# epoch loop
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-3
    mse_weight: float = 10.0
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.mse_weight < 0:
            raise ConfigError("mse_weight must be non-negative")


@dataclass
class EpochReport:
    epoch: int
    mean_total: float
    mean_start: float
    mean_end: float
    mean_grid_ce: float
    mean_grid_mse: float
    degenerate_terms: int = 0

    def json_line(self) -> str:
        return json.dumps(asdict(self))


def train(model: ProposalModel, features: dict[str, VideoFeatureSequence],
          annotations: dict[str, VideoAnnotation], cfg: TrainConfig,
          log_stream=None, optimizer: Adam | None = None,
          start_epoch: int = 0, on_epoch=None) -> list[EpochReport]:
    """Run the epoch loop; one optimizer step per video.

    Video order is reshuffled every epoch from (seed, epoch), so a resumed
    run revisits the same order it would have seen uninterrupted. Aborts on
    a non-finite loss. ``on_epoch(model, report)`` fires after every epoch.
    """
    cfg.validate()
    ids = sorted(features)
    if not ids:
        raise EmptyInputError("no videos to train on")
    missing = [v for v in ids if v not in annotations]
    if missing:
        raise ConfigError(f"videos without annotations: {missing}")

    net_cfg = model.boundary_net.cfg
    labels = {
        vid: video_labels(annotations[vid], net_cfg.num_snippets,
                          net_cfg.resolved_max_duration())
        for vid in ids
    }
    opt = optimizer or Adam(model.parameters(), lr=cfg.learning_rate)

    reports: list[EpochReport] = []
    for epoch in range(start_epoch, cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(ids))
        batch: list[LossReport] = []
        for i in order:
            vid = ids[int(i)]
            model.zero_grad()
            with Tape() as tape:
                output = model(features[vid])
                loss, report = total_loss(output, labels[vid], cfg.mse_weight)
                if not np.isfinite(report.total):
                    raise DegenerateInputError(
                        f"non-finite loss on {vid} at epoch {epoch}: {report.total}")
                tape.backward(loss)
            opt.step()
            batch.append(report)
        epoch_report = EpochReport(
            epoch=epoch,
            mean_total=float(np.mean([r.total for r in batch])),
            mean_start=float(np.mean([r.start for r in batch])),
            mean_end=float(np.mean([r.end for r in batch])),
            mean_grid_ce=float(np.mean([r.grid_ce for r in batch])),
            mean_grid_mse=float(np.mean([r.grid_mse for r in batch])),
            degenerate_terms=sum(r.degenerate_terms for r in batch),
        )
        reports.append(epoch_report)
        log.info("epoch %d mean loss %.5f", epoch, epoch_report.mean_total)
        if log_stream is not None:
            log_stream.write(epoch_report.json_line() + "\n")
            log_stream.flush()
        if on_epoch is not None:
            on_epoch(model, epoch_report)
    return reports


# ---------------------------------------------------------------------------
# checkpointing with progress metadata
# ---------------------------------------------------------------------------

EPOCH_KEY = "meta.epochs_completed"


def save_training_state(path, model: ProposalModel, epochs_completed: int) -> None:
    state = model.state_dict()
    state[EPOCH_KEY] = np.array(float(epochs_completed))
    save_checkpoint(path, state)


def load_training_state(path, model: ProposalModel) -> int:
    """Restore parameters; returns the number of completed epochs (0 if absent)."""
    state = load_checkpoint(path)
    epochs = int(state.pop(EPOCH_KEY).item()) if EPOCH_KEY in state else 0
    model.load_state_dict(state)
    return epochs
