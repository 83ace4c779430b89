"""
keyshot evaluation protocol.

a video is split into visually coherent segments by kernel temporal
segmentation, segments are picked under a duration budget with an exact
0/1 knapsack, and the generated and ground-truth selections are compared
by temporal overlap.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from dtrsum.core.errors import ShapeError, ValidationError
from dtrsum.schemas.config import EvalConfig
from dtrsum.schemas.reports import EvalResult, VideoEvalRow

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Segmentation:
    """boundaries [0, c_1, ..., T]; segment k covers frames [boundaries[k], boundaries[k+1])."""

    boundaries: tuple[int, ...]

    def __post_init__(self):
        bounds = self.boundaries
        if len(bounds) < 2 or bounds[0] != 0 or any(b <= a for a, b in zip(bounds, bounds[1:])):
            raise ValidationError(f"segment boundaries must increase strictly from 0, got {bounds}")

    @property
    def num_frames(self) -> int:
        return self.boundaries[-1]

    @property
    def n_segments(self) -> int:
        return len(self.boundaries) - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(np.asarray(self.boundaries))

    @property
    def change_points(self) -> tuple[int, ...]:
        return self.boundaries[1:-1]

    def segments(self) -> list[tuple[int, int]]:
        return list(zip(self.boundaries[:-1], self.boundaries[1:]))


@dataclass(frozen=True)
class Keyshots:
    selected: tuple[int, ...]
    mask: np.ndarray

    @property
    def duration(self) -> int:
        return int(self.mask.sum())


def _segment_costs(features: np.ndarray) -> np.ndarray:
    # cost[a, b] = within-segment scatter of frames [a, b); inf where b <= a
    centered = features - features.mean(axis=0)
    steps = centered.shape[0]
    sums = np.zeros((steps + 1, centered.shape[1]))
    sums[1:] = np.cumsum(centered, axis=0)
    squares = np.zeros(steps + 1)
    squares[1:] = np.cumsum(np.sum(centered * centered, axis=1))

    gram = sums @ sums.T
    norms = np.diag(gram)
    between = norms[None, :] + norms[:, None] - 2.0 * gram
    lengths = np.arange(steps + 1)[None, :] - np.arange(steps + 1)[:, None]
    cost = np.full((steps + 1, steps + 1), np.inf)
    valid = lengths > 0
    cost[valid] = (squares[None, :] - squares[:, None])[valid] - between[valid] / lengths[valid]
    cost[valid] = np.maximum(cost[valid], 0.0)
    return cost


def segment_scatter(features: np.ndarray, start: int, stop: int) -> float:
    """sum of squared distances of frames [start, stop) to their mean."""

    block = np.asarray(features, dtype=float)[start:stop]
    return float(np.sum((block - block.mean(axis=0)) ** 2))


def segmentation_objective(features: np.ndarray, segmentation: Segmentation, penalty: float) -> float:
    scatter = sum(segment_scatter(features, a, b) for a, b in segmentation.segments())
    return scatter + penalty * segmentation.n_segments


def default_penalty(features: np.ndarray, max_segments: int) -> float:
    """whole-video scatter / (4 * max_segments)."""

    return segment_scatter(features, 0, len(features)) / (4.0 * max_segments)


def kts_segment(features: np.ndarray, max_segments: int, penalty: Optional[float] = None) -> Segmentation:
    """
    exact change-point detection by dynamic programming.

    minimizes total within-segment squared-Euclidean scatter plus
    penalty * m over m in [1, max_segments]. ties go to fewer segments and
    then to earlier change points.

    args:
        features: T×D frame features
        max_segments: largest admissible segment count
        penalty: per-segment penalty; defaults to default_penalty()

    raises:
        ValidationError: if max_segments exceeds T or is below 1
    """

    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ShapeError(f"segmentation needs a non-empty T×D matrix, got {features.shape}")
    steps = features.shape[0]
    if not 1 <= max_segments <= steps:
        raise ValidationError(f"max_segments must lie in [1, {steps}], got {max_segments}")
    if penalty is None:
        penalty = default_penalty(features, max_segments)
    if penalty < 0:
        raise ValidationError(f"segmentation penalty must be non-negative, got {penalty}")

    cost = _segment_costs(features)
    best = np.full((max_segments + 1, steps + 1), np.inf)
    previous = np.zeros((max_segments + 1, steps + 1), dtype=int)
    best[1] = cost[0]
    for k in range(2, max_segments + 1):
        candidates = best[k - 1][:, None] + cost
        previous[k] = np.argmin(candidates, axis=0)
        best[k] = candidates[previous[k], np.arange(steps + 1)]

    objectives = best[1:, steps] + penalty * np.arange(1, max_segments + 1)
    n_segments = int(np.argmin(objectives)) + 1

    boundaries = [steps]
    end = steps
    for k in range(n_segments, 1, -1):
        end = int(previous[k, end])
        boundaries.append(end)
    boundaries.append(0)
    segmentation = Segmentation(tuple(reversed(boundaries)))
    logger.debug(f"segmented {steps} frames into {n_segments} segments (penalty {penalty:.4g})")
    return segmentation


def knapsack_select(values, weights, capacity: int) -> list[int]:
    """
    exact 0/1 knapsack.

    maximizes total value under sum(weights) <= capacity; items with
    non-positive value are never taken, and among optimal selections the
    lexicographically earliest one is returned.

    returns:
        sorted indices of the selected items
    """

    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=int)
    if values.shape != weights.shape or values.ndim != 1:
        raise ShapeError(f"knapsack values {values.shape} and weights {weights.shape} disagree")
    if np.any(weights < 1):
        raise ValidationError("knapsack weights must be positive integers")
    capacity = int(capacity)
    if capacity < 0:
        raise ValidationError(f"knapsack capacity must be non-negative, got {capacity}")

    n_items = len(values)
    # best[i, w]: optimal value of items i.. with room w
    best = np.zeros((n_items + 1, capacity + 1))
    for i in range(n_items - 1, -1, -1):
        best[i] = best[i + 1]
        weight = weights[i]
        if values[i] > 0 and weight <= capacity:
            taken = values[i] + best[i + 1, : capacity + 1 - weight]
            best[i, weight:] = np.maximum(best[i + 1, weight:], taken)

    selected = []
    room = capacity
    for i in range(n_items):
        weight = weights[i]
        if values[i] > 0 and weight <= room and values[i] + best[i + 1, room - weight] >= best[i + 1, room]:
            selected.append(i)
            room -= weight
    return selected


def budget_capacity(num_frames: int, budget_fraction: float) -> int:
    """floor(budget_fraction * T) frames."""

    return int(math.floor(budget_fraction * num_frames + 1e-9))


def _keyshots(selected: list[int], segmentation: Segmentation) -> Keyshots:
    mask = np.zeros(segmentation.num_frames)
    for index in selected:
        start, stop = segmentation.boundaries[index], segmentation.boundaries[index + 1]
        mask[start:stop] = 1.0
    return Keyshots(tuple(selected), mask)


def _check_length(vector: np.ndarray, segmentation: Segmentation, label: str) -> None:
    if vector.ndim != 1 or len(vector) != segmentation.num_frames:
        raise ShapeError(f"{label} of shape {vector.shape} does not match {segmentation.num_frames} frames")


def keyframes_to_keyshots(
    keyframe_mask, segmentation: Segmentation, budget_fraction: float = 0.15, min_keyframes: int = 1
) -> Keyshots:
    """
    ground-truth keyshots.

    segments holding at least min_keyframes keyframes are candidates valued
    by their length; the knapsack keeps them within the budget.
    """

    keyframe_mask = np.asarray(keyframe_mask, dtype=float)
    _check_length(keyframe_mask, segmentation, "keyframe mask")
    lengths = segmentation.lengths
    counts = np.array([keyframe_mask[a:b].sum() for a, b in segmentation.segments()])
    values = np.where(counts >= min_keyframes, lengths, 0).astype(float)
    capacity = budget_capacity(segmentation.num_frames, budget_fraction)
    return _keyshots(knapsack_select(values, lengths, capacity), segmentation)


def scores_to_keyshots(scores, segmentation: Segmentation, budget_fraction: float = 0.15) -> Keyshots:
    """generated keyshots: segments valued by the sum of their frame scores."""

    scores = np.asarray(scores, dtype=float)
    _check_length(scores, segmentation, "score vector")
    values = np.array([scores[a:b].sum() for a, b in segmentation.segments()])
    capacity = budget_capacity(segmentation.num_frames, budget_fraction)
    return _keyshots(knapsack_select(values, segmentation.lengths, capacity), segmentation)


def overlap(generated, reference) -> int:
    generated, reference = np.asarray(generated) > 0, np.asarray(reference) > 0
    if generated.shape != reference.shape:
        raise ShapeError(f"summary masks differ in shape: {generated.shape} vs {reference.shape}")
    return int(np.sum(generated & reference))


def precision_recall(generated, reference) -> tuple[float, float]:
    """
    temporal-overlap precision and recall of mask A against mask B.

    returns:
        (overlap / |A|, overlap / |B|), each 0 when its denominator is 0
    """

    common = overlap(generated, reference)
    size_a = int(np.sum(np.asarray(generated) > 0))
    size_b = int(np.sum(np.asarray(reference) > 0))
    precision = common / size_a if size_a else 0.0
    recall = common / size_b if size_b else 0.0
    return precision, recall


def f_measure(precision: float, recall: float) -> float:
    """harmonic mean scaled to [0, 100]; 0 when P + R = 0."""

    if precision + recall == 0:
        return 0.0
    return min(100.0, 2.0 * precision * recall / (precision + recall) * 100.0)


def evaluate_segmented(
    scores, keyframe_mask, segmentation: Segmentation, config: EvalConfig
) -> tuple[EvalResult, Keyshots, Keyshots]:
    """compare score-derived keyshots A with keyframe-derived keyshots B on a fixed segmentation."""

    generated = scores_to_keyshots(scores, segmentation, config.budget_fraction)
    reference = keyframes_to_keyshots(
        keyframe_mask, segmentation, config.budget_fraction, config.min_keyframes
    )
    precision, recall = precision_recall(generated.mask, reference.mask)
    result = EvalResult(precision=precision, recall=recall, f_measure=f_measure(precision, recall))
    return result, generated, reference


def segment_video(features, config: EvalConfig) -> Segmentation:
    features = np.asarray(features, dtype=float)
    max_segments = min(config.max_segments, features.shape[0])
    return kts_segment(features, max_segments, config.kts_penalty)


def evaluate_video(scores, keyframe_mask, features, config: EvalConfig) -> EvalResult:
    """
    full keyshot protocol for one video.

    args:
        scores: predicted per-frame scores
        keyframe_mask: binary ground-truth keyframe mask
        features: T×D features used for segmentation
        config: evaluation settings

    returns:
        precision, recall and F-measure
    """

    segmentation = segment_video(features, config)
    return evaluate_segmented(scores, keyframe_mask, segmentation, config)[0]


def evaluation_row(
    video_id: str, scores, keyframe_mask, segmentation: Segmentation, config: EvalConfig
) -> VideoEvalRow:
    result, generated, reference = evaluate_segmented(scores, keyframe_mask, segmentation, config)
    return VideoEvalRow(
        video_id=video_id,
        n_segments=segmentation.n_segments,
        selected_frames=generated.duration,
        gt_frames=reference.duration,
        overlap=overlap(generated.mask, reference.mask),
        precision=result.precision,
        recall=result.recall,
        f_measure=result.f_measure,
    )


def mean_f_measure(rows: list[VideoEvalRow]) -> float:
    if not rows:
        return 0.0
    return float(np.mean([row.f_measure for row in rows]))
