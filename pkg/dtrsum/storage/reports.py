"""CSV readers and writers for metrics histories, scores and evaluation reports."""

import csv
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from dtrsum.core.errors import StorageError, ValidationError
from dtrsum.schemas.reports import LossReport, VideoEvalRow

METRICS_COLUMNS = ["iteration", "epoch", "video_id", "L_D", "L_G_adv", "L_summ", "d_g", "d_s", "d_r", "val_F"]
SCORES_COLUMNS = ["video_id", "frame_index", "score"]
EVAL_COLUMNS = ["video_id", "m", "A", "B", "overlap", "P", "R", "F"]
CURVE_COLUMNS = ["frame_index", "score", "ground_truth", "selected"]
GRADCHECK_COLUMNS = ["check", "parameter", "checked", "max_rel_error", "passed"]


def format_float(value: Optional[float]) -> str:
    """repr-exact decimal, empty for missing values."""

    return "" if value is None else "%.17g" % value


def _write_rows(path, header: list[str], rows: Iterable[list[str]]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}")


def read_rows(path) -> list[dict[str, str]]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            return list(csv.DictReader(handle))
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}")


def write_metrics(path, history: list[LossReport]) -> None:
    rows = (
        [
            str(report.iteration),
            str(report.epoch),
            report.video_id,
            format_float(report.loss_d),
            format_float(report.loss_g_adv),
            format_float(report.loss_summ),
            format_float(report.d_g),
            format_float(report.d_s),
            format_float(report.d_r),
            format_float(report.val_f),
        ]
        for report in history
    )
    _write_rows(path, METRICS_COLUMNS, rows)


def write_scores(path, scores: dict[str, list[float]]) -> None:
    """one row per frame, videos in the given order."""

    rows = (
        [video_id, str(index), format_float(float(score))]
        for video_id, values in scores.items()
        for index, score in enumerate(values)
    )
    _write_rows(path, SCORES_COLUMNS, rows)


def write_eval_report(path, rows: list[VideoEvalRow], mean_f: float) -> None:
    body = [
        [
            row.video_id,
            str(row.n_segments),
            str(row.selected_frames),
            str(row.gt_frames),
            str(row.overlap),
            format_float(row.precision),
            format_float(row.recall),
            format_float(row.f_measure),
        ]
        for row in rows
    ]
    body.append(["mean", "", "", "", "", "", "", format_float(mean_f)])
    _write_rows(path, EVAL_COLUMNS, body)


def read_scores(path) -> dict[str, np.ndarray]:
    """
    parse a scores CSV back into one vector per video.

    raises:
        ValidationError: if columns are missing or frame indices are not 0..T-1 in order
    """

    scores: dict[str, list[float]] = {}
    for line, row in enumerate(read_rows(path), start=2):
        try:
            video_id, index, score = row["video_id"], int(row["frame_index"]), float(row["score"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"{path}:{line}: expected columns {', '.join(SCORES_COLUMNS)}")
        values = scores.setdefault(video_id, [])
        if index != len(values):
            raise ValidationError(f"{path}:{line}: frame index {index} out of order for {video_id}")
        values.append(score)
    return {video_id: np.asarray(values) for video_id, values in scores.items()}


def write_curve(path, scores: np.ndarray, ground_truth: np.ndarray, selected: np.ndarray) -> None:
    """one row per frame: predicted score, ground-truth mask and selected keyshot mask."""

    rows = (
        [str(t), format_float(float(scores[t])), str(int(ground_truth[t] > 0)), str(int(selected[t] > 0))]
        for t in range(len(scores))
    )
    _write_rows(path, CURVE_COLUMNS, rows)


def write_gradcheck_report(path, rows: list[tuple[str, str, int, float, bool]]) -> None:
    _write_rows(
        path,
        GRADCHECK_COLUMNS,
        (
            [check, name, str(checked), format_float(error), str(passed).lower()]
            for check, name, checked, error, passed in rows
        ),
    )
