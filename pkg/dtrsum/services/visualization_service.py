import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from dtrsum.core.errors import ShapeError, StorageError  # noqa: E402
from dtrsum.storage.reports import write_curve  # noqa: E402

logger = logging.getLogger(__name__)

SVG_STYLE = {
    "svg.hashsalt": "dtrsum",
    "svg.fonttype": "none",
    "font.size": 9,
    "figure.figsize": (8.0, 2.5),
}


def _spans(mask: np.ndarray) -> list[tuple[int, int]]:
    """[start, stop) runs of ones."""

    padded = np.concatenate([[0], (mask > 0).astype(int), [0]])
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def _check_aligned(scores: np.ndarray, ground_truth: np.ndarray, selected: np.ndarray) -> None:
    if not (scores.ndim == ground_truth.ndim == selected.ndim == 1) or not (
        len(scores) == len(ground_truth) == len(selected)
    ):
        raise ShapeError(
            f"score curve inputs disagree: scores {scores.shape}, ground truth {ground_truth.shape}, "
            f"selection {selected.shape}"
        )


def write_curve_csv(path, scores, ground_truth, selected) -> None:
    """one row per frame: predicted score, ground-truth mask and selected keyshot mask."""

    scores, ground_truth, selected = np.asarray(scores), np.asarray(ground_truth), np.asarray(selected)
    _check_aligned(scores, ground_truth, selected)
    write_curve(path, scores, ground_truth, selected)


def render_curve(path, scores, ground_truth, selected, title: str = "") -> None:
    """
    draw ground-truth frames as bars, selected keyshots as shaded spans and the
    predicted scores as a line, into a deterministic SVG.
    """

    scores, ground_truth, selected = np.asarray(scores), np.asarray(ground_truth), np.asarray(selected)
    _check_aligned(scores, ground_truth, selected)
    frames = np.arange(len(scores))
    path = Path(path)

    with plt.rc_context(SVG_STYLE):
        fig, ax = plt.subplots()
        try:
            for start, stop in _spans(selected):
                ax.axvspan(start - 0.5, stop - 0.5, color="#f4a261", alpha=0.35, linewidth=0)
            ax.bar(frames, ground_truth, width=1.0, color="#1d3557", alpha=0.6, label="ground truth")
            ax.plot(frames, scores, color="#e63946", linewidth=1.0, label="predicted")
            ax.set_xlim(-0.5, len(scores) - 0.5)
            ax.set_ylim(0.0, 1.05)
            ax.set_xlabel("frame")
            ax.set_ylabel("score")
            if title:
                ax.set_title(title)
            ax.legend(loc="upper right", frameon=False)
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise StorageError(f"cannot write figure to {path}: {e}")
        finally:
            plt.close(fig)
    logger.debug(f"rendered {len(scores)}-frame score curve to {path}")
