import logging
from pathlib import Path

import click

from dtrsum.commands.options import config_option, echo_config, eval_options, resolve_run_config
from dtrsum.core.errors import ShapeError, ValidationError
from dtrsum.services.dataset_service import load_annotations
from dtrsum.services.evaluation_service import scores_to_keyshots, segment_video
from dtrsum.services.visualization_service import render_curve, write_curve_csv
from dtrsum.storage.features import load_features
from dtrsum.storage.reports import read_scores

logger = logging.getLogger(__name__)


@click.command("visualize")
@click.option("--scores", "scores_path", type=click.Path(dir_okay=False), required=True, help="Scores CSV.")
@click.option("--gt", "gt_path", type=click.Path(dir_okay=False), required=True, help="Annotation document.")
@click.option(
    "--features",
    "features_path",
    type=click.Path(dir_okay=False),
    required=True,
    help="DTRF features used to segment the video into keyshots.",
)
@click.option("--video-id", default=None, help="Video to draw (defaults to the annotation's video).")
@click.option("--score-valued", is_flag=True, help="Binarize the annotation's frame scores at the top 15%.")
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False),
    required=True,
    help="curve.svg or curve.csv; both files are written with the same stem.",
)
@config_option
@eval_options
@click.pass_context
def visualize_command(ctx, scores_path, gt_path, features_path, video_id, score_valued, out_path, config_path, **_):
    """overlay predicted scores, ground-truth frames and selected keyshots for one video."""

    out = Path(out_path)
    if out.suffix not in (".svg", ".csv"):
        raise ValidationError(f"--out must end in .svg or .csv, got '{out.name}'")
    run_config = resolve_run_config(
        ctx,
        "visualize",
        config_path,
        {"scores": str(scores_path), "gt": str(gt_path), "features": str(features_path), "out": str(out_path)},
    )
    echo_config(run_config, out_path)

    annotation = load_annotations(gt_path)
    video_id = video_id or annotation.video_id
    scores = read_scores(scores_path)
    if video_id not in scores:
        raise ValidationError(f"{scores_path} has no scores for '{video_id}'")
    features = load_features(features_path)
    curve = scores[video_id]
    if not len(curve) == annotation.num_frames == features.shape[0]:
        raise ShapeError(
            f"{video_id}: {len(curve)} scores, {annotation.num_frames} annotated frames, "
            f"{features.shape[0]} feature rows"
        )

    ground_truth = annotation.summary_mask(score_valued=score_valued)
    segmentation = segment_video(features, run_config.eval)
    selected = scores_to_keyshots(curve, segmentation, run_config.eval.budget_fraction).mask

    svg_path, csv_path = out.with_suffix(".svg"), out.with_suffix(".csv")
    write_curve_csv(csv_path, curve, ground_truth, selected)
    render_curve(svg_path, curve, ground_truth, selected, title=video_id)
    click.echo(f"wrote {svg_path} and {csv_path}")
