import logging

import click

from dtrsum.commands.options import config_option, echo_config, eval_options, resolve_run_config
from dtrsum.core.errors import ManifestError
from dtrsum.services.dataset_service import load_dataset, resolve_split
from dtrsum.services.evaluation_service import evaluation_row, mean_f_measure, segment_video
from dtrsum.storage.reports import read_scores, write_eval_report

logger = logging.getLogger(__name__)


@click.command("eval")
@click.option("--scores", "scores_path", type=click.Path(dir_okay=False), required=True, help="Scores CSV.")
@click.option("--data", "data_path", type=click.Path(dir_okay=False), required=True, help="Dataset manifest.")
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Evaluation CSV (defaults to <scores>.eval.csv).",
)
@click.option(
    "--split",
    type=click.Choice(["test", "train", "all"]),
    default="test",
    show_default=True,
    help="Videos to evaluate.",
)
@click.option("--seed", type=int, default=0, show_default=True, help="Split seed when the manifest has no split.")
@config_option
@eval_options
@click.pass_context
def evaluate_command(ctx, scores_path, data_path, out_path, split, seed, config_path, **_):
    """keyshot precision, recall and F-measure of predicted scores against the ground truth."""

    out_path = out_path or f"{scores_path}.eval.csv"
    run_config = resolve_run_config(
        ctx, "eval", config_path, {"scores": str(scores_path), "data": str(data_path), "out": str(out_path)}
    )
    echo_config(run_config, out_path)

    manifest, videos = load_dataset(data_path)
    if split == "all":
        ids = manifest.video_ids
    else:
        train_ids, test_ids = resolve_split(manifest, seed)
        ids = train_ids if split == "train" else test_ids
    if not ids:
        raise ManifestError(f"the {split} split of {data_path} is empty")

    scores = read_scores(scores_path)
    missing = [video_id for video_id in ids if video_id not in scores]
    if missing:
        raise ManifestError(f"{scores_path} has no scores for {missing}")

    rows = []
    for video_id in ids:
        video = videos[video_id]
        if len(scores[video_id]) != video.num_frames:
            raise ManifestError(
                f"{video_id}: {len(scores[video_id])} scores for {video.num_frames} frames"
            )
        segmentation = segment_video(video.features, run_config.eval)
        rows.append(evaluation_row(video_id, scores[video_id], video.labels, segmentation, run_config.eval))
    mean_f = mean_f_measure(rows)
    write_eval_report(out_path, rows, mean_f)
    for row in rows:
        click.echo(f"{row.video_id}: P={row.precision:.4f} R={row.recall:.4f} F={row.f_measure:.2f}")
    click.echo(f"mean F={mean_f:.2f} over {len(rows)} videos")
