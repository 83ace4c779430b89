import logging
from pathlib import Path

import click

from dtrsum.commands.options import (
    config_option,
    echo_config,
    eval_options,
    explicit_fields,
    model_options,
    resolve_run_config,
    train_options,
)
from dtrsum.services.dataset_service import feature_dim, load_dataset, resolve_split, select_videos
from dtrsum.services.training_service import train
from dtrsum.storage.reports import write_metrics

logger = logging.getLogger(__name__)


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.4f}"


@click.command("train")
@click.option("--data", "data_path", type=click.Path(dir_okay=False), required=True, help="Dataset manifest.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Checkpoint to write.")
@click.option(
    "--metrics",
    "metrics_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Metrics CSV (defaults to <out>.metrics.csv).",
)
@config_option
@model_options
@train_options
@eval_options
@click.pass_context
def train_command(ctx, data_path, out_path, metrics_path, config_path, **_):
    """
    train the generator and discriminator on a manifest and write the best checkpoint.

    the feature dimension defaults to the dataset's unless given explicitly.
    """

    metrics_path = metrics_path or f"{out_path}.metrics.csv"
    manifest, videos = load_dataset(data_path)
    inferred = {}
    if "feature_dim" not in explicit_fields(ctx, config_path):
        inferred = {"model": {"feature_dim": feature_dim(videos)}}
    run_config = resolve_run_config(
        ctx,
        "train",
        config_path,
        {"data": str(data_path), "out": str(out_path), "metrics": str(metrics_path)},
        inferred=inferred,
    )
    echo_config(run_config, out_path)

    train_ids, test_ids = resolve_split(manifest, run_config.train.seed)
    result, _ = train(
        select_videos(videos, train_ids),
        select_videos(videos, test_ids),
        run_config.model,
        run_config.train,
        run_config.eval,
        checkpoint_path=Path(out_path),
    )
    write_metrics(metrics_path, result.history)

    for summary in result.epochs:
        click.echo(
            f"epoch {summary.epoch}: L_D={_fmt(summary.mean_loss_d)} "
            f"L_G_adv={_fmt(summary.mean_loss_g_adv)} L_summ={_fmt(summary.mean_loss_summ)} "
            f"train_F={_fmt(summary.train_f)} val_F={_fmt(summary.val_f)}"
        )
    if result.best_epoch is None:
        click.echo(f"no epochs run; checkpoint {out_path} holds the initial parameters")
    else:
        click.echo(f"best F={_fmt(result.best_f)} at epoch {result.best_epoch}; checkpoint {out_path}")
