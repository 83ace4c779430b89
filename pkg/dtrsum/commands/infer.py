import logging
from pathlib import Path

import click

from dtrsum.commands.options import echo_config
from dtrsum.core.errors import HyperparameterMismatchError
from dtrsum.schemas.config import RunConfig
from dtrsum.services.dataset_service import load_dataset
from dtrsum.services.model_service import load_models
from dtrsum.services.training_service import predict_video
from dtrsum.storage.features import load_features
from dtrsum.storage.reports import write_scores

logger = logging.getLogger(__name__)


def _feature_inputs(path: Path, video_id: str | None) -> dict:
    if path.suffix == ".json":
        _, videos = load_dataset(path)
        return {video_id: video.features for video_id, video in videos.items()}
    return {video_id or path.stem: load_features(path)}


@click.command("infer")
@click.option("--ckpt", "ckpt_path", type=click.Path(dir_okay=False), required=True, help="Checkpoint to load.")
@click.option(
    "--features",
    "features_path",
    type=click.Path(dir_okay=False),
    required=True,
    help="A DTRF feature file or a dataset manifest (.json).",
)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Scores CSV to write.")
@click.option("--video-id", default=None, help="Video id for a single feature file (defaults to the file stem).")
def infer_command(ckpt_path, features_path, out_path, video_id):
    """score every frame of every video in one whole-sequence pass."""

    generator, _, model_config = load_models(ckpt_path)
    run_config = RunConfig(
        command="infer",
        model=model_config,
        paths={"ckpt": str(ckpt_path), "features": str(features_path), "out": str(out_path)},
    )
    echo_config(run_config, out_path)

    inputs = _feature_inputs(Path(features_path), video_id)
    scores = {}
    for name, features in inputs.items():
        if features.shape[1] != model_config.feature_dim:
            raise HyperparameterMismatchError(
                f"{name}: features have dimension {features.shape[1]}, "
                f"checkpoint expects {model_config.feature_dim}"
            )
        scores[name] = predict_video(generator, features).tolist()
        logger.info(f"scored {len(scores[name])} frames of {name}")
    write_scores(out_path, scores)
    click.echo(f"wrote scores for {len(scores)} videos to {out_path}")
