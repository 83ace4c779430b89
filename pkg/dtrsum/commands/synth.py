import json
import logging
from pathlib import Path

import click
from pydantic import ValidationError as PydanticValidationError

from dtrsum.core.errors import ValidationError
from dtrsum.schemas.dataset import SyntheticSpec
from dtrsum.services.dataset_service import MANIFEST_NAME, synth_dataset
from dtrsum.storage.documents import read_json, write_json

logger = logging.getLogger(__name__)


@click.command("synth")
@click.option("--spec", "spec_path", type=click.Path(dir_okay=False), default=None, help="SyntheticSpec JSON document.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Overrides the corpus seed.")
@click.option("--n-videos", type=int, default=None, help="Overrides the number of videos.")
def synth_command(spec_path, out_dir, seed, n_videos):
    """
    write a synthetic corpus with planted segments and keyframes.

    the corpus holds DTRF feature files, annotation documents and a
    manifest with an 80/20 split.
    """

    document = read_json(spec_path) if spec_path else {}
    if not isinstance(document, dict):
        raise ValidationError(f"{spec_path}: spec must be a JSON object")
    if seed is not None:
        document["seed"] = seed
    if n_videos is not None:
        document["n_videos"] = n_videos
    try:
        spec = SyntheticSpec.model_validate(document)
    except PydanticValidationError as e:
        raise ValidationError(f"invalid synthetic spec: {e}")

    payload = {"command": "synth", "spec": spec.model_dump(mode="json"), "paths": {"out": str(out_dir)}}
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    write_json(Path(out_dir) / "synth.run.json", payload)

    manifest = synth_dataset(spec, out_dir)
    click.echo(f"wrote {len(manifest.videos)} videos to {Path(out_dir) / MANIFEST_NAME}")
