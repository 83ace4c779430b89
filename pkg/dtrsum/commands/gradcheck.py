import logging

import click
from pydantic import ValidationError as PydanticValidationError

from dtrsum.commands.options import echo_config, parse_int_list
from dtrsum.core.errors import GradientCheckError, ValidationError
from dtrsum.schemas.config import ModelConfig, RunConfig
from dtrsum.services.gradcheck_service import check_models
from dtrsum.storage.reports import write_gradcheck_report

logger = logging.getLogger(__name__)

DIM_KEYS = {"D": "feature_dim", "H": "hidden_dim", "De": "encoded_dim", "Hd": "disc_hidden_dim"}
DEFAULT_DIMS = "D=4,H=4,De=4,Hd=4,T=6"


def parse_dims(ctx, param, value: str) -> dict[str, int]:
    """click callback turning "D=4,H=4,T=6" into {"D": 4, "H": 4, "T": 6}."""

    dims = {}
    for part in value.split(","):
        if not part.strip():
            continue
        key, _, number = part.partition("=")
        key = key.strip()
        if key not in DIM_KEYS and key != "T":
            raise click.BadParameter(f"unknown dimension '{key}'; expected one of D, H, De, Hd, T")
        try:
            dims[key] = int(number)
        except ValueError:
            raise click.BadParameter(f"dimension {key} needs an integer, got '{number}'")
    return dims


@click.command("gradcheck")
@click.option("--dims", default=DEFAULT_DIMS, show_default=True, callback=parse_dims, help="Toy dimensions.")
@click.option("--holes", default="1,4,16,64", show_default=True, callback=parse_int_list, help="DTR hole sizes.")
@click.option(
    "--head-dims", default="512,256,128", show_default=True, callback=parse_int_list, help="Discriminator head widths."
)
@click.option("--tol", type=float, default=1e-4, show_default=True, help="Relative tolerance.")
@click.option("--eps", type=float, default=1e-5, show_default=True, help="Finite-difference step.")
@click.option(
    "--max-entries",
    type=int,
    default=64,
    show_default=True,
    help="Coordinates sampled per parameter (0 checks every coordinate).",
)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for models, inputs and sampling.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Optional report CSV.")
def gradcheck_command(dims, holes, head_dims, tol, eps, max_entries, seed, out_path):
    """compare analytic gradients of every parameter and loss with central differences."""

    num_frames = dims.pop("T", 6)
    if num_frames < 1:
        raise ValidationError(f"T must be positive, got {num_frames}")
    try:
        model_config = ModelConfig(
            **{DIM_KEYS[key]: value for key, value in dims.items()}, holes=holes, head_dims=head_dims
        )
    except PydanticValidationError as e:
        raise ValidationError(f"invalid dimensions: {e}")

    run_config = RunConfig(command="gradcheck", model=model_config, paths={"out": str(out_path)} if out_path else {})
    echo_config(run_config, out_path)

    report = check_models(
        model_config,
        num_frames=num_frames,
        tol=tol,
        eps=eps,
        max_entries=max_entries or None,
        seed=seed,
    )
    for check, name, checked, error, passed in report.rows():
        click.echo(f"{'ok  ' if passed else 'FAIL'} {check} {name} max_rel_error={error:.3e} ({checked} checked)")
    for group, error in sorted(report.group_maxima().items()):
        click.echo(f"group {group}: max_rel_error={error:.3e}")

    if out_path:
        write_gradcheck_report(out_path, report.rows())

    if not report.passed:
        failed = sorted({result.name for _, result in report.failures()})
        raise GradientCheckError(f"gradient check failed at tol {tol} for: {', '.join(failed)}")
    click.echo(f"all {len(report.rows())} parameter checks passed at tol {tol}")
