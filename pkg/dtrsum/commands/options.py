"""
shared click options and run-configuration resolution.

every model, training and evaluation field is exposed as a flag whose
default mirrors the pydantic default. the resolved configuration is
defaults < --config JSON document < flags typed on the command line.
"""

import json
import logging
from pathlib import Path
from typing import Optional

import click
from click.core import ParameterSource
from pydantic import BaseModel
from pydantic import ValidationError as PydanticValidationError

from dtrsum.core.errors import ValidationError
from dtrsum.schemas.config import EvalConfig, ModelConfig, RunConfig, TrainConfig
from dtrsum.storage.documents import read_json, write_json

logger = logging.getLogger(__name__)

SECTIONS = {"model": ModelConfig, "train": TrainConfig, "eval": EvalConfig}


def parse_int_list(ctx, param, value):
    """click callback turning "1,4,16,64" into (1, 4, 16, 64)."""

    if value is None or isinstance(value, tuple):
        return value
    try:
        return tuple(int(part) for part in str(value).split(",") if part.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{value}'")


# flag, field, click type
MODEL_FLAGS = [
    ("--feature-dim", "feature_dim", int),
    ("--hidden-dim", "hidden_dim", int),
    ("--encoded-dim", "encoded_dim", int),
    ("--disc-hidden-dim", "disc_hidden_dim", int),
    ("--head-dims", "head_dims", "ints"),
    ("--holes", "holes", "ints"),
    ("--dropout-rate", "dropout_rate", float),
    ("--depthwise/--full-mixing", "depthwise", bool),
    ("--bilstm/--no-bilstm", "use_bilstm", bool),
    ("--dtr/--no-dtr", "use_dtr", bool),
]
TRAIN_FLAGS = [
    ("--lr-g", "lr_g", float),
    ("--lr-d", "lr_d", float),
    ("--tau", "tau", float),
    ("--shot-len", "shot_len", int),
    ("--shot-overlap", "shot_overlap", float),
    ("--g-steps", "g_steps_per_iter", int),
    ("--d-steps", "d_steps_per_iter", int),
    ("--epochs", "epochs", int),
    ("--seed", "seed", int),
    ("--adversarial/--g-only", "adversarial", bool),
    ("--random-pair/--no-random-pair", "random_pair", bool),
    ("--supervised/--no-supervised", "supervised", bool),
    ("--adversarial-loss", "adversarial_loss", "enum"),
    ("--grad-clip", "grad_clip", float),
    ("--eval-every", "eval_every", int),
]
EVAL_FLAGS = [
    ("--budget", "budget_fraction", float),
    ("--max-segments", "max_segments", int),
    ("--kts-penalty", "kts_penalty", float),
    ("--min-keyframes", "min_keyframes", int),
]


def _option(flag: str, field: str, kind, schema: type[BaseModel]):
    info = schema.model_fields[field]
    default = info.default
    kwargs = {"show_default": True, "help": info.description}
    if kind == "ints":
        kwargs.update(type=str, callback=parse_int_list, default=",".join(str(v) for v in default))
    elif kind == "enum":
        choices = [member.value for member in type(default)]
        kwargs.update(type=click.Choice(choices), default=default.value)
    elif kind is bool:
        kwargs.update(default=default)
    else:
        kwargs.update(type=kind, default=default)
    return click.option(flag, field, **kwargs)


def _section_options(section: str, flags):
    schema = SECTIONS[section]

    def decorator(fn):
        for flag, field, kind in reversed(flags):
            fn = _option(flag, field, kind, schema)(fn)
        return fn

    return decorator


model_options = _section_options("model", MODEL_FLAGS)
train_options = _section_options("train", TRAIN_FLAGS)
eval_options = _section_options("eval", EVAL_FLAGS)

config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="JSON document with model/train/eval sections; flags typed on the command line win.",
)

FIELD_SECTIONS = {
    field: section
    for section, flags in (("model", MODEL_FLAGS), ("train", TRAIN_FLAGS), ("eval", EVAL_FLAGS))
    for _, field, _ in flags
}


def _load_document(config_path: Optional[str]) -> dict:
    if config_path is None:
        return {}
    document = read_json(config_path)
    if not isinstance(document, dict):
        raise ValidationError(f"{config_path}: config must be a JSON object")
    unknown = sorted(set(document) - set(SECTIONS))
    if unknown:
        raise ValidationError(f"{config_path}: unknown config sections {unknown}")
    return document


def explicit_fields(ctx: click.Context, config_path: Optional[str]) -> set[str]:
    """fields set by a typed flag or by the config document."""

    document = _load_document(config_path)
    named = {field for section in document.values() if isinstance(section, dict) for field in section}
    typed = {
        name
        for name in ctx.params
        if name in FIELD_SECTIONS and ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE
    }
    return named | typed


def resolve_run_config(
    ctx: click.Context,
    command: str,
    config_path: Optional[str],
    paths: dict[str, str],
    inferred: Optional[dict[str, dict]] = None,
) -> RunConfig:
    """
    merge defaults, inferred values, the config document and typed flags.

    args:
        inferred: values derived from the inputs (e.g. the feature dimension),
            ranked above defaults and below everything the user states

    raises:
        ValidationError: if the merged configuration is invalid
    """

    merged: dict[str, dict] = {section: {} for section in SECTIONS}
    for section, values in (inferred or {}).items():
        merged[section].update(values)
    for section, values in _load_document(config_path).items():
        if not isinstance(values, dict):
            raise ValidationError(f"{config_path}: section '{section}' must be an object")
        merged[section].update(values)
    for name, value in ctx.params.items():
        section = FIELD_SECTIONS.get(name)
        if section is not None and ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE:
            merged[section][name] = value

    try:
        return RunConfig(command=command, paths=paths, **merged)
    except PydanticValidationError as e:
        raise ValidationError(f"invalid configuration: {e}")


def run_config_path(output: str) -> Path:
    return Path(f"{output}.run.json")


def echo_config(run_config: BaseModel, output: Optional[str]) -> None:
    """print the resolved configuration and persist it next to the output, if there is one."""

    payload = run_config.model_dump(mode="json")
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if output:
        write_json(run_config_path(output), payload)

