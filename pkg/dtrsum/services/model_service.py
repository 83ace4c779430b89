import logging
from typing import Optional

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from dtrsum.core.errors import CheckpointError, HyperparameterMismatchError
from dtrsum.core.rng import make_rng
from dtrsum.models.discriminator import DiscriminatorParams
from dtrsum.models.generator import GeneratorParams
from dtrsum.schemas.config import ModelConfig, TrainConfig
from dtrsum.storage.checkpoint import load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)


def build_models(
    config: ModelConfig, rng: np.random.Generator, with_discriminator: bool = True
) -> tuple[GeneratorParams, Optional[DiscriminatorParams]]:
    """initialize the generator and, when requested, the discriminator from one stream."""

    generator = GeneratorParams(config, rng)
    discriminator = DiscriminatorParams(config, rng) if with_discriminator else None
    return generator, discriminator


def checkpoint_hyperparameters(config: ModelConfig, train: Optional[TrainConfig] = None) -> dict:
    hyperparameters = {"model": config.model_dump(mode="json")}
    if train is not None:
        hyperparameters["tau"] = train.tau
        hyperparameters["adversarial_loss"] = train.adversarial_loss.value
    return hyperparameters


def model_state(generator: GeneratorParams, discriminator: Optional[DiscriminatorParams]) -> dict[str, np.ndarray]:
    state = generator.state_dict()
    if discriminator is not None:
        state.update(discriminator.state_dict())
    return state


def save_models(
    path,
    generator: GeneratorParams,
    discriminator: Optional[DiscriminatorParams],
    train: Optional[TrainConfig] = None,
    state: Optional[dict[str, np.ndarray]] = None,
) -> None:
    """
    write both models to a checkpoint.

    args:
        state: arrays to write instead of the models' current values (a saved best state)
    """

    if state is None:
        state = model_state(generator, discriminator)
    save_checkpoint(path, state, checkpoint_hyperparameters(generator.config, train))


def _config_differences(stored: ModelConfig, expected: ModelConfig) -> list[str]:
    stored_fields, expected_fields = stored.model_dump(), expected.model_dump()
    return [
        f"{name}: checkpoint {stored_fields[name]!r}, requested {expected_fields[name]!r}"
        for name in stored_fields
        if stored_fields[name] != expected_fields[name]
    ]


def load_models(
    path, expected: Optional[ModelConfig] = None
) -> tuple[GeneratorParams, Optional[DiscriminatorParams], ModelConfig]:
    """
    rebuild models from a checkpoint.

    raises:
        CheckpointError: if the manifest or arrays do not describe the models
        HyperparameterMismatchError: if expected differs from the stored configuration
    """

    data = load_checkpoint(path)
    try:
        config = ModelConfig.model_validate(data.hyperparameters["model"])
    except (KeyError, TypeError, PydanticValidationError) as e:
        raise CheckpointError(f"{path}: invalid model hyperparameters ({e})")
    if expected is not None:
        differences = _config_differences(config, expected)
        if differences:
            raise HyperparameterMismatchError(f"{path}: " + "; ".join(differences))

    has_discriminator = any(name.startswith("discriminator.") for name in data.state)
    generator, discriminator = build_models(config, make_rng(0), has_discriminator)
    generator_state = {k: v for k, v in data.state.items() if k.startswith("generator.")}
    generator.load_state_dict(generator_state)
    if discriminator is not None:
        discriminator.load_state_dict({k: v for k, v in data.state.items() if k.startswith("discriminator.")})
    unknown = sorted(k for k in data.state if not k.startswith(("generator.", "discriminator.")))
    if unknown:
        raise CheckpointError(f"{path}: unexpected arrays {unknown}")
    logger.info(f"loaded checkpoint {path}")
    return generator, discriminator, config
