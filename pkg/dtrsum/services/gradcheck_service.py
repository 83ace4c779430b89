"""
finite-difference verification of every model parameter.

the generator loss is checked against all generator and discriminator
parameters, and the discriminator losses against the discriminator
parameters with the generator outputs held constant. dropout is disabled
so each loss is a deterministic function of the parameters.
"""

import logging
from dataclasses import dataclass, field

from dtrsum.core.gradcheck import GradCheckReport, ParameterCheck, grad_check
from dtrsum.core.rng import RngStreams, make_rng
from dtrsum.core.tensor import Tensor, no_grad
from dtrsum.schemas.config import Mode, ModelConfig
from dtrsum.services.discriminator_service import discriminate_triple, mask_summary, sample_random_scores
from dtrsum.services.generator_service import generator_forward
from dtrsum.services.model_service import build_models
from dtrsum.services.training_service import (
    discriminator_loss,
    generator_adversarial_loss,
    generator_total_loss,
    least_squares_discriminator_loss,
    least_squares_generator_loss,
    supervised_loss,
)

logger = logging.getLogger(__name__)


@dataclass
class ModelGradCheck:
    tol: float
    eps: float
    checks: dict[str, GradCheckReport] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.checks.values())

    def failures(self) -> list[tuple[str, ParameterCheck]]:
        return [(name, result) for name, report in self.checks.items() for result in report.failures()]

    def rows(self) -> list[tuple[str, str, int, float, bool]]:
        return [
            (name, result.name, result.checked, result.max_rel_error, result.passed)
            for name, report in self.checks.items()
            for result in report.results
        ]

    def group_maxima(self) -> dict[str, float]:
        """max relative error per top-level parameter group (e.g. generator.dtr)."""

        maxima: dict[str, float] = {}
        for _, name, _, error, _ in self.rows():
            group = ".".join(name.split(".")[:2])
            maxima[group] = max(maxima.get(group, 0.0), error)
        return maxima


def check_models(
    config: ModelConfig,
    num_frames: int = 6,
    tol: float = 1e-4,
    eps: float = 1e-5,
    max_entries: int | None = 64,
    seed: int = 0,
) -> ModelGradCheck:
    """
    run every gradient check on freshly initialized toy models.

    args:
        config: model dimensions; dropout is forced off
        num_frames: length of the random input sequence
        tol: relative tolerance per coordinate
        eps: finite-difference step
        max_entries: coordinates sampled per parameter, None for all
        seed: seed for initialization, inputs and coordinate sampling
    """

    config = config.model_copy(update={"dropout_rate": 0.0})
    streams = RngStreams.from_seed(seed)
    generator, discriminator = build_models(config, streams.init)
    features = Tensor(streams.data.normal(size=(num_frames, config.feature_dim)))
    labels = Tensor((streams.data.random(num_frames) < 0.3).astype(float))
    random_scores = sample_random_scores(num_frames, streams.summary)
    tau = 0.5

    def triple(scores, f_e):
        return discriminate_triple(
            features,
            mask_summary(f_e, labels),
            mask_summary(f_e, scores),
            mask_summary(f_e, random_scores),
            discriminator,
        )

    def generator_loss(adversarial_loss):
        def loss_fn():
            scores, f_e = generator_forward(features, generator, Mode.TRAIN, encode=True)
            return generator_total_loss(adversarial_loss(*triple(scores, f_e), tau), supervised_loss(scores, labels))

        return loss_fn

    with no_grad():
        constant_scores, constant_f_e = generator_forward(features, generator, Mode.TRAIN, encode=True)

    def discriminator_objective(objective):
        def loss_fn():
            return objective(*triple(constant_scores, constant_f_e), tau)

        return loss_fn

    all_params = generator.parameters() + discriminator.parameters()
    checks = {
        "generator_total_loss": (generator_loss(generator_adversarial_loss), all_params),
        "least_squares_generator_loss": (generator_loss(least_squares_generator_loss), all_params),
        "discriminator_loss": (discriminator_objective(discriminator_loss), discriminator.parameters()),
        "least_squares_discriminator_loss": (
            discriminator_objective(least_squares_discriminator_loss),
            discriminator.parameters(),
        ),
    }

    result = ModelGradCheck(tol=tol, eps=eps)
    for name, (loss_fn, params) in checks.items():
        report = grad_check(loss_fn, params, eps=eps, tol=tol, max_entries=max_entries, rng=make_rng(seed))
        result.checks[name] = report
        logger.info(f"{name}: max relative error {report.max_rel_error:.3e} over {len(report.results)} parameters")
    return result
