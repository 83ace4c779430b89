"""
adversarial objectives and the alternating training loop.

each iteration samples one shot of one training video, takes
g_steps_per_iter generator updates with the discriminator frozen, then
d_steps_per_iter discriminator updates with the generator outputs held
constant.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from dtrsum.core import ops
from dtrsum.core.errors import ManifestError, NonFiniteError, ShapeError, ValidationError
from dtrsum.core.optim import Adam, clip_grad_norm
from dtrsum.core.rng import RngStreams
from dtrsum.core.tensor import Tensor, forward_backward, no_grad
from dtrsum.models.base import frozen
from dtrsum.models.discriminator import DiscriminatorParams
from dtrsum.models.generator import GeneratorParams
from dtrsum.schemas.config import AdversarialLoss, EvalConfig, Mode, ModelConfig, TrainConfig
from dtrsum.schemas.reports import EpochSummary, LossReport, TrainResult
from dtrsum.services.dataset_service import LoadedVideo
from dtrsum.services.discriminator_service import discriminate_triple, mask_summary, sample_random_scores
from dtrsum.services.evaluation_service import Segmentation, evaluate_segmented, segment_video
from dtrsum.services.generator_service import generator_forward
from dtrsum.services.model_service import build_models, model_state, save_models

logger = logging.getLogger(__name__)


def _check_tau(tau: float) -> None:
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"tau must lie in [0, 1], got {tau}")


def fake_term(d_s, d_r, tau: float) -> Tensor:
    """tau * d_s + (1 - tau) * d_r; d_s alone when the random pair is absent."""

    _check_tau(tau)
    if d_r is None:
        return ops.as_tensor(d_s)
    return ops.add(ops.scale(d_s, tau), ops.scale(d_r, 1.0 - tau))


def generator_adversarial_loss(d_g, d_s, d_r, tau: float) -> Tensor:
    """d_g - tau * d_s - (1 - tau) * d_r, minimized by the generator."""

    return ops.sub(d_g, fake_term(d_s, d_r, tau))


def discriminator_loss(d_g, d_s, d_r, tau: float) -> Tensor:
    """-(d_g - tau * d_s - (1 - tau) * d_r), minimized by the discriminator."""

    return ops.scale(generator_adversarial_loss(d_g, d_s, d_r, tau), -1.0)


def _squared_gap(score, target: float) -> Tensor:
    return ops.sum_of_squares(ops.sub(score, target))


def least_squares_discriminator_loss(d_g, d_s, d_r, tau: float) -> Tensor:
    """1/2 [(d_g - 1)^2 + tau d_s^2 + (1 - tau) d_r^2]."""

    _check_tau(tau)
    fake = ops.scale(_squared_gap(d_s, 0.0), tau if d_r is not None else 1.0)
    if d_r is not None:
        fake = ops.add(fake, ops.scale(_squared_gap(d_r, 0.0), 1.0 - tau))
    return ops.scale(ops.add(_squared_gap(d_g, 1.0), fake), 0.5)


def least_squares_generator_loss(d_g, d_s, d_r, tau: float) -> Tensor:
    """1/2 [tau (d_s - 1)^2 + (1 - tau) (d_r - 1)^2]."""

    _check_tau(tau)
    loss = ops.scale(_squared_gap(d_s, 1.0), tau if d_r is not None else 1.0)
    if d_r is not None:
        loss = ops.add(loss, ops.scale(_squared_gap(d_r, 1.0), 1.0 - tau))
    return ops.scale(loss, 0.5)


def supervised_loss(s_s, s_g) -> Tensor:
    """squared L2 distance between generated and ground-truth frame scores."""

    s_s, s_g = ops.as_tensor(s_s), ops.as_tensor(s_g)
    if s_s.shape != s_g.shape or s_s.ndim != 1:
        raise ShapeError(f"supervised loss needs equal-length score vectors, got {s_s.shape} and {s_g.shape}")
    return ops.sum_of_squares(ops.sub(s_s, s_g))


def generator_total_loss(adversarial, summarization) -> Tensor:
    """unweighted sum of whichever terms are present."""

    terms = [ops.as_tensor(term) for term in (adversarial, summarization) if term is not None]
    if not terms:
        raise ValidationError("generator loss needs at least one term")
    return terms[0] if len(terms) == 1 else ops.add(terms[0], terms[1])


@dataclass
class Shot:
    """a contiguous training window [start, stop) of one video."""

    video_id: str
    start: int
    stop: int
    features: np.ndarray
    labels: np.ndarray

    @property
    def num_frames(self) -> int:
        return self.stop - self.start


def shot_starts(num_frames: int, shot_len: int, overlap: float) -> list[int]:
    """window starts spaced shot_len * (1 - overlap) apart whose windows fit the video."""

    if num_frames <= shot_len:
        return [0]
    stride = max(1, int(round(shot_len * (1.0 - overlap))))
    return list(range(0, num_frames - shot_len + 1, stride))


def sample_shot(video: LoadedVideo, config: TrainConfig, rng: np.random.Generator) -> Shot:
    """pick one window uniformly among the admissible starts; short videos are used whole."""

    if video.num_frames < 1:
        raise ShapeError(f"{video.video_id}: empty video")
    starts = shot_starts(video.num_frames, config.shot_len, config.shot_overlap)
    start = starts[int(rng.integers(len(starts)))]
    stop = min(video.num_frames, start + config.shot_len)
    return Shot(video.video_id, start, stop, video.features[start:stop], video.labels[start:stop])


@dataclass
class TrainingState:
    generator: GeneratorParams
    discriminator: Optional[DiscriminatorParams]
    g_optimizer: Adam
    d_optimizer: Optional[Adam]
    streams: RngStreams
    iteration: int = 0
    history: list[LossReport] = field(default_factory=list)


def create_training_state(model_config: ModelConfig, config: TrainConfig) -> TrainingState:
    """
    initialize models and optimizers from the training seed.

    without the adversarial loss the compact encoder receives no gradient,
    so it is left out of the generator optimizer.
    """

    streams = RngStreams.from_seed(config.seed)
    generator, discriminator = build_models(model_config, streams.init, with_discriminator=config.adversarial)
    g_params = generator.parameters()
    if not config.adversarial:
        encoder = {id(param) for param in generator.encoder.parameters()}
        g_params = [param for param in g_params if id(param) not in encoder]
    g_optimizer = Adam(g_params, lr=config.lr_g)
    d_optimizer = Adam(discriminator.parameters(), lr=config.lr_d) if discriminator is not None else None
    return TrainingState(generator, discriminator, g_optimizer, d_optimizer, streams)


def _adversarial_losses(config: TrainConfig):
    if config.adversarial_loss == AdversarialLoss.LEAST_SQUARES:
        return least_squares_discriminator_loss, least_squares_generator_loss
    return discriminator_loss, generator_adversarial_loss


def masked_triple(f_e, labels: Tensor, scores: Tensor, random_scores: Optional[Tensor]):
    # the ground-truth and random pairs see a constant copy of the encoding
    reference = f_e.detach()
    return (
        mask_summary(reference, labels),
        mask_summary(f_e, scores),
        mask_summary(reference, random_scores) if random_scores is not None else None,
    )


def _finite(value: float, label: str) -> float:
    if not math.isfinite(value):
        raise NonFiniteError(label, f"loss evaluated to {value}")
    return value


def generator_step(state: TrainingState, shot: Shot, config: TrainConfig) -> dict[str, Optional[float]]:
    """
    one generator update; the discriminator is frozen for the whole step.

    the adversarial gradient reaches the generator only through its own
    (video, generated summary) pair: the ground-truth and random summaries
    mask a detached copy of f_e, so the generator cannot lower d_g or raise
    d_r by reshaping the shared encoding.
    """

    features, labels = Tensor(shot.features), Tensor(shot.labels)
    tau = config.effective_tau
    adversarial_loss = _adversarial_losses(config)[1]
    record: dict[str, Optional[float]] = {}

    def loss_fn() -> Tensor:
        scores, f_e = generator_forward(
            features, state.generator, Mode.TRAIN, state.streams.dropout, encode=config.adversarial
        )
        adversarial = summarization = None
        if config.adversarial:
            random_scores = (
                sample_random_scores(shot.num_frames, state.streams.summary) if config.random_pair else None
            )
            d_g, d_s, d_r = discriminate_triple(
                features, *masked_triple(f_e, labels, scores, random_scores), state.discriminator
            )
            adversarial = adversarial_loss(d_g, d_s, d_r, tau)
            record.update(
                loss_g_adv=adversarial.item(),
                d_g=d_g.item(),
                d_s=d_s.item(),
                d_r=d_r.item() if d_r is not None else None,
            )
        if config.supervised:
            summarization = supervised_loss(scores, labels)
            record["loss_summ"] = summarization.item()
        return generator_total_loss(adversarial, summarization)

    frozen_groups = [state.discriminator] if state.discriminator is not None else []
    with frozen(*frozen_groups):
        total = forward_backward(loss_fn, state.g_optimizer.params)
    _finite(total, "generator_total_loss")
    if config.grad_clip is not None:
        clip_grad_norm(state.g_optimizer.params, config.grad_clip)
    state.g_optimizer.step()
    return record


def discriminator_step(state: TrainingState, shot: Shot, config: TrainConfig) -> dict[str, Optional[float]]:
    """one discriminator update against constant generator outputs."""

    features, labels = Tensor(shot.features), Tensor(shot.labels)
    tau = config.effective_tau
    objective = _adversarial_losses(config)[0]
    with no_grad():
        scores, f_e = generator_forward(
            features, state.generator, Mode.TRAIN, state.streams.dropout, encode=True
        )
    record: dict[str, Optional[float]] = {}

    def loss_fn() -> Tensor:
        random_scores = (
            sample_random_scores(shot.num_frames, state.streams.summary) if config.random_pair else None
        )
        d_g, d_s, d_r = discriminate_triple(
            features, *masked_triple(f_e, labels, scores, random_scores), state.discriminator
        )
        loss = objective(d_g, d_s, d_r, tau)
        record.update(
            loss_d=loss.item(),
            d_g=d_g.item(),
            d_s=d_s.item(),
            d_r=d_r.item() if d_r is not None else None,
        )
        return loss

    _finite(forward_backward(loss_fn, state.d_optimizer.params), "discriminator_loss")
    if config.grad_clip is not None:
        clip_grad_norm(state.d_optimizer.params, config.grad_clip)
    state.d_optimizer.step()
    return record


def train_iteration(state: TrainingState, shot: Shot, config: TrainConfig, epoch: int = 0) -> LossReport:
    """
    g_steps_per_iter generator updates followed by d_steps_per_iter discriminator updates.

    returns:
        the losses of the last update of each player and the last discriminator scores

    raises:
        NonFiniteError: if any loss or gradient becomes NaN/Inf
    """

    values: dict[str, Optional[float]] = {}
    for _ in range(config.g_steps_per_iter):
        values.update(generator_step(state, shot, config))
    if config.adversarial:
        for _ in range(config.d_steps_per_iter):
            values.update(discriminator_step(state, shot, config))

    report = LossReport(iteration=state.iteration, epoch=epoch, video_id=shot.video_id, **values)
    state.iteration += 1
    state.history.append(report)
    logger.debug(
        f"iteration {report.iteration} {shot.video_id}[{shot.start}:{shot.stop}] "
        f"L_D={report.loss_d} L_G_adv={report.loss_g_adv} L_summ={report.loss_summ}"
    )
    return report


def predict_video(generator: GeneratorParams, features: np.ndarray) -> np.ndarray:
    """whole-sequence inference scores."""

    with no_grad():
        scores, _ = generator_forward(Tensor(features), generator, Mode.INFER)
    return scores.data.copy()


def mean_split_f(
    generator: GeneratorParams,
    videos: list[LoadedVideo],
    segmentations: dict[str, Segmentation],
    eval_config: EvalConfig,
) -> Optional[float]:
    if not videos:
        return None
    values = [
        evaluate_segmented(
            predict_video(generator, video.features), video.labels, segmentations[video.video_id], eval_config
        )[0].f_measure
        for video in videos
    ]
    return float(np.mean(values))


def _mean(values: list[Optional[float]]) -> Optional[float]:
    present = [value for value in values if value is not None]
    return float(np.mean(present)) if present else None


def summarize_epoch(epoch: int, reports: list[LossReport]) -> EpochSummary:
    return EpochSummary(
        epoch=epoch,
        mean_loss_d=_mean([r.loss_d for r in reports]),
        mean_loss_g_adv=_mean([r.loss_g_adv for r in reports]),
        mean_loss_summ=_mean([r.loss_summ for r in reports]),
        mean_d_g=_mean([r.d_g for r in reports]),
        mean_d_s=_mean([r.d_s for r in reports]),
        mean_d_r=_mean([r.d_r for r in reports]),
    )


def train(
    train_videos: list[LoadedVideo],
    test_videos: list[LoadedVideo],
    model_config: ModelConfig,
    config: TrainConfig,
    eval_config: EvalConfig,
    checkpoint_path=None,
) -> tuple[TrainResult, TrainingState]:
    """
    run the full schedule and keep the best checkpoint.

    every eval_every epochs the F-measure is computed on the test videos by
    whole-sequence inference (on the training videos when the test split is
    empty); the parameters with the highest value are written to
    checkpoint_path at the end.

    raises:
        ManifestError: if there are no training videos
        NonFiniteError: if training diverges
    """

    if not train_videos:
        raise ManifestError("training split is empty")
    state = create_training_state(model_config, config)
    segmentations = {
        video.video_id: segment_video(video.features, eval_config) for video in [*train_videos, *test_videos]
    }
    selection_videos = test_videos if test_videos else train_videos
    result = TrainResult()
    best_state = model_state(state.generator, state.discriminator)

    for epoch in range(config.epochs):
        order = state.streams.data.permutation(len(train_videos))
        reports = [
            train_iteration(state, sample_shot(train_videos[i], config, state.streams.data), config, epoch)
            for i in order
        ]
        summary = summarize_epoch(epoch, reports)
        if (epoch + 1) % config.eval_every == 0 or epoch == config.epochs - 1:
            summary.train_f = mean_split_f(state.generator, train_videos, segmentations, eval_config)
            summary.val_f = mean_split_f(state.generator, test_videos, segmentations, eval_config)
            selection_f = summary.val_f if test_videos else summary.train_f
            reports[-1].val_f = summary.val_f
            if result.best_f is None or selection_f > result.best_f:
                result.best_f = selection_f
                result.best_epoch = epoch
                best_state = model_state(state.generator, state.discriminator)
        result.epochs.append(summary)
        logger.info(
            f"epoch {epoch}: L_D={summary.mean_loss_d} L_G_adv={summary.mean_loss_g_adv} "
            f"L_summ={summary.mean_loss_summ} train_F={summary.train_f} val_F={summary.val_f}"
        )

    result.history = list(state.history)
    if checkpoint_path is not None:
        save_models(checkpoint_path, state.generator, state.discriminator, config, state=best_state)
        result.checkpoint_path = str(checkpoint_path)
    return result, state
