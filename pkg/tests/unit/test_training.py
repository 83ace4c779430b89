"""
unit tests for the adversarial objectives and the training loop.

these tests verify:
- the loss identities for fixed discriminator scores
- shot sampling on the overlap grid
- that each player's update leaves the other player's parameters alone
- that the generator reaches the critic only through its own summary
- determinism of a seeded run and the zero-epoch edge case
"""

import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from dtrsum.core import ops
from dtrsum.core.errors import ManifestError, ShapeError, ValidationError
from dtrsum.core.rng import make_rng
from dtrsum.core.tensor import Parameter, Tensor
from dtrsum.schemas.config import AdversarialLoss, TrainConfig
from dtrsum.services.model_service import load_models
from dtrsum.services.training_service import (
    create_training_state,
    discriminator_loss,
    discriminator_step,
    fake_term,
    generator_adversarial_loss,
    generator_step,
    generator_total_loss,
    least_squares_discriminator_loss,
    least_squares_generator_loss,
    masked_triple,
    predict_video,
    sample_shot,
    shot_starts,
    supervised_loss,
    train,
    train_iteration,
)
from tests.test_config import TOY_EVAL, TOY_MODEL, TOY_TRAIN, make_video, synthetic_videos


def scalars(*values):
    return [Tensor(value) for value in values]


def parameter_values(group) -> dict[str, np.ndarray]:
    return {name: param.data.copy() for name, param in group.named_parameters()}


@pytest.fixture
def video(rng):
    return make_video("clip", rng.normal(size=(40, 4)), [5, 22, 30])


class TestAdversarialLosses:
    """tests for the three-player objectives."""

    def test_fake_term_mixes_generated_and_random(self):
        d_s, d_r = scalars(0.3, 0.6)

        assert fake_term(d_s, d_r, 0.5).item() == pytest.approx(0.45)
        assert fake_term(d_s, None, 0.5).item() == pytest.approx(0.3)

    def test_generator_and_discriminator_losses_are_negations(self):
        d_g, d_s, d_r = scalars(0.8, 0.3, 0.6)

        generator = generator_adversarial_loss(d_g, d_s, d_r, 0.5).item()
        discriminator = discriminator_loss(d_g, d_s, d_r, 0.5).item()

        assert generator == pytest.approx(0.8 - 0.15 - 0.3)
        assert discriminator == pytest.approx(-generator)

    def test_two_player_losses(self):
        d_g, d_s = scalars(0.8, 0.3)

        assert generator_adversarial_loss(d_g, d_s, None, 0.5).item() == pytest.approx(0.5)
        assert discriminator_loss(d_g, d_s, None, 0.5).item() == pytest.approx(-0.5)

    def test_tau_one_ignores_random_pair(self):
        d_g, d_s, d_r = scalars(0.8, 0.3, 0.6)

        assert generator_adversarial_loss(d_g, d_s, d_r, 1.0).item() == pytest.approx(0.5)

    @pytest.mark.parametrize("tau", [-0.1, 1.5])
    def test_tau_out_of_range(self, tau):
        d_g, d_s, d_r = scalars(0.8, 0.3, 0.6)

        with pytest.raises(ValidationError):
            generator_adversarial_loss(d_g, d_s, d_r, tau)

    def test_least_squares_losses(self):
        d_g, d_s, d_r = scalars(0.8, 0.3, 0.6)

        assert least_squares_discriminator_loss(d_g, d_s, d_r, 0.5).item() == pytest.approx(0.1325)
        assert least_squares_generator_loss(d_g, d_s, d_r, 0.5).item() == pytest.approx(0.1625)

    def test_least_squares_two_player(self):
        d_g, d_s = scalars(0.8, 0.3)

        assert least_squares_discriminator_loss(d_g, d_s, None, 0.5).item() == pytest.approx(0.5 * (0.04 + 0.09))
        assert least_squares_generator_loss(d_g, d_s, None, 0.5).item() == pytest.approx(0.5 * 0.49)

    def test_losses_are_differentiable(self):
        d_g = Tensor(0.8, requires_grad=True)
        d_s = Tensor(0.3, requires_grad=True)
        d_r = Tensor(0.6, requires_grad=True)

        generator_adversarial_loss(d_g, d_s, d_r, 0.5).backward()

        assert d_g.grad == pytest.approx(1.0)
        assert d_s.grad == pytest.approx(-0.5)
        assert d_r.grad == pytest.approx(-0.5)


class TestSupervisedLoss:
    """tests for supervised_loss and generator_total_loss."""

    def test_squared_distance(self):
        loss = supervised_loss(Tensor([0.5, 1.0, 0.2]), Tensor([0.0, 1.0, 0.0]))

        assert loss.item() == pytest.approx(0.25 + 0.04)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            supervised_loss(Tensor([0.5, 1.0]), Tensor([0.0, 1.0, 0.0]))

    def test_total_sums_present_terms(self):
        assert generator_total_loss(Tensor(1.5), Tensor(2.0)).item() == pytest.approx(3.5)
        assert generator_total_loss(None, Tensor(2.0)).item() == pytest.approx(2.0)
        assert generator_total_loss(Tensor(1.5), None).item() == pytest.approx(1.5)

    def test_total_needs_a_term(self):
        with pytest.raises(ValidationError):
            generator_total_loss(None, None)

    def test_config_needs_an_objective(self):
        with pytest.raises(PydanticValidationError):
            TrainConfig(adversarial=False, supervised=False)


class TestShotSampling:
    """tests for shot_starts and sample_shot."""

    def test_overlap_grid(self):
        assert shot_starts(2500, 1000, 0.1) == [0, 900]
        assert shot_starts(1900, 1000, 0.1) == [0, 900]
        assert shot_starts(1000, 1000, 0.1) == [0]

    def test_long_video_samples_both_starts(self, rng):
        long_video = make_video("long", rng.normal(size=(2500, 2)), [10])
        config = TrainConfig(shot_len=1000, shot_overlap=0.1)

        shots = [sample_shot(long_video, config, rng) for _ in range(50)]

        assert {shot.start for shot in shots} == {0, 900}
        assert all(shot.num_frames == 1000 for shot in shots)
        assert all(shot.features.shape == (1000, 2) for shot in shots)

    def test_short_video_used_whole(self, rng, video):
        shot = sample_shot(video, TrainConfig(shot_len=1000), rng)

        assert (shot.start, shot.stop) == (0, 40)
        np.testing.assert_array_equal(shot.labels, video.labels)

    def test_labels_follow_the_window(self, rng):
        long_video = make_video("long", rng.normal(size=(30, 2)), [0, 12, 25])
        config = TrainConfig(shot_len=10, shot_overlap=0.0)

        for _ in range(20):
            shot = sample_shot(long_video, config, rng)
            np.testing.assert_array_equal(shot.labels, long_video.labels[shot.start:shot.stop])


class TestTrainingState:
    """tests for create_training_state."""

    def test_adversarial_state(self):
        state = create_training_state(TOY_MODEL, TOY_TRAIN)

        assert state.discriminator is not None
        assert len(state.g_optimizer.params) == len(state.generator.parameters())
        assert state.g_optimizer.lr == TOY_TRAIN.lr_g
        assert state.d_optimizer.lr == TOY_TRAIN.lr_d

    def test_generator_only_state_skips_encoder(self):
        state = create_training_state(TOY_MODEL, TOY_TRAIN.model_copy(update={"adversarial": False}))

        names = {param.name for param in state.g_optimizer.params}

        assert state.discriminator is None
        assert state.d_optimizer is None
        assert not any(name.startswith("generator.encoder.") for name in names)
        assert "generator.scorer.weight" in names

    def test_same_seed_same_initialization(self):
        first = create_training_state(TOY_MODEL, TOY_TRAIN)
        second = create_training_state(TOY_MODEL, TOY_TRAIN)

        for name, value in parameter_values(first.generator).items():
            np.testing.assert_array_equal(value, parameter_values(second.generator)[name])


class TestPlayerIsolation:
    """tests that each update touches only its own player."""

    def test_generator_step_leaves_discriminator(self, rng, video):
        state = create_training_state(TOY_MODEL, TOY_TRAIN)
        shot = sample_shot(video, TOY_TRAIN, rng)
        before = parameter_values(state.discriminator)
        generator_before = parameter_values(state.generator)

        generator_step(state, shot, TOY_TRAIN)

        for name, value in parameter_values(state.discriminator).items():
            np.testing.assert_array_equal(value, before[name])
        assert all(param.grad is None for param in state.discriminator.parameters())
        assert all(param.requires_grad for param in state.discriminator.parameters())
        moved = [
            name
            for name, value in parameter_values(state.generator).items()
            if not np.array_equal(value, generator_before[name])
        ]
        assert "generator.scorer.weight" in moved
        assert "generator.encoder.weight" in moved

    def test_discriminator_step_leaves_generator(self, rng, video):
        state = create_training_state(TOY_MODEL, TOY_TRAIN)
        shot = sample_shot(video, TOY_TRAIN, rng)
        before = parameter_values(state.generator)
        discriminator_before = parameter_values(state.discriminator)

        discriminator_step(state, shot, TOY_TRAIN)

        for name, value in parameter_values(state.generator).items():
            np.testing.assert_array_equal(value, before[name])
        assert any(
            not np.array_equal(value, discriminator_before[name])
            for name, value in parameter_values(state.discriminator).items()
        )

    def test_reference_pairs_carry_no_generator_gradient(self, rng):
        f_e = Parameter(rng.normal(size=(6, 4)), "f_e")
        labels, scores, random_scores = Tensor(np.ones(6)), Tensor(rng.random(6)), Tensor(rng.random(6))

        gt, generated, random = masked_triple(f_e, labels, scores, random_scores)

        assert generated.requires_grad
        assert not gt.requires_grad
        assert not random.requires_grad
        np.testing.assert_array_equal(gt.data, f_e.data)

    def test_discriminator_steps_separate_ground_truth_from_random(self):
        config = TOY_TRAIN.model_copy(update={"lr_d": 1e-2})
        state = create_training_state(TOY_MODEL, config)
        video = make_video("clip", make_rng(5).normal(size=(40, 4)), list(range(10, 16)))
        shot = sample_shot(video, config, make_rng(6))

        records = [discriminator_step(state, shot, config) for _ in range(60)]

        tail = records[-10:]
        assert np.mean([r["d_g"] for r in tail]) > np.mean([r["d_r"] for r in tail])


class TestTrainIteration:
    """tests for the train_iteration function."""

    def test_three_player_report(self, rng, video):
        state = create_training_state(TOY_MODEL, TOY_TRAIN)

        report = train_iteration(state, sample_shot(video, TOY_TRAIN, rng), TOY_TRAIN)

        for value in (report.loss_d, report.loss_g_adv, report.loss_summ, report.d_g, report.d_s, report.d_r):
            assert value is not None and np.isfinite(value)
        assert report.iteration == 0
        assert state.iteration == 1
        assert state.g_optimizer.step_count == TOY_TRAIN.g_steps_per_iter
        assert state.d_optimizer.step_count == TOY_TRAIN.d_steps_per_iter

    def test_two_player_report(self, rng, video):
        config = TOY_TRAIN.model_copy(update={"random_pair": False})
        state = create_training_state(TOY_MODEL, config)

        report = train_iteration(state, sample_shot(video, config, rng), config)

        assert report.d_r is None
        assert report.loss_d is not None

    def test_generator_only_report(self, rng, video):
        config = TOY_TRAIN.model_copy(update={"adversarial": False})
        state = create_training_state(TOY_MODEL, config)

        report = train_iteration(state, sample_shot(video, config, rng), config)

        assert report.loss_d is None
        assert report.loss_g_adv is None
        assert report.loss_summ is not None

    def test_least_squares_report(self, rng, video):
        config = TOY_TRAIN.model_copy(update={"adversarial_loss": AdversarialLoss.LEAST_SQUARES})
        state = create_training_state(TOY_MODEL, config)

        report = train_iteration(state, sample_shot(video, config, rng), config)

        assert report.loss_d >= 0.0
        assert report.loss_g_adv >= 0.0

    def test_supervised_loss_decreases(self, rng, video):
        config = TOY_TRAIN.model_copy(update={"adversarial": False, "lr_g": 1e-2})
        state = create_training_state(TOY_MODEL, config)
        shot = sample_shot(video, config, rng)

        losses = [train_iteration(state, shot, config).loss_summ for _ in range(150)]

        assert losses[-1] < 0.5 * losses[0]


class TestTrain:
    """tests for the train function."""

    def test_seeded_runs_are_identical(self):
        videos = synthetic_videos()

        first, _ = train(videos[:4], videos[4:], TOY_MODEL, TOY_TRAIN, TOY_EVAL)
        second, _ = train(videos[:4], videos[4:], TOY_MODEL, TOY_TRAIN, TOY_EVAL)

        assert [r.model_dump() for r in first.history] == [r.model_dump() for r in second.history]
        assert first.best_f == second.best_f

    def test_one_epoch_history(self):
        videos = synthetic_videos()

        result, state = train(videos[:4], videos[4:], TOY_MODEL, TOY_TRAIN, TOY_EVAL)

        assert len(result.history) == 4
        assert {r.video_id for r in result.history} == {v.video_id for v in videos[:4]}
        assert len(result.epochs) == 1
        assert result.best_epoch == 0
        assert 0.0 <= result.best_f <= 100.0
        assert result.history[-1].val_f == result.epochs[0].val_f

    def test_zero_epochs_saves_initial_parameters(self, tmp_path):
        videos = synthetic_videos()
        config = TOY_TRAIN.model_copy(update={"epochs": 0})
        path = tmp_path / "model.dtrc"

        result, state = train(videos[:4], videos[4:], TOY_MODEL, config, TOY_EVAL, checkpoint_path=path)

        assert result.epochs == []
        assert result.history == []
        assert result.best_epoch is None
        generator, discriminator, _ = load_models(path)
        initial = create_training_state(TOY_MODEL, config)
        for name, value in parameter_values(initial.generator).items():
            np.testing.assert_array_equal(parameter_values(generator)[name], value)
        assert discriminator is not None

    def test_empty_training_split(self):
        with pytest.raises(ManifestError):
            train([], synthetic_videos()[:1], TOY_MODEL, TOY_TRAIN, TOY_EVAL)

    def test_selection_falls_back_to_training_split(self):
        videos = synthetic_videos()

        result, _ = train(videos[:2], [], TOY_MODEL, TOY_TRAIN, TOY_EVAL)

        assert result.epochs[0].val_f is None
        assert result.best_f == result.epochs[0].train_f


class TestPredictVideo:
    """tests for the predict_video function."""

    def test_whole_sequence_scores(self, rng):
        state = create_training_state(TOY_MODEL, TOY_TRAIN)
        features = rng.normal(size=(1200, 4))

        scores = predict_video(state.generator, features)

        assert scores.shape == (1200,)
        assert np.all((scores > 0.0) & (scores < 1.0))

    def test_leaves_running_statistics(self, rng):
        state = create_training_state(TOY_MODEL, TOY_TRAIN)
        before = state.generator.state_dict()

        predict_video(state.generator, rng.normal(size=(20, 4)))

        for name, value in state.generator.state_dict().items():
            np.testing.assert_array_equal(value, before[name])
