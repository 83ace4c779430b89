"""
unit tests for the summary generator.

these tests verify score ranges and shapes, the compact encoding, the
branch ablations, dropout handling per mode and the gradient of the
supervised loss through the whole generator.
"""

import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from dtrsum.core.errors import ShapeError, ValidationError
from dtrsum.core.gradcheck import grad_check
from dtrsum.core.rng import make_rng
from dtrsum.core.tensor import Tensor
from dtrsum.models.generator import GeneratorParams
from dtrsum.schemas.config import ModelConfig, Mode
from dtrsum.services.generator_service import generator_forward, temporal_encode
from dtrsum.services.training_service import supervised_loss
from tests.test_config import TOY_MODEL, toy_features


class TestGeneratorForward:
    """tests for the generator_forward function."""

    def test_scores_shape_and_range(self, toy_models, rng):
        generator, _ = toy_models

        scores, encoded = generator_forward(toy_features(rng, 12), generator, Mode.INFER)

        assert scores.shape == (12,)
        assert np.all((scores.data > 0.0) & (scores.data < 1.0))
        assert encoded is None

    def test_train_mode_returns_encoding(self, toy_models, rng):
        generator, _ = toy_models

        _, encoded = generator_forward(toy_features(rng, 10), generator, Mode.TRAIN)

        assert encoded.shape == (10, TOY_MODEL.encoded_dim)

    def test_encoded_dim_defaults_to_feature_dim(self):
        config = ModelConfig(feature_dim=6, hidden_dim=2)

        generator = GeneratorParams(config, make_rng(0))

        assert config.encoded_dim == 6
        assert generator.encoder.out_dim == 6
        assert generator.encoder.in_dim == 6 + 2 * 2

    def test_zero_parameters_give_half_scores(self, toy_models, rng):
        generator, _ = toy_models
        generator.fill(0.0)

        scores, _ = generator_forward(toy_features(rng, 9), generator, Mode.INFER)

        np.testing.assert_array_equal(scores.data, np.full(9, 0.5))

    def test_single_frame_video(self, toy_models, rng):
        generator, _ = toy_models

        for mode in (Mode.TRAIN, Mode.INFER):
            scores, _ = generator_forward(toy_features(rng, 1), generator, mode)
            assert scores.shape == (1,)

    def test_wrong_feature_dim(self, toy_models, rng):
        generator, _ = toy_models

        with pytest.raises(ShapeError):
            generator_forward(toy_features(rng, 5, dim=7), generator, Mode.INFER)

    def test_inference_is_deterministic_with_dropout(self, rng):
        config = TOY_MODEL.model_copy(update={"dropout_rate": 0.5})
        generator = GeneratorParams(config, make_rng(0))
        features = toy_features(rng, 10)

        first, _ = generator_forward(features, generator, Mode.INFER)
        second, _ = generator_forward(features, generator, Mode.INFER)

        np.testing.assert_array_equal(first.data, second.data)

    def test_train_dropout_needs_generator(self, rng):
        config = TOY_MODEL.model_copy(update={"dropout_rate": 0.5})
        generator = GeneratorParams(config, make_rng(0))

        with pytest.raises(ValidationError):
            generator_forward(toy_features(rng, 4), generator, Mode.TRAIN)

    def test_train_dropout_changes_scores(self, rng):
        config = TOY_MODEL.model_copy(update={"dropout_rate": 0.5})
        generator = GeneratorParams(config, make_rng(0))
        features = toy_features(rng, 10)

        first, _ = generator_forward(features, generator, Mode.TRAIN, make_rng(1))
        second, _ = generator_forward(features, generator, Mode.TRAIN, make_rng(2))

        assert not np.array_equal(first.data, second.data)


class TestBranchAblation:
    """tests for disabling one temporal branch."""

    def test_dtr_only(self, rng):
        config = TOY_MODEL.model_copy(update={"use_bilstm": False})
        generator = GeneratorParams(config, make_rng(0))

        f_bar, f_hat = temporal_encode(toy_features(rng, 6), generator, Mode.INFER)
        scores, _ = generator_forward(toy_features(rng, 6), generator, Mode.INFER)

        assert f_bar is None
        assert f_hat.shape == (6, 4)
        assert generator.bilstm is None
        assert generator.scorer.in_dim == 4
        assert scores.shape == (6,)

    def test_bilstm_only(self, rng):
        config = TOY_MODEL.model_copy(update={"use_dtr": False})
        generator = GeneratorParams(config, make_rng(0))

        f_bar, f_hat = temporal_encode(toy_features(rng, 6), generator, Mode.INFER)

        assert f_hat is None
        assert f_bar.shape == (6, 8)
        assert generator.dtr is None
        assert generator.scorer.in_dim == 8

    def test_both_disabled_is_invalid(self):
        with pytest.raises(PydanticValidationError):
            ModelConfig(use_dtr=False, use_bilstm=False)


class TestGeneratorGradient:
    """finite-difference checks through the full generator."""

    def test_supervised_loss_gradient(self, rng):
        generator = GeneratorParams(TOY_MODEL.model_copy(update={"feature_dim": 4}), make_rng(0))
        features = Tensor(toy_features(rng, 8))
        labels = Tensor((rng.random(8) < 0.3).astype(float))

        def loss_fn():
            scores, _ = generator_forward(features, generator, Mode.TRAIN, encode=False)
            return supervised_loss(scores, labels)

        report = grad_check(loss_fn, generator.parameters(), tol=1e-4, max_entries=32, rng=make_rng(0))

        assert report.passed, report.failures()
