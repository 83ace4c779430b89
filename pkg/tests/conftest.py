"""
test fixtures for the summarizer.

this module provides reusable fixtures including:
- seeded random generators
- freshly initialized toy generator and discriminator
- a synthetic corpus written to a temporary directory
- a click runner that keeps stdout and stderr apart
"""

import logging

import pytest
from click.testing import CliRunner

from dtrsum.core.rng import make_rng
from dtrsum.services.dataset_service import MANIFEST_NAME, synth_dataset
from dtrsum.services.model_service import build_models
from tests.test_config import TOY_CORPUS, TOY_MODEL


@pytest.fixture
def rng():
    """a fixed-seed generator so every test sees the same draws."""

    return make_rng(1234)


@pytest.fixture
def toy_models():
    """generator and discriminator built from the toy configuration."""

    return build_models(TOY_MODEL, make_rng(0))


@pytest.fixture
def corpus_dir(tmp_path):
    """a small synthetic corpus on disk; yields the manifest path."""

    synth_dataset(TOY_CORPUS, tmp_path / "corpus")
    yield tmp_path / "corpus" / MANIFEST_NAME


@pytest.fixture
def runner():
    """click runner with stderr captured separately from stdout."""

    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield CliRunner(mix_stderr=False)
    # the command reconfigures the root logger onto the runner's streams
    for handler in root.handlers[:]:
        root.removeHandler(handler)
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)
