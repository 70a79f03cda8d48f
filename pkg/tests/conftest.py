import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from frictiondiag.classifier import fit_models  # noqa: E402
from frictiondiag.config import Config, PipelineConfig, default_scenario  # noqa: E402
from frictiondiag.pipeline import Pipeline, build_processed_dataset  # noqa: E402
from frictiondiag.simulator import make_dataset  # noqa: E402

settings.register_profile("repo", max_examples=60, deadline=None, derandomize=True)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def cfg():
    return Config()


@pytest.fixture(scope="session")
def small_dataset(cfg):
    """80 default-scenario windows of 20000 samples."""
    return make_dataset(default_scenario(80, 20000), cfg.model, cfg.effects, seed=123)


@pytest.fixture(scope="session")
def small_processed(cfg, small_dataset):
    proc, failures = build_processed_dataset(small_dataset, cfg.pipeline)
    assert not failures
    return proc


@pytest.fixture(scope="session")
def small_models(cfg, small_processed):
    return fit_models(small_processed.entries, cfg.pipeline.classifier, seed=0)


@pytest.fixture(scope="session")
def pipeline(cfg):
    return Pipeline(cfg.pipeline)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
