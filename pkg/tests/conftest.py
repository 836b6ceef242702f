"""Shared fixtures: a tiny generated dataset and a narrow model."""
from __future__ import annotations

import os

import numpy as np
import pytest

from modedg.data import DatasetRequest, generate_dataset
from modedg.models import ModelConfig, build_model
from modedg.training import TrainConfig
from modedg.utils.logging import configure_logging

RUN_SLOW = os.environ.get("MODEDG_RUN_SLOW") == "1"


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="set MODEDG_RUN_SLOW=1 to run acceptance checks")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    configure_logging("WARNING")
    yield


@pytest.fixture(scope="session")
def tiny_request() -> DatasetRequest:
    """4 domains x 3 classes x 10 images of 16x16 pixels."""
    return DatasetRequest(name="tiny", classes=3, images_per_class=10, image_size=16, val_fraction=0.2, seed=7)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_request):
    return generate_dataset(tiny_request)


@pytest.fixture
def small_model_config() -> ModelConfig:
    return ModelConfig(channels=(4, 8), classes=3, in_channels=3, image_size=16, mix_block=0, init_seed=3)


@pytest.fixture
def small_model(small_model_config):
    return build_model(small_model_config)


@pytest.fixture
def tiny_train_config(small_model_config):
    """Factory for short runs on the tiny dataset."""
    def make(method: str = "erm", **overrides) -> TrainConfig:
        settings = dict(model=small_model_config, epochs=1, batch_size=8, trace_limit=16)
        settings.update(overrides)
        return TrainConfig.for_method(method, **settings)
    return make


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
