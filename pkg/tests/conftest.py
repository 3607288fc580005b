"""
conftest.py - shared fixtures: small configs, synthetic sequences, log capture.

Long runs are marked @pytest.mark.slow and only run with GLOCALFUSE_RUN_SLOW=1.
"""

import os
import pathlib
from typing import Any, Callable

import pytest
import torch
from loguru import logger

from producers.synth_producer import synth_generate
from utils.utils_config import TrainingConfig, build_training_config

SMALL_SIZE = {"image_height": 32, "image_width": 64}


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if os.getenv("GLOCALFUSE_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set GLOCALFUSE_RUN_SLOW=1 to run slow tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _seed() -> None:
    torch.manual_seed(0)


@pytest.fixture
def make_cfg() -> Callable[..., TrainingConfig]:
    """Desk preset shrunk to 32x64 images, with any field overridden."""

    def _make(**overrides: Any) -> TrainingConfig:
        return build_training_config("desk", overrides={**SMALL_SIZE, **overrides})

    return _make


@pytest.fixture(scope="session")
def synth_seq(tmp_path_factory: pytest.TempPathFactory) -> pathlib.Path:
    """Six 32x64 frames of the default scene. Treat as read-only."""
    root = tmp_path_factory.mktemp("synth") / "seq"
    return synth_generate(root, 6, seed=0, height=32, width=64)


@pytest.fixture
def captured_logs():
    messages: list[str] = []
    handler_id = logger.add(lambda m: messages.append(m.record["message"]), level="WARNING")
    yield messages
    logger.remove(handler_id)
