"""Shared fixtures: small synthetic recordings and tiny networks."""

import pytest

from config.settings import get_settings
from models.echogram import Orientation
from models.network import ModelConfig
from models.synth import SynthConfig
from services.synth import synthesize


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    """Settings are cached per process; tests that set ECHOSEG_* need a fresh read."""
    for name in ("ECHOSEG_LOG_LEVEL", "ECHOSEG_MODEL_PATH", "ECHOSEG_JOBS", "ECHOSEG_SEED"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def small_synth_config() -> SynthConfig:
    return SynthConfig(seed=7, n_pings=200, depth_max=20.0, resolution=0.1)


@pytest.fixture
def downfacing_recording(small_synth_config):
    return synthesize(small_synth_config, "down")


@pytest.fixture
def upfacing_recording(small_synth_config):
    config = small_synth_config.model_copy(update={"orientation": Orientation.UPFACING})
    return synthesize(config, "up")


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    """Two encoder blocks on 16 x 32 inputs."""
    return ModelConfig(width=4, depth=2, expansion=2, input_width=16, input_height=32)
