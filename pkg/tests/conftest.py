"""
Shared fixtures: seeded generators, tiny model configs, small datasets.
"""
import numpy as np
import pytest

from viraliency.core.config import get_settings
from viraliency.schemas.data import SynthSpec
from viraliency.schemas.model import ConvLayerSpec, ModelConfig, PoolingMode
from viraliency.schemas.train import TrainConfig


@pytest.fixture(autouse=True)
def clear_settings_cache():
    """Settings are lru_cached; every test starts from the current environment."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model_config():
    """2-conv LENA model on 3x10x10 inputs (a few hundred parameters)."""
    return ModelConfig(
        input_channels=3,
        input_height=10,
        input_width=10,
        conv_layers=[
            ConvLayerSpec(out_channels=4, kernel=3, stride=1, padding=0),
            ConvLayerSpec(out_channels=6, kernel=3, stride=1, padding=1),
        ],
        pooling_mode=PoolingMode.LENA,
        eta_init=0.3,
    )


@pytest.fixture
def synth_model_config():
    """Model sized for the 16x16 synthetic datasets below."""
    return ModelConfig(
        input_channels=3,
        input_height=16,
        input_width=16,
        conv_layers=[
            ConvLayerSpec(out_channels=4, kernel=3, stride=2, padding=1),
            ConvLayerSpec(out_channels=6, kernel=3, stride=1, padding=1),
        ],
        pooling_mode=PoolingMode.LENA,
        eta_init=0.5,
    )


@pytest.fixture
def small_synth_spec():
    return SynthSpec(
        image_height=16,
        image_width=16,
        num_images=40,
        blob_radius_min=2.0,
        blob_radius_max=3.0,
        train_pairs=30,
        test_pairs=10,
        extremes_k=10,
        seed=7,
    )


@pytest.fixture
def quick_train_config():
    return TrainConfig(
        base_lr=0.01,
        weight_decay=0.0005,
        lr_step_every=50,
        max_iters=12,
        batch_size=4,
        eta_snapshot_every=5,
        log_every=5,
        grad_chunks=2,
        seed=3,
    )
