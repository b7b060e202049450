"""
Tests for the config, camera and metrics schemas.
"""
import pytest

from splat_volume.exceptions import ConfigError
from splat_volume.serializers import (
    CameraSerializer,
    MetricsReportSerializer,
    ModelConfigSerializer,
    TrainConfigSerializer,
    validated,
)
from splat_volume.settings import common
from test_utils.helpers import TINY_MODEL, TINY_TRAIN


@pytest.mark.parametrize("preset", sorted(common.MODEL_PRESETS))
def test_model_presets_are_valid(preset):
    assert validated(ModelConfigSerializer, common.MODEL_PRESETS[preset]) == common.MODEL_PRESETS[preset]


def test_tiny_configs_are_valid():
    validated(ModelConfigSerializer, TINY_MODEL)
    validated(TrainConfigSerializer, TINY_TRAIN)


@pytest.mark.parametrize("override,field", [
    ({"G": 3}, "W_f"),
    ({"heads": 3}, "O"),
    ({"image_size": 20}, "image_size"),
    ({"sh_order": 1}, "sh_order"),
    ({"K": 0}, "K"),
])
def test_invalid_model_config(override, field):
    with pytest.raises(ConfigError) as error:
        validated(ModelConfigSerializer, {**TINY_MODEL, **override}, source="model config")
    assert field in str(error.value)
    assert "Invalid model config" in str(error.value)


def test_missing_model_field():
    config = dict(TINY_MODEL)
    config.pop("W_e")
    with pytest.raises(ConfigError) as error:
        validated(ModelConfigSerializer, config)
    assert "W_e" in str(error.value)


@pytest.mark.parametrize("override", [{"lr": 0.0}, {"precision": "float16"}, {"betas": [0.9]}, {"epochs": 0}])
def test_invalid_train_config(override):
    with pytest.raises(ConfigError):
        validated(TrainConfigSerializer, {**TINY_TRAIN, **override})


def test_camera_payload():
    data = {"K": [1, 0, 0, 0, 1, 0, 0, 0, 1], "w2c": [0] * 16, "width": 4, "height": 3, "image_path": "rgb_000.png"}
    assert validated(CameraSerializer, data)["width"] == 4
    with pytest.raises(ConfigError):
        validated(CameraSerializer, {**data, "K": [1, 2]})


def test_metrics_report_allows_nulls():
    record = {"psnr": None, "ssim": 0.5, "depth_abs": 0.1, "acc_005": 10, "acc_01": 20, "acc_02": None}
    assert validated(MetricsReportSerializer, record)["acc_005"] == 10.0
    with pytest.raises(ConfigError):
        validated(MetricsReportSerializer, {"psnr": "high"})
