"""
Loading model and training configs from preset names or YAML files.
"""
import logging
import os

import yaml

from splat_volume.exceptions import ConfigError
from splat_volume.serializers import ModelConfigSerializer, TrainConfigSerializer, validated
from splat_volume.utils import get_model_preset, get_train_preset

log = logging.getLogger(__name__)

DEFAULT_PRESET = "desk"


def _read_yaml(path):
    try:
        with open(path) as handle:
            data = yaml.safe_load(handle) or {}
    except (OSError, yaml.YAMLError) as e:
        log.error(f"Unable to read config {path}: {e}")
        raise ConfigError(f"Unable to read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must be a mapping, got {type(data).__name__}")
    return data


def load_config(source=None):
    """
    Return ``(model_config, train_config)`` for a preset name or a YAML path.

    A YAML file may name a ``preset`` to start from and override keys under
    ``model`` and ``train``.
    """
    source = source or DEFAULT_PRESET
    if os.path.exists(source):
        data = _read_yaml(source)
        preset = data.get("preset", DEFAULT_PRESET)
        model = get_model_preset(preset)
        model.update(data.get("model") or {})
        train = get_train_preset(preset)
        train.update(data.get("train") or {})
        log.info(f"Loaded config {source} on top of preset {preset!r}")
    else:
        model = get_model_preset(source)
        train = get_train_preset(source)
    return (
        validated(ModelConfigSerializer, model, source=f"model config {source}"),
        validated(TrainConfigSerializer, train, source=f"train config {source}"),
    )


def load_model_config(source=None):
    return load_config(source)[0]


def dump_config(path, model, train, preset=None):
    payload = {"model": dict(model), "train": dict(train)}
    if preset:
        payload["preset"] = preset
    with open(path, "w") as handle:
        yaml.safe_dump(payload, handle, sort_keys=True)
