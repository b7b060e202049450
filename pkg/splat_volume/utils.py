"""Utility functions for splat_volume."""
import logging
from collections import namedtuple

from django.conf import settings

from splat_volume.exceptions import ConfigError
from splat_volume.settings import common

log = logging.getLogger(__name__)

RenderConfig = namedtuple("RenderConfig", sorted(common.RENDER_CONFIG))
LossWeights = namedtuple("LossWeights", ["gamma_d", "gamma_n", "reg_enabled", "reg_start_epoch"])
MeshConfig = namedtuple("MeshConfig", sorted(common.MESH_CONFIG))


def get_setting_dict(name, defaults):
    """
    Merge a dict-valued setting over its defaults.

    Unknown keys in the setting are reported and ignored.
    """
    configured = getattr(settings, name, None) or {}
    unknown = sorted(set(configured) - set(defaults))
    if unknown:
        log.error(f"Ignoring unknown keys {unknown} in {name}")
    values = dict(defaults)
    values.update({key: value for key, value in configured.items() if key in defaults})
    return values


def get_render_config(**overrides):
    """Rasterizer configuration from ``SPLAT_VOLUME_RENDER_CONFIG`` with keyword overrides."""
    values = get_setting_dict("SPLAT_VOLUME_RENDER_CONFIG", common.RENDER_CONFIG)
    unknown = sorted(set(overrides) - set(values))
    if unknown:
        raise ConfigError(f"Unknown render config keys: {unknown}")
    values.update(overrides)
    return RenderConfig(**values)


def get_mesh_config(**overrides):
    values = get_setting_dict("SPLAT_VOLUME_MESH_CONFIG", common.MESH_CONFIG)
    values.update({key: value for key, value in overrides.items() if value is not None})
    return MeshConfig(**values)


def get_dataset_config():
    return get_setting_dict("SPLAT_VOLUME_DATASET_CONFIG", common.DATASET_CONFIG)


def get_loss_weights(reg_enabled=True, reg_start_epoch=0, **overrides):
    values = get_setting_dict("SPLAT_VOLUME_LOSS_WEIGHTS", common.LOSS_WEIGHTS)
    values.update({key: value for key, value in overrides.items() if value is not None})
    if values["gamma_d"] < 0 or values["gamma_n"] < 0:
        raise ConfigError(f"Loss weights must be non-negative, got {values}")
    return LossWeights(values["gamma_d"], values["gamma_n"], bool(reg_enabled), int(reg_start_epoch))


def get_model_preset(name):
    presets = getattr(settings, "SPLAT_VOLUME_MODEL_PRESETS", None) or common.MODEL_PRESETS
    if name not in presets:
        raise ConfigError(f"Unknown model preset {name!r}, expected one of {sorted(presets)}")
    return dict(presets[name])


def get_train_preset(name):
    presets = getattr(settings, "SPLAT_VOLUME_TRAIN_PRESETS", None) or common.TRAIN_PRESETS
    values = get_setting_dict("SPLAT_VOLUME_TRAIN_DEFAULTS", common.TRAIN_DEFAULTS)
    values.update(presets.get(name, {}))
    return values
