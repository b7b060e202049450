"""
Test utils.
"""
import unittest
from unittest.mock import patch

import ddt
from django.conf import settings

from splat_volume.exceptions import ConfigError
from splat_volume.settings import common
from splat_volume.utils import (
    get_loss_weights,
    get_mesh_config,
    get_model_preset,
    get_render_config,
    get_setting_dict,
    get_train_preset,
)


@ddt.ddt
class TestUtils(unittest.TestCase):
    """
    Test utils
    """

    @patch.object(settings, "SPLAT_VOLUME_RENDER_CONFIG", {"tile_size": 8, "bogus": 1})
    @patch("splat_volume.utils.log")
    def test_get_setting_dict_ignores_unknown_keys(self, mock_log):
        values = get_setting_dict("SPLAT_VOLUME_RENDER_CONFIG", common.RENDER_CONFIG)

        self.assertEqual(values["tile_size"], 8)
        self.assertNotIn("bogus", values)
        self.assertEqual(values["near_plane"], common.RENDER_CONFIG["near_plane"])
        mock_log.error.assert_called_once()

    @patch.object(settings, "SPLAT_VOLUME_RENDER_CONFIG", None)
    def test_get_setting_dict_missing_setting(self):
        self.assertEqual(get_setting_dict("SPLAT_VOLUME_RENDER_CONFIG", common.RENDER_CONFIG), common.RENDER_CONFIG)

    def test_get_render_config_overrides(self):
        config = get_render_config(min_transmittance=0.0)

        self.assertEqual(config.min_transmittance, 0.0)
        self.assertEqual(config.tile_size, common.RENDER_CONFIG["tile_size"])

    @ddt.data(
        ("tile_size", 8),
        ("near_plane", 0.5),
        ("background", [0.0, 0.0, 0.0]),
    )
    @ddt.unpack
    def test_get_render_config_each_key(self, key, value):
        config = get_render_config(**{key: value})

        self.assertEqual(getattr(config, key), value)

    def test_get_render_config_unknown_override(self):
        with self.assertRaises(ConfigError):
            get_render_config(tile=4)

    def test_get_mesh_config_skips_none(self):
        config = get_mesh_config(resolution=32, focal=None)

        self.assertEqual(config.resolution, 32)
        self.assertEqual(config.focal, common.MESH_CONFIG["focal"])

    @patch.object(settings, "SPLAT_VOLUME_LOSS_WEIGHTS", {"gamma_d": 10.0})
    def test_get_loss_weights(self):
        weights = get_loss_weights(reg_enabled=False, reg_start_epoch=2, gamma_n=0.5)

        self.assertEqual(weights.gamma_d, 10.0)
        self.assertEqual(weights.gamma_n, 0.5)
        self.assertFalse(weights.reg_enabled)
        self.assertEqual(weights.reg_start_epoch, 2)

    def test_get_loss_weights_negative(self):
        with self.assertRaises(ConfigError):
            get_loss_weights(gamma_d=-1.0)

    def test_get_model_preset(self):
        preset = get_model_preset("desk")
        preset["K"] = 99

        self.assertEqual(get_model_preset("desk")["K"], common.MODEL_PRESETS["desk"]["K"])
        with self.assertRaises(ConfigError):
            get_model_preset("huge")

    def test_get_train_preset(self):
        self.assertEqual(get_train_preset("full_fast")["epochs"], 30)
        self.assertEqual(get_train_preset("unknown"), get_train_preset("desk"))
