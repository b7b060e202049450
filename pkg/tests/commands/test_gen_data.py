"""
Tests for the gen_data management command.
"""
import os
from unittest.mock import patch

import django.core.management.base
import pytest
from django.core.management import call_command
from django.test import override_settings

from test_utils.helpers import TINY_DATASET


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
def test_gen_data(tmp_path, caplog):
    out = str(tmp_path / "data")
    call_command("gen_data", out=out, scenes=2, seed=4, views=3, image_size=8)

    assert os.path.exists(os.path.join(out, "dataset.json"))
    assert os.path.exists(os.path.join(out, "scenes", "0001", "rgb_002.png"))
    assert not os.path.exists(os.path.join(out, "scenes", "0001", "rgb_003.png"))
    assert f"Completed dataset of 2 scenes in {out}" in caplog.text


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
@patch("splat_volume.management.commands.gen_data.generate_scene")
def test_gen_data_async(mock_generate_scene, tmp_path, caplog):
    out = str(tmp_path / "data")
    call_command("gen_data", out=out, scenes=3, use_async=True)

    assert mock_generate_scene.delay.call_count == 3
    mock_generate_scene.delay.assert_called_with(out, 2, 0, dict(TINY_DATASET))
    assert f"Queued 3 scenes for generation into {out}" in caplog.text


@pytest.mark.parametrize("options,message", [
    ({"scenes": 0}, "'scenes' must be greater than 0!"),
    ({"scenes": 2, "views": 0}, "'views' must be greater than 0!"),
])
def test_gen_data_invalid(options, message, tmp_path, caplog):
    with pytest.raises(django.core.management.base.CommandError) as error:
        call_command("gen_data", out=str(tmp_path), **options)
    assert message in str(error.value)
    assert message in caplog.text


def test_gen_data_requires_out():
    with pytest.raises(django.core.management.base.CommandError):
        call_command("gen_data", scenes=1)
