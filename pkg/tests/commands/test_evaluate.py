"""
Tests for the evaluate management command.
"""
from unittest.mock import MagicMock, patch

import django.core.management.base
import pytest
from django.core.management import call_command

from splat_volume.formats import read_json
from splat_volume.losses_metrics import METRIC_KEYS

RECORD = {"psnr": 25.0, "ssim": 0.8, "depth_abs": 0.02, "acc_005": 40.0, "acc_01": 60.0, "acc_02": 80.0}


def test_evaluate(tiny_checkpoint, tiny_dataset, tmp_path, caplog):
    out = str(tmp_path / "metrics.json")
    call_command("evaluate", checkpoint=tiny_checkpoint, dataset=tiny_dataset, out=out, split="all", coarse_only=True)

    report = read_json(out)
    assert report["split"] == "all"
    assert report["coarse_only"] is True
    assert sorted(report["scenes"]) == ["0000", "0001"]
    assert tuple(report["mean"]) == METRIC_KEYS
    assert "Completed evaluation of 2 scenes" in caplog.text


@patch("splat_volume.management.commands.evaluate.evaluate_scene")
def test_evaluate_async(mock_evaluate_scene, tiny_checkpoint, tiny_dataset, tmp_path):
    mock_evaluate_scene.delay.return_value = MagicMock(**{"get.return_value": RECORD})
    out = str(tmp_path / "metrics.json")
    call_command("evaluate", checkpoint=tiny_checkpoint, dataset=tiny_dataset, out=out, split="all",
                 use_async=True, seed=2)

    assert mock_evaluate_scene.delay.call_count == 2
    mock_evaluate_scene.delay.assert_called_with(tiny_checkpoint, tiny_dataset, "0001", 2, False, None)
    assert read_json(out)["mean"]["psnr"] == 25.0


@patch("splat_volume.management.commands.evaluate.evaluate_scene")
def test_evaluate_async_bad_record(mock_evaluate_scene, tiny_checkpoint, tiny_dataset, tmp_path):
    mock_evaluate_scene.delay.return_value = MagicMock(**{"get.return_value": {"psnr": "lots"}})
    with pytest.raises(django.core.management.base.CommandError) as error:
        call_command("evaluate", checkpoint=tiny_checkpoint, dataset=tiny_dataset, out=str(tmp_path / "m.json"),
                     use_async=True)
    assert "metrics of scene" in str(error.value)


@pytest.mark.parametrize("options,message", [
    ({"config": "desk"}, "does not match the model config"),
    ({"split": "validation"}, "validation"),
])
def test_evaluate_invalid(options, message, tiny_checkpoint, tiny_dataset, tmp_path):
    with pytest.raises(django.core.management.base.CommandError) as error:
        call_command("evaluate", checkpoint=tiny_checkpoint, dataset=tiny_dataset, out=str(tmp_path / "m.json"),
                     **options)
    assert message in str(error.value)


def test_evaluate_missing_checkpoint(tiny_dataset, tmp_path):
    with pytest.raises(django.core.management.base.CommandError):
        call_command("evaluate", checkpoint=str(tmp_path / "none.ckpt"), dataset=tiny_dataset,
                     out=str(tmp_path / "m.json"))
