"""
Tests for the train management command.
"""
import os
from unittest.mock import patch

import django.core.management.base
import pytest
import yaml
from django.core.management import call_command

from splat_volume.exceptions import NonFiniteLossError
from test_utils.helpers import TINY_MODEL, TINY_TRAIN


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump({"model": TINY_MODEL, "train": TINY_TRAIN}))
    return str(path)


def test_train_one_step(tiny_dataset, tiny_config, tmp_path, caplog):
    out = str(tmp_path / "run")
    call_command("train", dataset=tiny_dataset, out=out, config=tiny_config, max_steps=1, deterministic=True)

    assert os.path.exists(os.path.join(out, "checkpoint.ckpt"))
    assert os.path.exists(os.path.join(out, "metrics.jsonl"))
    assert f"Training finished, checkpoint at {os.path.join(out, 'checkpoint.ckpt')}" in caplog.text


@patch("splat_volume.management.commands.train.Trainer")
def test_train_options(mock_trainer, tiny_config, tmp_path):
    call_command("train", dataset="data", out=str(tmp_path), config=tiny_config, seed=9, no_reg=True)

    args, kwargs = mock_trainer.call_args
    model_config, train_config = args[1], args[2]
    assert model_config == TINY_MODEL
    assert train_config["seed"] == 9
    assert train_config["reg_enabled"] is False
    assert kwargs == {"deterministic": False, "resume": None}
    mock_trainer.return_value.run.assert_called_once_with(None)


@patch("splat_volume.management.commands.train.Trainer")
def test_train_non_finite_loss(mock_trainer, tiny_config, tmp_path, caplog):
    mock_trainer.return_value.checkpoint_path = "run/checkpoint.ckpt"
    mock_trainer.return_value.run.side_effect = NonFiniteLossError("Non-finite loss nan at step 3", "0001", 3)

    with pytest.raises(django.core.management.base.CommandError) as error:
        call_command("train", dataset="data", out=str(tmp_path), config=tiny_config)

    assert "(scene 0001); last good checkpoint is run/checkpoint.ckpt" in str(error.value)
    assert "Non-finite loss nan at step 3" in caplog.text


def test_train_missing_dataset(tiny_config, tmp_path, caplog):
    with pytest.raises(django.core.management.base.CommandError):
        call_command("train", dataset=str(tmp_path / "nothing"), out=str(tmp_path / "run"), config=tiny_config)
    assert "No dataset found" in caplog.text


@pytest.mark.parametrize("options,message", [
    ({"max_steps": 0}, "'max-steps' must be greater than 0!"),
    ({"config": "enormous"}, "Unknown model preset 'enormous'"),
])
def test_train_invalid(options, message, tmp_path):
    with pytest.raises(django.core.management.base.CommandError) as error:
        call_command("train", dataset="data", out=str(tmp_path), **options)
    assert message in str(error.value)
