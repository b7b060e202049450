"""
Tests for the training loop.
"""
import math
import os
from unittest.mock import Mock, patch

import numpy as np
import pytest
from django.test import override_settings

from splat_volume.exceptions import CheckpointError, DatasetError, NonFiniteLossError
from splat_volume.formats import read_jsonl
from splat_volume.numerics.checkpoint import load_checkpoint
from splat_volume.pipeline.dataset import gen_dataset
from splat_volume.pipeline.training import CHECKPOINT_NAME, METRICS_NAME, Trainer, choose_views, train
from test_utils.helpers import TINY_DATASET, TINY_MODEL, TINY_TRAIN, ring_cameras


@pytest.fixture
def dataset_root(tmp_path):
    root = str(tmp_path / "data")
    with override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET):
        gen_dataset(root, 2, seed=3)
    return root


def test_choose_views():
    cams = ring_cameras(count=8)
    inputs, novel = choose_views(cams, 2, np.random.default_rng(0))
    assert len(inputs) == len(novel) == 2
    assert not set(inputs) & set(novel)
    assert inputs == sorted(inputs)


def test_choose_views_without_spare_views():
    inputs, novel = choose_views(ring_cameras(count=2), 2, np.random.default_rng(0))
    assert inputs == [0, 1]
    assert novel == []


def test_learning_rate_schedule(dataset_root, tmp_path):
    trainer = Trainer(dataset_root, TINY_MODEL, {**TINY_TRAIN, "lr_min": 1e-4}, str(tmp_path / "run"))
    assert trainer.total_steps == 4
    assert trainer.lr_at(0) == pytest.approx(1e-3)
    assert trainer.lr_at(2) == pytest.approx(0.5 * (1e-3 + 1e-4))
    assert trainer.epoch_of(3) == 1


def test_one_step(dataset_root, tmp_path):
    out_dir = str(tmp_path / "run")
    trainer = Trainer(dataset_root, TINY_MODEL, TINY_TRAIN, out_dir)
    before = trainer.model.state_dict()
    trainer.run(max_steps=1)

    assert trainer.step == 1
    assert os.path.exists(os.path.join(out_dir, CHECKPOINT_NAME))
    records = read_jsonl(os.path.join(out_dir, METRICS_NAME))
    assert [record["type"] for record in records] == ["train"]
    assert math.isfinite(records[0]["total"])
    after = trainer.model.state_dict()
    assert any(not np.array_equal(before[name], after[name]) for name in before)

    _, metadata = load_checkpoint(os.path.join(out_dir, CHECKPOINT_NAME))
    assert metadata["step"] == 1
    assert metadata["model_config"] == TINY_MODEL


def test_non_finite_loss_keeps_the_parameters(dataset_root, tmp_path):
    trainer = Trainer(dataset_root, TINY_MODEL, TINY_TRAIN, str(tmp_path / "run"))
    before = trainer.model.state_dict()
    breakdown = Mock(components={"total": float("nan")})
    with patch.object(Trainer, "scene_loss", return_value=breakdown):
        with pytest.raises(NonFiniteLossError) as error:
            trainer.run()
    assert error.value.step == 0
    assert error.value.scene_id in trainer.scene_ids
    for name, array in trainer.model.state_dict().items():
        np.testing.assert_array_equal(array, before[name])
    assert os.path.exists(trainer.checkpoint_path)


def test_needs_training_scenes(dataset_root, tmp_path):
    with patch("splat_volume.pipeline.training.Dataset.scene_ids", return_value=[]):
        with pytest.raises(DatasetError):
            Trainer(dataset_root, TINY_MODEL, TINY_TRAIN, str(tmp_path / "run"))


def test_resume_rejects_another_model(dataset_root, tmp_path):
    trainer = Trainer(dataset_root, TINY_MODEL, TINY_TRAIN, str(tmp_path / "run"))
    trainer.save()
    with pytest.raises(CheckpointError):
        Trainer(dataset_root, {**TINY_MODEL, "K": 2}, TINY_TRAIN, str(tmp_path / "other"),
                resume=trainer.checkpoint_path)


@pytest.mark.slow
def test_full_run_validates_and_saves_epochs(dataset_root, tmp_path):
    out_dir = str(tmp_path / "run")
    path = train(dataset_root, TINY_MODEL, TINY_TRAIN, out_dir, deterministic=True)
    assert path == os.path.join(out_dir, CHECKPOINT_NAME)
    records = read_jsonl(os.path.join(out_dir, METRICS_NAME))
    assert len([record for record in records if record["type"] == "train"]) == 4
    validation = [record for record in records if record["type"] == "validation"]
    assert [record["step"] for record in validation] == [2, 4]
    assert os.path.exists(os.path.join(out_dir, "epoch_000.ckpt"))
    assert os.path.exists(os.path.join(out_dir, "epoch_001.ckpt"))


@pytest.mark.slow
def test_resume_matches_an_uninterrupted_run(dataset_root, tmp_path):
    straight = Trainer(dataset_root, TINY_MODEL, TINY_TRAIN, str(tmp_path / "straight"), deterministic=True)
    straight.run(max_steps=2)

    first = Trainer(dataset_root, TINY_MODEL, TINY_TRAIN, str(tmp_path / "split"), deterministic=True)
    first.run(max_steps=1)
    first.save(str(tmp_path / "half.ckpt"))
    second = Trainer(dataset_root, TINY_MODEL, TINY_TRAIN, str(tmp_path / "split"), deterministic=True,
                     resume=str(tmp_path / "half.ckpt"))
    second.run(max_steps=1)

    assert second.step == straight.step == 2
    expected = straight.model.state_dict()
    for name, array in second.model.state_dict().items():
        np.testing.assert_array_equal(array, expected[name])
