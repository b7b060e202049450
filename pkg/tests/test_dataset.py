"""
Tests for procedural dataset generation and loading.
"""
import os
from unittest.mock import Mock

import numpy as np
import pytest
from django.test import override_settings

from splat_volume.exceptions import DatasetError
from splat_volume.formats import read_json, write_json
from splat_volume.pipeline.dataset import (
    Dataset,
    gen_dataset,
    generate_scene,
    orbit_cameras,
    scene_id_for,
    scene_rng,
    split_scenes,
)
from test_utils.helpers import TINY_DATASET


def scene_files(root):
    files = {}
    for directory, _, names in os.walk(root):
        for name in names:
            path = os.path.join(directory, name)
            with open(path, "rb") as handle:
                files[os.path.relpath(path, root)] = handle.read()
    return files


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
def test_generation_is_deterministic(tmp_path):
    gen_dataset(str(tmp_path / "first"), 2, seed=11)
    gen_dataset(str(tmp_path / "second"), 2, seed=11)
    first = scene_files(str(tmp_path / "first"))
    assert first == scene_files(str(tmp_path / "second"))
    assert "scenes/0001/rgb_003.png" in first
    assert "scenes/0001/depth_003.pfm" in first
    assert "scenes/0000/cameras.json" in first
    assert "scenes/0000/scene.json" in first


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
def test_scenes_are_independent_of_the_run(tmp_path):
    gen_dataset(str(tmp_path / "all"), 3, seed=5)
    generate_scene(str(tmp_path / "one"), 2, 5, dict(TINY_DATASET))
    everything = scene_files(str(tmp_path / "all" / "scenes" / "0002"))
    assert everything == scene_files(str(tmp_path / "one" / "scenes" / "0002"))


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
def test_load_scene(tmp_path):
    root = str(tmp_path)
    gen_dataset(root, 4, seed=0)
    dataset = Dataset(root)
    assert len(dataset.scene_ids("train")) == 2
    assert len(dataset.scene_ids("held_out")) == 2
    assert dataset.scene_ids("all") == ["0000", "0001", "0002", "0003"]

    sample = dataset.load("0001")
    assert sample.scene_id == "0001"
    assert sample.images.shape == (4, 16, 16, 3)
    assert sample.alphas.shape == (4, 16, 16)
    assert sample.depths.shape == (4, 16, 16)
    assert len(sample.cameras) == 4
    assert sample.scene.scene_id == "0001"
    # Depth is zero exactly where the coverage mask is.
    np.testing.assert_array_equal(sample.depths == 0, sample.alphas == 0)
    assert read_json(os.path.join(root, "dataset.json"))["num_scenes"] == 4


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
def test_views_and_size_overrides(tmp_path):
    gen_dataset(str(tmp_path), 1, views=2, image_size=8)
    sample = Dataset(str(tmp_path)).load("0000")
    assert sample.images.shape == (2, 8, 8, 3)


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
def test_custom_scene_runner(tmp_path):
    runner = Mock()
    gen_dataset(str(tmp_path), 3, seed=2, scene_runner=runner)
    assert runner.call_count == 3
    runner.assert_called_with(str(tmp_path), 2, 2, dict(TINY_DATASET))
    assert os.path.exists(tmp_path / "splits.json")


def test_needs_a_scene(tmp_path):
    with pytest.raises(DatasetError):
        gen_dataset(str(tmp_path), 0)


def test_missing_dataset(tmp_path):
    with pytest.raises(DatasetError):
        Dataset(str(tmp_path))


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
def test_views_are_found_through_camera_paths(tmp_path):
    gen_dataset(str(tmp_path), 1)
    directory = tmp_path / "scenes" / "0000"
    expected = Dataset(str(tmp_path)).load("0000")
    os.rename(directory / "rgb_001.png", directory / "view_b.png")
    os.rename(directory / "depth_001.pfm", directory / "view_b_depth.pfm")
    entries = read_json(str(directory / "cameras.json"))
    entries[1]["image_path"] = "view_b.png"
    entries[1]["depth_path"] = "view_b_depth.pfm"
    del entries[2]["depth_path"]
    write_json(str(directory / "cameras.json"), entries)

    sample = Dataset(str(tmp_path)).load("0000")

    np.testing.assert_array_equal(sample.images[1], expected.images[1])
    np.testing.assert_array_equal(sample.depths[1], expected.depths[1])
    np.testing.assert_array_equal(sample.depths[2], np.zeros((16, 16)))


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
def test_missing_view(tmp_path):
    gen_dataset(str(tmp_path), 1)
    os.remove(tmp_path / "scenes" / "0000" / "rgb_002.png")
    with pytest.raises(DatasetError):
        Dataset(str(tmp_path)).load("0000")


@override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET)
def test_unknown_split(tmp_path):
    gen_dataset(str(tmp_path), 1)
    with pytest.raises(DatasetError):
        Dataset(str(tmp_path)).scene_ids("validation")


def test_split_keeps_a_training_scene():
    splits = split_scenes(["0000", "0001"], 0.9, seed=0)
    assert len(splits["train"]) == 1
    assert split_scenes(["a", "b", "c", "d"], 0.5, 3) == split_scenes(["d", "c", "b", "a"], 0.5, 3)


def test_orbit_cameras_look_at_the_origin():
    cams = orbit_cameras(scene_rng(0, 0), TINY_DATASET)
    assert len(cams) == 4
    for cam in cams:
        assert np.linalg.norm(cam.center) == pytest.approx(2.0)
        assert cam.center[2] > 0
        np.testing.assert_allclose(cam.forward, -cam.center / 2.0, atol=1e-12)
    assert scene_id_for(7) == "0007"
