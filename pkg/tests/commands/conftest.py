"""
Fixtures shared by the management command tests.
"""
import numpy as np
import pytest
from django.test import override_settings

from splat_volume.formats import write_primitives
from splat_volume.numerics.checkpoint import save_checkpoint
from splat_volume.pipeline.dataset import gen_dataset
from splat_volume.pipeline.model import ReconstructionModel, model_tensors
from test_utils.helpers import TINY_DATASET, TINY_MODEL, random_splats

SMALL_MESH = {"resolution": 16, "truncation": 0.1, "image_size": 16, "focal": 18.0, "views_per_ring": 4}


@pytest.fixture
def tiny_dataset(tmp_path):
    root = str(tmp_path / "data")
    with override_settings(SPLAT_VOLUME_DATASET_CONFIG=TINY_DATASET):
        gen_dataset(root, 2, seed=1)
    return root


@pytest.fixture
def tiny_checkpoint(tmp_path):
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(path, model_tensors(ReconstructionModel(TINY_MODEL, seed=0)), {"model_config": TINY_MODEL})
    return path


@pytest.fixture
def primitives_file(tmp_path):
    path = str(tmp_path / "primitives.bin")
    write_primitives(path, random_splats(np.random.default_rng(0), 4))
    return path


@pytest.fixture
def small_mesh_settings():
    with override_settings(SPLAT_VOLUME_MESH_CONFIG=SMALL_MESH):
        yield SMALL_MESH
