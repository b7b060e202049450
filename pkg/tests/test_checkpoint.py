"""
Tests for the LARA1 checkpoint format.
"""
import json
import struct

import numpy as np
import pytest

from splat_volume.exceptions import CheckpointError
from splat_volume.numerics.checkpoint import MAGIC, check_config, config_differences, load_checkpoint, save_checkpoint


def test_save_and_load(tmp_path):
    path = str(tmp_path / "model.ckpt")
    tensors = {
        "b.bias": np.arange(3, dtype=np.float32),
        "a.weight": np.arange(12, dtype=np.float64).reshape(3, 4),
    }
    save_checkpoint(path, tensors, {"step": 7})

    loaded, metadata = load_checkpoint(path)
    assert metadata == {"step": 7}
    assert loaded["b.bias"].dtype == np.float32
    np.testing.assert_array_equal(loaded["a.weight"], tensors["a.weight"])


def test_header_layout(tmp_path):
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(path, {"w": np.ones((2, 2))})
    payload = (tmp_path / "model.ckpt").read_bytes()
    assert payload.startswith(b"LARA1")
    (length,) = struct.unpack("<Q", payload[len(MAGIC):len(MAGIC) + 8])
    header = json.loads(payload[len(MAGIC) + 8:len(MAGIC) + 8 + length])
    assert header["tensors"]["w"] == {"shape": [2, 2], "dtype": "<f8", "offset": 0, "nbytes": 32}
    assert not (tmp_path / "model.ckpt.tmp").exists()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOPE" + b"\0" * 16)
    with pytest.raises(CheckpointError):
        load_checkpoint(str(path))


def test_truncated_tensor(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(str(path), {"w": np.ones(16)})
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(CheckpointError) as error:
        load_checkpoint(str(path))
    assert "w" in str(error.value)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "missing.ckpt"))


def test_config_mismatch_lists_fields():
    saved = {"W_e": 8, "G": 4, "K": 2}
    requested = {"W_e": 16, "G": 4, "K": 1}
    assert len(config_differences(saved, requested)) == 2
    with pytest.raises(CheckpointError) as error:
        check_config(saved, requested)
    assert "W_e" in str(error.value)
    assert "K" in str(error.value)
    check_config(saved, dict(saved))
