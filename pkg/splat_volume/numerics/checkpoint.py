"""
The ``LARA1`` parameter checkpoint format.

Layout::

    b"LARA1"
    uint64 little-endian: header length in bytes
    header: UTF-8 JSON, sorted keys
        {"tensors": {name: {"shape", "dtype", "offset", "nbytes"}}, "metadata": {...}}
    raw little-endian arrays, concatenated in sorted-name order; offsets are
    relative to the first byte after the header
"""
import json
import logging
import os
import struct

import numpy as np

from splat_volume.exceptions import CheckpointError

log = logging.getLogger(__name__)

MAGIC = b"LARA1"


def save_checkpoint(path, tensors, metadata=None):
    """
    Write ``tensors`` (name -> array) and JSON-serializable ``metadata`` to ``path``.

    The file is written next to its destination and moved into place, so an
    existing checkpoint is never left half-written.
    """
    entries = {}
    blobs = []
    offset = 0
    for name in sorted(tensors):
        array = np.asarray(tensors[name])
        array = array.astype(array.dtype.newbyteorder("<"), copy=False)
        blob = np.ascontiguousarray(array).tobytes()
        entries[name] = {
            "shape": list(array.shape),
            "dtype": array.dtype.str,
            "offset": offset,
            "nbytes": len(blob),
        }
        blobs.append(blob)
        offset += len(blob)

    header = json.dumps({"tensors": entries, "metadata": metadata or {}}, sort_keys=True).encode("utf-8")
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<Q", len(header)))
        handle.write(header)
        for blob in blobs:
            handle.write(blob)
    os.replace(tmp_path, path)
    log.info(f"Wrote checkpoint {path} with {len(entries)} tensors ({offset} bytes)")


def load_checkpoint(path):
    """
    Return ``(tensors, metadata)`` from a ``LARA1`` file.
    """
    try:
        with open(path, "rb") as handle:
            payload = handle.read()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e

    if not payload.startswith(MAGIC):
        raise CheckpointError(f"{path} is not a LARA1 checkpoint (bad magic {payload[:len(MAGIC)]!r})")
    start = len(MAGIC) + 8
    if len(payload) < start:
        raise CheckpointError(f"{path} is truncated before the header length")
    (header_length,) = struct.unpack("<Q", payload[len(MAGIC):start])
    try:
        header = json.loads(payload[start:start + header_length].decode("utf-8"))
    except ValueError as e:
        raise CheckpointError(f"{path} has a malformed header: {e}") from e

    data_start = start + header_length
    tensors = {}
    for name, entry in header.get("tensors", {}).items():
        begin = data_start + entry["offset"]
        end = begin + entry["nbytes"]
        if end > len(payload):
            raise CheckpointError(f"{path} is truncated inside tensor {name}")
        array = np.frombuffer(payload[begin:end], dtype=np.dtype(entry["dtype"]))
        tensors[name] = array.reshape(entry["shape"]).copy()
    return tensors, header.get("metadata", {})


def config_differences(saved, requested):
    """List ``field: saved != requested`` strings for every differing key."""
    differences = []
    for key in sorted(set(saved) | set(requested)):
        if saved.get(key) != requested.get(key):
            differences.append(f"{key}: checkpoint={saved.get(key)!r} requested={requested.get(key)!r}")
    return differences


def check_config(saved, requested):
    """Raise CheckpointError naming every field on which two model configs differ."""
    differences = config_differences(saved, requested)
    if differences:
        message = "Checkpoint does not match the model config: " + "; ".join(differences)
        log.error(message)
        raise CheckpointError(message)
