"""
On-disk formats: PNG and PFM images, camera JSON, primitive dumps, meshes and metric logs.
"""
import json
import logging
import os
import struct

import numpy as np
from PIL import Image
from plyfile import PlyData, PlyElement

from splat_volume.exceptions import ConfigError, DatasetError, GeometryError, RenderError
from splat_volume.geometry import Camera
from splat_volume.serializers import CameraSerializer, validated
from splat_volume.splat_render.primitives import SplatSet

log = logging.getLogger(__name__)

PRIMITIVE_MAGIC = b"LARA-GS1"
_PRIMITIVE_HEADER = struct.Struct("<8sIIi")


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        log.error(f"Unable to create directory {path}: {e}")
        raise DatasetError(f"Unable to create directory {path}: {e}") from e
    return path


def write_png(path, image, alpha=None):
    """Write an (H, W, 3) image in [0, 1] as 8-bit RGB, or RGBA when ``alpha`` is given."""
    image = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if alpha is not None:
        image = np.concatenate([image, np.clip(np.asarray(alpha, dtype=np.float64), 0.0, 1.0)[..., None]], axis=-1)
    pixels = np.round(image * 255.0).astype(np.uint8)
    Image.fromarray(pixels, mode="RGBA" if alpha is not None else "RGB").save(path, format="PNG")


def read_png(path):
    """Return ``(rgb, alpha)`` as float arrays in [0, 1]; alpha is all ones for RGB files."""
    with Image.open(path) as handle:
        pixels = np.asarray(handle.convert("RGBA"), dtype=np.float64) / 255.0
    return pixels[..., :3], pixels[..., 3]


def write_pfm(path, data):
    """
    Write a float map as little-endian PFM (``Pf`` for one channel, ``PF`` for three).

    Rows are stored bottom-up as the format requires.
    """
    data = np.asarray(data, dtype="<f4")
    if data.ndim == 2:
        header = "Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = "PF"
    else:
        raise ValueError(f"PFM holds (H, W) or (H, W, 3) maps, got {data.shape}")
    height, width = data.shape[:2]
    with open(path, "wb") as handle:
        handle.write(f"{header}\n{width} {height}\n-1.0\n".encode("ascii"))
        handle.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path):
    with open(path, "rb") as handle:
        header = handle.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise DatasetError(f"{path} is not a PFM file")
        width, height = (int(value) for value in handle.readline().split())
        scale = float(handle.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        channels = 1 if header == b"Pf" else 3
        data = np.frombuffer(handle.read(), dtype=dtype)
    if data.size != width * height * channels:
        raise DatasetError(f"{path} is truncated: expected {width * height * channels} floats, got {data.size}")
    shape = (height, width) if channels == 1 else (height, width, 3)
    return data.reshape(shape)[::-1].astype(np.float64)


def view_file_names(index):
    """``(image_path, depth_path)`` of view ``index``, relative to its scene directory."""
    return f"rgb_{index:03d}.png", f"depth_{index:03d}.pfm"


def write_cameras(path, cams, with_depth=True):
    """
    Write ``cameras.json``: a JSON array with one ``{K, w2c, width, height,
    image_path, depth_path}`` object per view, paths relative to the file.
    """
    entries = []
    for index, cam in enumerate(cams):
        image_path, depth_path = view_file_names(index)
        entry = {**cam.to_dict(), "image_path": image_path}
        if with_depth:
            entry["depth_path"] = depth_path
        entries.append(entry)
    with open(path, "w") as handle:
        json.dump(entries, handle, indent=2, sort_keys=True)


def read_cameras(path):
    """Return ``(cameras, entries)``; each entry is the validated view object with its paths."""
    try:
        with open(path) as handle:
            payload = json.load(handle)
    except (OSError, ValueError) as e:
        log.error(f"Unable to read cameras from {path}: {e}")
        raise DatasetError(f"Unable to read cameras from {path}: {e}") from e
    if not isinstance(payload, list):
        log.error(f"Invalid cameras in {path}: expected a JSON array of views")
        raise DatasetError(f"Invalid cameras in {path}: expected a JSON array of views, got {type(payload).__name__}")
    try:
        entries = [
            validated(CameraSerializer, data, source=f"camera {index} of {path}")
            for index, data in enumerate(payload)
        ]
        cams = [Camera.from_dict(entry) for entry in entries]
    except (ConfigError, GeometryError) as e:
        log.error(f"Invalid cameras in {path}: {e}")
        raise DatasetError(f"Invalid cameras in {path}: {e}") from e
    return cams, entries


def write_primitives(path, splats):
    """
    Binary primitive dump: an 8-byte magic, count, SH order and coefficient
    count, then per primitive ``p(3) q(4) s(2) alpha(1) sh(3·n)`` as
    little-endian float32.
    """
    arrays = splats.arrays()
    count = len(splats)
    coefficients = arrays["sh"].shape[-1] if count else 0
    records = np.concatenate(
        [
            arrays["p"].reshape(count, 3),
            arrays["q"].reshape(count, 4),
            arrays["s"].reshape(count, 2),
            arrays["alpha"].reshape(count, 1),
            arrays["sh"].reshape(count, -1),
        ],
        axis=1,
    )
    with open(path, "wb") as handle:
        handle.write(_PRIMITIVE_HEADER.pack(PRIMITIVE_MAGIC, count, splats.sh_order, coefficients))
        handle.write(records.astype("<f4").tobytes())
    log.info(f"Wrote {count} primitives to {path}")


def read_primitives(path):
    try:
        with open(path, "rb") as handle:
            raw = handle.read()
    except OSError as e:
        log.error(f"Unable to read primitives from {path}: {e}")
        raise RenderError(f"Unable to read primitives from {path}: {e}") from e
    if len(raw) < _PRIMITIVE_HEADER.size:
        raise RenderError(f"{path} is too short to be a primitive dump")
    magic, count, sh_order, coefficients = _PRIMITIVE_HEADER.unpack_from(raw)
    if magic != PRIMITIVE_MAGIC:
        raise RenderError(f"{path} is not a primitive dump (magic {magic!r})")
    width = 10 + 3 * coefficients
    body = np.frombuffer(raw, dtype="<f4", offset=_PRIMITIVE_HEADER.size)
    if body.size != count * width:
        raise RenderError(f"{path} is truncated: expected {count} records of {width} floats")
    records = body.reshape(count, width).astype(np.float64)
    return SplatSet(
        records[:, 0:3],
        records[:, 3:7],
        records[:, 7:9],
        records[:, 9],
        records[:, 10:].reshape(count, 3, coefficients),
        sh_order=sh_order,
    )


def write_ply(path, mesh):
    """ASCII PLY with per-vertex 8-bit color."""
    vertices = np.empty(
        len(mesh.vertices),
        dtype=[("x", "f4"), ("y", "f4"), ("z", "f4"), ("red", "u1"), ("green", "u1"), ("blue", "u1")],
    )
    for axis, name in enumerate("xyz"):
        vertices[name] = mesh.vertices[:, axis]
    colors = np.round(np.clip(mesh.colors, 0.0, 1.0) * 255.0).astype(np.uint8)
    for channel, name in enumerate(("red", "green", "blue")):
        vertices[name] = colors[:, channel]
    faces = np.empty(len(mesh.faces), dtype=[("vertex_indices", "i4", (3,))])
    faces["vertex_indices"] = mesh.faces
    PlyData(
        [PlyElement.describe(vertices, "vertex"), PlyElement.describe(faces, "face")],
        text=True,
    ).write(path)
    log.info(f"Wrote mesh with {len(mesh.vertices)} vertices to {path}")


def read_ply(path):
    """Return ``(vertices, colors, faces)`` arrays from a PLY written by :func:`write_ply`."""
    data = PlyData.read(path)
    vertex = data["vertex"]
    vertices = np.stack([vertex["x"], vertex["y"], vertex["z"]], axis=-1).astype(np.float64)
    colors = np.stack([vertex["red"], vertex["green"], vertex["blue"]], axis=-1) / 255.0
    faces = np.array([list(face) for face in data["face"]["vertex_indices"]], dtype=np.int64).reshape(-1, 3)
    return vertices, colors, faces


def write_obj(path, mesh):
    """Wavefront OBJ without color; face indices are 1-based."""
    with open(path, "w") as handle:
        for x, y, z in mesh.vertices:
            handle.write(f"v {x:.6f} {y:.6f} {z:.6f}\n")
        for a, b, c in mesh.faces + 1:
            handle.write(f"f {a} {b} {c}\n")


def append_jsonl(path, record):
    with open(path, "a") as handle:
        handle.write(json.dumps(record, sort_keys=True) + "\n")


def read_jsonl(path):
    with open(path) as handle:
        return [json.loads(line) for line in handle if line.strip()]


def write_json(path, payload):
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)


def read_json(path):
    with open(path) as handle:
        return json.load(handle)
