"""
Helper functions for tests
"""
from collections import namedtuple

import numpy as np

from splat_volume.geometry import Camera, intrinsics, look_at
from splat_volume.pipeline.gradients import random_camera, random_splats  # noqa: F401
from splat_volume.pipeline.scenes import CheckerTexture, Scene, Sphere
from splat_volume.splat_render.primitives import SplatSet
from splat_volume.splat_render.rasterizer import RayIntersections

TINY_MODEL = {
    "M": 2, "patch": 8, "O": 8, "C": 8, "B": 8,
    "W_f": 2, "W_e": 2, "G": 2, "layers": 1, "heads": 2,
    "mlp_ratio": 2, "K": 1, "r": 1.0 / 8.0, "sh_order": 2,
    "image_size": 16, "encoder_blocks": 1, "decoder_hidden": 8,
}

TINY_TRAIN = {
    "lr": 1e-3,
    "lr_min": 0.0,
    "epochs": 2,
    "steps_per_epoch": 2,
    "batch_size": 1,
    "grad_accumulation": 1,
    "reg_enabled": True,
    "reg_start_epoch": 1,
    "period_epochs": None,
    "weight_decay": 0.0,
    "betas": [0.9, 0.999],
    "seed": 0,
    "validate_every": 2,
    "precision": "float64",
}

TINY_DATASET = {
    "views_per_scene": 4,
    "image_size": 16,
    "orbit_radius": 2.0,
    "focal": 20.0,
    "elevation_range": [10.0, 40.0],
    "elevation_jitter": 5.0,
    "held_out_fraction": 0.5,
}

FakeHits = namedtuple("FakeHits", ["weights", "z", "normals"])


def identity_camera(width=128, height=128, focal=100.0):
    """
    Camera at the origin with the world and camera axes aligned (looking down +z).
    """
    return Camera(intrinsics(focal, width, height), np.eye(4), width, height)


def front_camera(distance=2.0, size=32, focal=40.0):
    """
    Camera on the +x axis looking at the origin.
    """
    return look_at((distance, 0.0, 0.0), (0.0, 0.0, 0.0), size, size, focal)


def facing_splat(cam, depth=1.5, scale=0.5, alpha=1.0, dc=(0.0, 0.0, 0.0)):
    """
    One surfel centred on the optical axis of ``cam``, its normal pointing back at the camera.
    """
    center = cam.center + depth * cam.forward
    # Rotation whose third column is the camera's forward axis.
    rotation = cam.R.T
    q = rotation_to_quaternion(rotation)
    sh = np.zeros((1, 3, 9))
    sh[0, :, 0] = dc
    return SplatSet(center[None], q[None], np.full((1, 2), scale), np.array([alpha]), sh)


def rotation_to_quaternion(rotation):
    """(w, x, y, z) of a proper rotation matrix."""
    m = np.asarray(rotation, dtype=np.float64)
    trace = np.trace(m)
    if trace > 0:
        s = 2.0 * np.sqrt(trace + 1.0)
        return np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
    i = int(np.argmax(np.diag(m)))
    j, k = (i + 1) % 3, (i + 2) % 3
    s = 2.0 * np.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k])
    q = np.zeros(4)
    q[0] = (m[k, j] - m[j, k]) / s
    q[1 + i] = 0.25 * s
    q[1 + j] = (m[j, i] + m[i, j]) / s
    q[1 + k] = (m[k, i] + m[i, k]) / s
    return q


def sphere_scene(radius=0.3, scene_id="sphere"):
    texture = CheckerTexture((0.8, 0.2, 0.2), (0.2, 0.2, 0.8), 6.0)
    return Scene([Sphere((0.0, 0.0, 0.0), radius, texture)], scene_id)


def hits_factory(weights, z, normals=None):
    """
    RayIntersections-like record for the loss functions, one ray per row.
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if normals is None:
        normals = np.zeros(weights.shape + (3,))
    return FakeHits(weights, z, np.asarray(normals, dtype=np.float64).reshape(weights.shape + (3,)))


def intersections_factory(weights, z, normals):
    """
    A full RayIntersections for a single 1×1 image.
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    length = weights.shape[1]
    return RayIntersections(
        np.arange(length)[None], np.ones((1, length), dtype=bool), z, np.ones_like(z), weights, weights,
        np.asarray(normals, dtype=np.float64).reshape(1, length, 3), np.ones_like(z), 1, 1,
    )


def ring_cameras(count=16, radius=2.0, size=16, focal=20.0, elevation=0.0):
    """
    ``count`` cameras evenly spaced in azimuth around the z axis, starting on +x.
    """
    cams = []
    for step in range(count):
        azimuth = 2.0 * np.pi * step / count
        el = np.radians(elevation)
        eye = radius * np.array([np.cos(el) * np.cos(azimuth), np.cos(el) * np.sin(azimuth), np.sin(el)])
        cams.append(look_at(eye, (0.0, 0.0, 0.0), size, size, focal))
    return cams
