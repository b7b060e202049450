"""
Procedural multi-view datasets on disk.

Layout::

    <root>/dataset.json                    generator settings and seed
    <root>/splits.json                     {"train": [...], "held_out": [...]}
    <root>/scenes/<id>/cameras.json        JSON array of views: K, w2c, size, image and depth paths
    <root>/scenes/<id>/scene.json          the procedural scene description
    <root>/scenes/<id>/rgb_###.png         RGBA, alpha is the coverage mask
    <root>/scenes/<id>/depth_###.pfm       camera-space depth, 0 on background
"""
import logging
import math
import os
from collections import namedtuple

import numpy as np

from splat_volume import formats
from splat_volume.exceptions import DatasetError
from splat_volume.geometry import look_at
from splat_volume.pipeline.scenes import Scene, random_scene
from splat_volume.utils import get_dataset_config

log = logging.getLogger(__name__)

SceneSample = namedtuple("SceneSample", ["scene_id", "images", "alphas", "depths", "cameras", "scene"])

SCENES_DIR = "scenes"
SPLITS_FILE = "splits.json"
MANIFEST_FILE = "dataset.json"
CAMERAS_FILE = "cameras.json"
SCENE_FILE = "scene.json"
MIN_ELEVATION = 1.0


def scene_id_for(index):
    return f"{index:04d}"


def scene_rng(seed, index):
    """The generator stream of one scene, independent of every other scene."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def orbit_cameras(rng, config):
    """
    Evenly spaced azimuths around the z axis with a random phase, every view
    at a jittered elevation inside the upper hemisphere.
    """
    views = config["views_per_scene"]
    size = config["image_size"]
    low, high = config["elevation_range"]
    base = rng.uniform(low, high)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    cams = []
    for view in range(views):
        jitter = rng.uniform(-config["elevation_jitter"], config["elevation_jitter"])
        elevation = math.radians(min(max(base + jitter, MIN_ELEVATION), 89.0))
        azimuth = phase + 2.0 * math.pi * view / views
        eye = config["orbit_radius"] * np.array(
            [math.cos(elevation) * math.cos(azimuth), math.cos(elevation) * math.sin(azimuth), math.sin(elevation)]
        )
        cams.append(look_at(eye, np.zeros(3), size, size, config["focal"]))
    return cams


def generate_scene(root, index, seed, config=None):
    """Render and write one scene; returns its directory."""
    config = config or get_dataset_config()
    rng = scene_rng(seed, index)
    scene_id = scene_id_for(index)
    scene = random_scene(rng, scene_id)
    cams = orbit_cameras(rng, config)
    directory = formats.ensure_dir(os.path.join(root, SCENES_DIR, scene_id))
    log.info(f"Now rendering {len(cams)} views of scene {scene_id}")
    for view, cam in enumerate(cams):
        rendered = scene.trace(cam)
        image_path, depth_path = formats.view_file_names(view)
        formats.write_png(os.path.join(directory, image_path), rendered.rgb, alpha=rendered.alpha)
        formats.write_pfm(os.path.join(directory, depth_path), rendered.depth)
    formats.write_cameras(os.path.join(directory, CAMERAS_FILE), cams)
    formats.write_json(os.path.join(directory, SCENE_FILE), scene.to_dict())
    return directory


def split_scenes(scene_ids, held_out_fraction, seed):
    """Deterministic train / held-out split; keeps at least one training scene."""
    ids = sorted(scene_ids)
    order = np.random.default_rng(seed).permutation(len(ids))
    held = min(int(round(held_out_fraction * len(ids))), max(len(ids) - 1, 0))
    held_out = sorted(ids[i] for i in order[:held])
    return {"train": [i for i in ids if i not in held_out], "held_out": held_out}


def write_manifest(root, num_scenes, seed, config):
    formats.write_json(os.path.join(root, MANIFEST_FILE), {"num_scenes": num_scenes, "seed": seed, "config": config})
    ids = [scene_id_for(index) for index in range(num_scenes)]
    formats.write_json(os.path.join(root, SPLITS_FILE), split_scenes(ids, config["held_out_fraction"], seed))


def gen_dataset(root, num_scenes, seed=0, views=None, image_size=None, scene_runner=None):
    """
    Generate ``num_scenes`` procedural scenes under ``root``.

    ``scene_runner(root, index, seed, config)`` renders one scene; it defaults
    to :func:`generate_scene` and may instead queue the work.
    """
    if num_scenes < 1:
        raise DatasetError(f"Need at least one scene, got {num_scenes}")
    config = get_dataset_config()
    if views:
        config["views_per_scene"] = int(views)
    if image_size:
        config["image_size"] = int(image_size)
    formats.ensure_dir(os.path.join(root, SCENES_DIR))
    scene_runner = scene_runner or generate_scene
    for index in range(num_scenes):
        scene_runner(root, index, seed, config)
    write_manifest(root, num_scenes, seed, config)
    log.info(f"Completed dataset of {num_scenes} scenes in {root}")
    return root


class Dataset:
    """Read access to a generated dataset."""

    def __init__(self, root):
        self.root = root
        splits_path = os.path.join(root, SPLITS_FILE)
        if not os.path.exists(splits_path):
            log.error(f"No dataset found at {root}")
            raise DatasetError(f"No dataset found at {root}: missing {SPLITS_FILE}")
        self.splits = formats.read_json(splits_path)

    def scene_ids(self, split="train"):
        if split == "all":
            return sorted(self.splits["train"] + self.splits["held_out"])
        if split not in self.splits:
            raise DatasetError(f"Unknown split {split!r}, expected one of {sorted(self.splits)} or 'all'")
        return list(self.splits[split])

    def scene_dir(self, scene_id):
        return os.path.join(self.root, SCENES_DIR, scene_id)

    def load(self, scene_id):
        return load_scene(self.scene_dir(scene_id))


def load_scene(directory):
    """
    Load a scene through the image and depth paths of its ``cameras.json``.

    Views without a ``depth_path`` get an all-zero depth map.
    """
    cams, entries = formats.read_cameras(os.path.join(directory, CAMERAS_FILE))
    images, alphas, depths = [], [], []
    for view, (cam, entry) in enumerate(zip(cams, entries)):
        try:
            rgb, alpha = formats.read_png(os.path.join(directory, entry["image_path"]))
            if entry.get("depth_path"):
                depth = formats.read_pfm(os.path.join(directory, entry["depth_path"]))
            else:
                log.warning(f"Scene {directory} has no depth for view {view}")
                depth = np.zeros((cam.height, cam.width))
        except OSError as e:
            log.error(f"Scene {directory} is missing view {view}: {e}")
            raise DatasetError(f"Scene {directory} is missing view {view}: {e}") from e
        images.append(rgb)
        alphas.append(alpha)
        depths.append(depth)
    scene_path = os.path.join(directory, SCENE_FILE)
    scene = Scene.from_dict(formats.read_json(scene_path)) if os.path.exists(scene_path) else None
    return SceneSample(
        os.path.basename(os.path.normpath(directory)),
        np.stack(images),
        np.stack(alphas),
        np.stack(depths),
        cams,
        scene,
    )
