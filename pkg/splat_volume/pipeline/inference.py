"""
Feed-forward inference: reconstruct a scene once, then render, mesh or evaluate it.
"""
import logging
import os
from collections import namedtuple

import numpy as np

from splat_volume import formats
from splat_volume.exceptions import DatasetError
from splat_volume.geometry import kmeans_cluster_cameras
from splat_volume.losses_metrics import aggregate_metrics, metrics_report
from splat_volume.meshing import extract_mesh, fuse_views, orbit_trajectory
from splat_volume.numerics import tensor as T
from splat_volume.serializers import MetricsReportSerializer, validated
from splat_volume.splat_render.rasterizer import rasterize
from splat_volume.toggles import fine_culling_enabled
from splat_volume.utils import get_mesh_config, get_render_config

log = logging.getLogger(__name__)

Reconstruction = namedtuple("Reconstruction", ["coarse", "fine", "inputs"])

TRAJECTORIES = ("orbit", "inputs")


def select_input_views(cams, M=4, seed=0):
    """
    Indices of ``M`` input views: the representatives of a k-means clustering
    of the camera centers, in ascending order. All views when ``M`` equals
    the camera count.
    """
    if M == len(cams):
        return list(range(len(cams)))
    result = kmeans_cluster_cameras(cams, M, seed=seed)
    return sorted(result.representatives)


def reconstruct_scene(model, images, cams, render_config=None, culling=None):
    """
    Run the network once on the posed ``images``; returns detached coarse and fine surfels.
    """
    culling = fine_culling_enabled() if culling is None else culling
    with T.no_grad():
        volume = model(np.asarray(images), cams)
        coarse, _, fine = model.decode(volume, np.asarray(images), cams, render_config, culling)
    return Reconstruction(coarse.detached(), fine.detached(), list(cams))


def reconstruct_sample(model, sample, seed=0, render_config=None, culling=None, num_inputs=None):
    """
    Reconstruct from ``num_inputs`` clustered views of ``sample``; the trained M by default.
    """
    num_inputs = num_inputs or model.config["M"]
    if num_inputs > len(sample.cameras):
        raise DatasetError(f"Scene {sample.scene_id} has {len(sample.cameras)} views, {num_inputs} inputs requested")
    inputs = select_input_views(sample.cameras, num_inputs, seed=seed)
    log.info(f"Now reconstructing scene {sample.scene_id} from views {inputs}")
    return reconstruct_scene(model, sample.images[inputs], [sample.cameras[i] for i in inputs], render_config,
                             culling), inputs


def render_buffers(splats, cams, render_config=None):
    """Render ``splats`` into each camera; yields numpy buffer dicts."""
    with T.no_grad():
        for cam in cams:
            yield rasterize(splats, cam, config=render_config).buffers.numpy()


def trajectory_cameras(name, sample_cams, mesh_config=None):
    """
    ``orbit``: the three-ring orbit used for meshing. ``inputs``: the scene's own cameras.
    """
    if name == "inputs":
        return list(sample_cams)
    if name == "orbit":
        config = mesh_config or get_mesh_config()
        return orbit_trajectory(
            config.elevations, config.views_per_ring, config.radius, width=config.image_size,
            height=config.image_size, focal=config.focal,
        )
    raise ValueError(f"Unknown trajectory {name!r}, expected one of {TRAJECTORIES}")


def write_renders(splats, cams, out_dir, render_config=None, normals=False):
    """Write ``rgb_###.png`` (RGBA) and ``depth_###.pfm`` per camera; returns the view count."""
    formats.ensure_dir(out_dir)
    count = 0
    log.info(f"Now rendering {len(cams)} views into {out_dir}")
    for index, buffers in enumerate(render_buffers(splats, cams, render_config)):
        image_path, depth_path = formats.view_file_names(index)
        formats.write_png(os.path.join(out_dir, image_path), buffers["rgb"], alpha=buffers["alpha"])
        formats.write_pfm(os.path.join(out_dir, depth_path), buffers["depth"])
        if normals:
            formats.write_pfm(os.path.join(out_dir, f"normal_{index:03d}.pfm"), buffers["normal"])
        count += 1
    formats.write_cameras(os.path.join(out_dir, "cameras.json"), cams)
    return count


def mesh_from_splats(splats, mesh_config=None, render_config=None):
    """Render the meshing orbit, fuse the RGB-D views and extract a textured mesh."""
    config = mesh_config or get_mesh_config()
    cams = trajectory_cameras("orbit", [], config)
    views = (
        (buffers["depth"], buffers["rgb"], buffers["alpha"], cam)
        for buffers, cam in zip(render_buffers(splats, cams, render_config), cams)
    )
    return extract_mesh(fuse_views(views, config))


def write_mesh(mesh, path):
    formats.ensure_dir(os.path.dirname(path) or ".")
    formats.write_ply(path, mesh)
    obj_path = os.path.splitext(path)[0] + ".obj"
    formats.write_obj(obj_path, mesh)
    return path


def evaluate_sample(model, sample, seed=0, coarse_only=False, render_config=None, culling=None, num_inputs=None):
    """
    Metrics of one scene: reconstruct from the selected inputs, render every
    other view and compare against ground truth within the gt alpha mask.
    """
    reconstruction, inputs = reconstruct_sample(model, sample, seed, render_config, culling, num_inputs)
    splats = reconstruction.coarse if coarse_only else reconstruction.fine
    targets = [index for index in range(len(sample.cameras)) if index not in inputs] or inputs
    records = []
    for index, buffers in zip(targets, render_buffers(splats, [sample.cameras[i] for i in targets], render_config)):
        records.append(metrics_report(
            buffers["rgb"], sample.images[index], buffers["depth"], sample.depths[index], sample.alphas[index] > 0.5,
        ))
    report = aggregate_metrics(records)
    log.info(f"Scene {sample.scene_id}: PSNR {report['psnr']:.2f} dB over {len(records)} held-out views")
    return report


def evaluate(model, dataset, split="held_out", seed=0, coarse_only=False, scene_runner=None, num_inputs=None):
    """
    Per-scene and mean metrics over ``split``.

    ``scene_runner(scene_id)`` may replace the in-process per-scene evaluation.
    """
    render_config = get_render_config()
    scene_ids = dataset.scene_ids(split)
    per_scene = {}
    for scene_id in scene_ids:
        if scene_runner is not None:
            per_scene[scene_id] = validated(
                MetricsReportSerializer, scene_runner(scene_id), source=f"metrics of scene {scene_id}"
            )
        else:
            per_scene[scene_id] = evaluate_sample(
                model, dataset.load(scene_id), seed, coarse_only, render_config, num_inputs=num_inputs,
            )
    return {
        "split": split,
        "coarse_only": bool(coarse_only),
        "scenes": per_scene,
        "mean": aggregate_metrics(list(per_scene.values())),
    }
