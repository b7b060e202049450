"""
TSDF fusion of RGB-D views and textured mesh extraction.
"""
import logging
import math
from collections import namedtuple

import numpy as np
from scipy import ndimage
from skimage import measure

from splat_volume.exceptions import ConfigError
from splat_volume.geometry import look_at, project_point

log = logging.getLogger(__name__)

TriangleMesh = namedtuple("TriangleMesh", ["vertices", "colors", "faces"])


def empty_mesh():
    return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))


def orbit_trajectory(elevations, n_per_ring, radius, look_at_point=(0.0, 0.0, 0.0), width=128, height=128,
                     focal=140.0):
    """
    Cameras on rings of constant elevation (degrees) around ``look_at_point``.

    Azimuths are evenly spaced from 0; azimuth 0 at elevation 0 sits on the +x
    axis. Rings are emitted in the order given.
    """
    if radius <= 0:
        raise ConfigError(f"Orbit radius must be positive, got {radius}")
    target = np.asarray(look_at_point, dtype=np.float64)
    cams = []
    for elevation in elevations:
        el = math.radians(elevation)
        for step in range(n_per_ring):
            az = 2.0 * math.pi * step / n_per_ring
            eye = target + radius * np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
            cams.append(look_at(eye, target, width, height, focal))
    return cams


class TsdfVolume:
    """
    Truncated signed distances averaged over views on an R³ grid.

    ``tsdf`` holds values in [-1, 1] (distance / truncation, positive in front
    of the surface); ``weight`` counts the views that touched each voxel and
    ``rgb`` is the running color average.
    """

    def __init__(self, resolution, truncation, lo=(-0.5, -0.5, -0.5), hi=(0.5, 0.5, 0.5)):
        self.resolution = int(resolution)
        self.lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (3,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (3,)).copy()
        self.voxel_size = (self.hi - self.lo) / self.resolution
        if truncation <= self.voxel_size.max():
            raise ConfigError(f"Truncation {truncation} must exceed the voxel size {self.voxel_size.max():.5f}")
        self.truncation = float(truncation)
        shape = (self.resolution,) * 3
        self.tsdf = np.ones(shape)
        self.weight = np.zeros(shape)
        self.rgb = np.zeros(shape + (3,))

    def centers(self):
        axis = np.arange(self.resolution) + 0.5
        ii, jj, kk = np.meshgrid(axis, axis, axis, indexing="ij")
        return self.lo + np.stack([ii, jj, kk], axis=-1) * self.voxel_size

    @classmethod
    def from_sdf(cls, sdf, resolution, truncation, lo=(-0.5, -0.5, -0.5), hi=(0.5, 0.5, 0.5)):
        """A fully observed volume sampled from a signed distance function of (N, 3) points."""
        volume = cls(resolution, truncation, lo, hi)
        values = sdf(volume.centers().reshape(-1, 3)).reshape(volume.tsdf.shape)
        volume.tsdf = np.clip(values / truncation, -1.0, 1.0)
        volume.weight[:] = 1.0
        volume.rgb[:] = 0.5
        return volume

    def integrate(self, depth, rgb, cam, alpha=None, alpha_threshold=0.5):
        """
        Fuse one view. Pixels with ``alpha < alpha_threshold`` (or, without
        alpha, zero depth) carry no depth and leave the voxels behind them untouched.
        """
        depth = np.asarray(depth, dtype=np.float64)
        rgb = np.asarray(rgb, dtype=np.float64)
        valid_depth = depth > 0 if alpha is None else np.asarray(alpha) >= alpha_threshold

        centers = self.centers().reshape(-1, 3)
        projection = project_point(centers, cam)
        cols = np.floor(projection.u).astype(np.int64)
        rows = np.floor(projection.v).astype(np.int64)
        inside = projection.valid & (cols >= 0) & (cols < cam.width) & (rows >= 0) & (rows < cam.height)
        cols = np.where(inside, cols, 0)
        rows = np.where(inside, rows, 0)
        observed = inside & valid_depth[rows, cols]

        sdf = depth[rows, cols] - projection.z
        update = observed & (sdf > -self.truncation)
        values = np.clip(sdf / self.truncation, -1.0, 1.0)

        flat_tsdf = self.tsdf.reshape(-1)
        flat_weight = self.weight.reshape(-1)
        flat_rgb = self.rgb.reshape(-1, 3)
        old = flat_weight[update]
        new = old + 1.0
        flat_tsdf[update] = (flat_tsdf[update] * old + values[update]) / new
        flat_rgb[update] = (flat_rgb[update] * old[:, None] + rgb[rows[update], cols[update]]) / new[:, None]
        flat_weight[update] = new
        log.debug(f"Integrated view {cam}: updated {int(update.sum())} voxels")
        return self


def _complete_cubes(weight):
    """Mask of cube origins whose eight corners all carry weight."""
    observed = weight > 0
    mask = np.zeros_like(observed)
    core = observed[:-1, :-1, :-1].copy()
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                core &= observed[dx:dx + core.shape[0], dy:dy + core.shape[1], dz:dz + core.shape[2]]
    mask[:-1, :-1, :-1] = core
    return mask


def extract_mesh(volume):
    """
    Marching cubes at level 0 over the observed part of ``volume``.

    Vertex colors are trilinear samples of the color average. A volume with no
    sign change yields an empty mesh.
    """
    mask = _complete_cubes(volume.weight)
    if not mask.any():
        return empty_mesh()
    corners = volume.tsdf[volume.weight > 0]
    if corners.min() >= 0 or corners.max() <= 0:
        return empty_mesh()
    try:
        vertices, faces, _, _ = measure.marching_cubes(volume.tsdf, level=0.0, mask=mask, allow_degenerate=False)
    except (ValueError, RuntimeError) as e:
        log.error(f"Marching cubes found no surface: {e}")
        return empty_mesh()
    if len(faces) == 0:
        return empty_mesh()

    colors = np.stack(
        [ndimage.map_coordinates(volume.rgb[..., c], vertices.T, order=1, mode="nearest") for c in range(3)],
        axis=-1,
    )
    world = volume.lo + (vertices + 0.5) * volume.voxel_size
    log.info(f"Extracted mesh with {len(world)} vertices and {len(faces)} triangles")
    return TriangleMesh(world, np.clip(colors, 0.0, 1.0), faces.astype(np.int64))


def fuse_views(views, config):
    """
    Build and fill a TSDF from ``(depth, rgb, alpha, cam)`` tuples using a :class:`MeshConfig`.
    """
    volume = TsdfVolume(config.resolution, config.truncation)
    count = 0
    for depth, rgb, alpha, cam in views:
        volume.integrate(depth, rgb, cam, alpha=alpha, alpha_threshold=config.alpha_threshold)
        count += 1
    log.info(f"Fused {count} views into a {config.resolution}^3 TSDF")
    return volume
