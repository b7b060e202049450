"""
Cameras, rays, projection, feature lifting and camera clustering.

Conventions:

* camera frame: x right, y down, z forward; a :class:`Camera` stores the
  world-to-camera transform ``w2c``.
* image coordinates are continuous; pixel ``(col, row)`` covers
  ``[col, col+1) × [row, row+1)`` so its center is ``(col+0.5, row+0.5)``.
* world frame: z up. Orbits put azimuth 0, elevation 0 on the +x axis.
"""
import logging
from collections import namedtuple

import numpy as np

from splat_volume.exceptions import GeometryError
from splat_volume.numerics import tensor as T

log = logging.getLogger(__name__)

BEHIND_CAMERA_EPS = 1e-8
WORLD_UP = np.array([0.0, 0.0, 1.0])

PluckerRay = namedtuple("PluckerRay", ["d", "m"])
Projection = namedtuple("Projection", ["u", "v", "z", "valid"])
ClusterResult = namedtuple("ClusterResult", ["labels", "centroids", "representatives", "objective_history"])


class Camera:
    """
    A pinhole camera: 3×3 intrinsics ``K`` in pixels and a 4×4 rigid ``w2c``.
    """

    def __init__(self, K, w2c, width, height, validate=True):
        self.K = np.asarray(K, dtype=np.float64).reshape(3, 3)
        self.w2c = np.asarray(w2c, dtype=np.float64).reshape(4, 4)
        self.width = int(width)
        self.height = int(height)
        if validate:
            self.validate()

    def validate(self):
        rotation = self.R
        if np.abs(rotation.T @ rotation - np.eye(3)).max() >= 1e-6:
            raise GeometryError("Camera rotation block is not orthonormal")
        if self.K[0, 0] <= 0 or self.K[1, 1] <= 0:
            raise GeometryError(f"Camera focal lengths must be positive, got {self.K[0, 0]}, {self.K[1, 1]}")
        if abs(self.K[1, 0]) + abs(self.K[2, 0]) + abs(self.K[2, 1]) > 0 or self.K[2, 2] != 1.0:
            raise GeometryError("Camera intrinsics must be upper triangular with K[2, 2] = 1")

    @property
    def R(self):
        return self.w2c[:3, :3]

    @property
    def t(self):
        return self.w2c[:3, 3]

    @property
    def center(self):
        """Camera center ``o`` in world coordinates."""
        return -self.R.T @ self.t

    @property
    def c2w(self):
        return np.linalg.inv(self.w2c)

    @property
    def forward(self):
        return self.R[2]

    def scaled(self, width, height):
        """Same pose, intrinsics rescaled to a new image size."""
        K = self.K.copy()
        K[0] *= width / self.width
        K[1] *= height / self.height
        return Camera(K, self.w2c, width, height)

    def to_dict(self):
        return {
            "K": [float(x) for x in self.K.reshape(-1)],
            "w2c": [float(x) for x in self.w2c.reshape(-1)],
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["K"], data["w2c"], data["width"], data["height"])

    def __repr__(self):
        return f"Camera({self.width}x{self.height}, center={np.round(self.center, 4).tolist()})"


def intrinsics(focal, width, height):
    """Square-pixel intrinsics with the principal point at the image center."""
    return np.array([[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]])


def look_at(eye, target, width, height, focal, up=WORLD_UP):
    """
    Build a camera at ``eye`` whose forward axis points at ``target``.
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise GeometryError("look_at: eye and target coincide")
    forward = forward / norm
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        # Looking straight along the up axis.
        right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    w2c = np.eye(4)
    w2c[:3, :3] = np.stack([right, down, forward])
    w2c[:3, 3] = -w2c[:3, :3] @ eye
    return Camera(intrinsics(focal, width, height), w2c, width, height)


def _check_focal(cam):
    if cam.K[0, 0] == 0 or cam.K[1, 1] == 0:
        raise GeometryError("Degenerate intrinsics: zero focal length")


def pixel_directions(cam, pixels):
    """
    Unit world-space directions through continuous image coordinates ``pixels`` (..., 2).
    """
    _check_focal(cam)
    pixels = np.asarray(pixels, dtype=np.float64)
    x = (pixels[..., 0] - cam.K[0, 2] - cam.K[0, 1] * (pixels[..., 1] - cam.K[1, 2]) / cam.K[1, 1]) / cam.K[0, 0]
    y = (pixels[..., 1] - cam.K[1, 2]) / cam.K[1, 1]
    camera_dirs = np.stack([x, y, np.ones_like(x)], axis=-1)
    world = camera_dirs @ cam.R
    return world / np.linalg.norm(world, axis=-1, keepdims=True)


def pixel_centers(width, height):
    cols, rows = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    return np.stack([cols, rows], axis=-1)


def camera_rays(cam):
    """Origin (3,) and unit directions (H, W, 3) through every pixel center."""
    return cam.center, pixel_directions(cam, pixel_centers(cam.width, cam.height))


def plucker_ray(cam, pixel):
    """
    Plücker coordinates ``(d, m = o × d)`` of the ray through ``pixel``.
    """
    d = pixel_directions(cam, pixel)
    return PluckerRay(d, np.cross(cam.center, d))


def plucker_map(cam, patch):
    """
    (H/patch, W/patch, 6) map of ``(d, m)`` for the ray through each patch center.
    """
    rows, cols = cam.height // patch, cam.width // patch
    ui, vi = np.meshgrid((np.arange(cols) + 0.5) * patch, (np.arange(rows) + 0.5) * patch)
    ray = plucker_ray(cam, np.stack([ui, vi], axis=-1))
    return np.concatenate([ray.d, ray.m], axis=-1)


def to_camera(points, cam):
    points = np.asarray(points, dtype=np.float64)
    return points @ cam.R.T + cam.t


def project_point(points, cam):
    """
    Pinhole projection of world points (..., 3).

    Returns a :class:`Projection`; ``valid`` is False for points with camera
    depth ``z <= 1e-8``. Their ``u, v`` are still computed but must be masked.
    """
    local = to_camera(points, cam)
    z = local[..., 2]
    valid = z > BEHIND_CAMERA_EPS
    safe = np.where(np.abs(z) > BEHIND_CAMERA_EPS, z, BEHIND_CAMERA_EPS)
    K = cam.K
    u = K[0, 0] * local[..., 0] / safe + K[0, 1] * local[..., 1] / safe + K[0, 2]
    v = K[1, 1] * local[..., 1] / safe + K[1, 2]
    return Projection(u, v, z, valid)


def unproject(cam, pixel, depth):
    """World point at camera depth ``depth`` on the ray through ``pixel``."""
    _check_focal(cam)
    pixel = np.asarray(pixel, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    y = (pixel[..., 1] - cam.K[1, 2]) / cam.K[1, 1]
    x = (pixel[..., 0] - cam.K[0, 2] - cam.K[0, 1] * y) / cam.K[0, 0]
    local = np.stack([x * depth, y * depth, depth], axis=-1)
    return (local - cam.t) @ cam.R


class VoxelGrid:
    """
    A W³ lattice of cell centers inside the box ``[lo, hi]``.
    """

    def __init__(self, W, lo=(-0.5, -0.5, -0.5), hi=(0.5, 0.5, 0.5)):
        self.W = int(W)
        self.lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (3,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (3,)).copy()
        if self.W < 1 or np.any(self.hi <= self.lo):
            raise GeometryError(f"Invalid voxel grid W={W}, lo={self.lo}, hi={self.hi}")

    @property
    def voxel_size(self):
        return (self.hi - self.lo) / self.W

    def center(self, i, j, k):
        return self.lo + (np.array([i, j, k]) + 0.5) * self.voxel_size

    def centers(self):
        """(W, W, W, 3) array; index ``[i, j, k]`` runs along x, y, z."""
        axis = np.arange(self.W) + 0.5
        ii, jj, kk = np.meshgrid(axis, axis, axis, indexing="ij")
        return self.lo + np.stack([ii, jj, kk], axis=-1) * self.voxel_size


def bilinear_gather(image, x, y):
    """
    Bilinearly sample ``image`` (H, W, C tensor) at texel coordinates ``x, y``.

    Integer coordinates hit texel centers exactly; samples beyond the outer
    texel centers clamp to the edge. The result is linear in ``image`` and
    differentiable with respect to it (the coordinates are constants).
    """
    image = T.as_tensor(image)
    height, width, channels = image.shape
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, width - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, height - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), width - 1)
    y0 = np.minimum(np.floor(y).astype(np.int64), height - 1)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    wx = (x - x0)[..., None]
    wy = (y - y0)[..., None]
    flat = image.reshape(height * width, channels)
    out = (
        flat[y0 * width + x0] * ((1.0 - wx) * (1.0 - wy))
        + flat[y0 * width + x1] * (wx * (1.0 - wy))
        + flat[y1 * width + x0] * ((1.0 - wx) * wy)
        + flat[y1 * width + x1] * (wx * wy)
    )
    return out


def sample_image(image, cam, points):
    """
    Sample an (H', W', C) map covering ``cam``'s image at projected ``points`` (N, 3).

    Returns ``(samples, projection, inside)`` where ``samples`` is an (N, C)
    tensor that is zero for points behind the camera or outside the image.
    """
    image = T.as_tensor(image)
    rows, cols = image.shape[:2]
    projection = project_point(points, cam)
    inside = (
        projection.valid
        & (projection.u >= 0) & (projection.u <= cam.width)
        & (projection.v >= 0) & (projection.v <= cam.height)
    )
    x = projection.u * (cols / cam.width) - 0.5
    y = projection.v * (rows / cam.height) - 0.5
    samples = bilinear_gather(image, np.where(inside, x, 0.0), np.where(inside, y, 0.0))
    return samples * inside[:, None].astype(float), projection, inside


def lift_features(feature_map, cam, grid):
    """
    Back-project an (H', W', O) token grid into a (W, W, W, O) feature volume.

    Each voxel center is projected into the view and the map is bilinearly
    sampled there; voxels behind the camera or outside the image get zeros.
    """
    feature_map = T.as_tensor(feature_map)
    centers = grid.centers().reshape(-1, 3)
    samples, _, inside = sample_image(feature_map, cam, centers)
    log.debug(f"Lifted {int(inside.sum())} of {len(centers)} voxels into view {cam}")
    return samples.reshape(grid.W, grid.W, grid.W, feature_map.shape[-1])


def _kmeans_plus_plus(points, k, rng):
    chosen = [int(rng.integers(len(points)))]
    for _ in range(1, k):
        distances = ((points[:, None, :] - points[chosen][None, :, :]) ** 2).sum(-1).min(axis=1)
        total = distances.sum()
        if total <= 0:
            raise GeometryError("Not enough distinct camera centers for the requested cluster count")
        chosen.append(int(rng.choice(len(points), p=distances / total)))
    return points[chosen].copy()


def _lloyd(points, centroids, max_iterations):
    labels = None
    history = []
    for _ in range(max_iterations):
        distances = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)
        new_labels = distances.argmin(axis=1)
        history.append(float(distances[np.arange(len(points)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels.copy()
        spread = distances[np.arange(len(points)), new_labels]
        for cluster in range(len(centroids)):
            members = points[new_labels == cluster]
            if len(members):
                centroids[cluster] = members.mean(axis=0)
            else:
                # An empty cluster restarts at the point farthest from its centroid.
                farthest = int(spread.argmax())
                centroids[cluster] = points[farthest]
                labels[farthest] = cluster
                spread[farthest] = -1.0
    return labels, centroids, history


def kmeans_cluster_cameras(cams, k, seed=0, max_iterations=100, restarts=10):
    """
    Cluster camera centers with k-means++ seeded Lloyd iterations.

    The best of ``restarts`` seeded runs (lowest within-cluster sum of squares)
    is kept. Each cluster's representative is its member nearest the centroid.
    """
    if len(cams) < k:
        raise GeometryError(f"Cannot form {k} clusters from {len(cams)} cameras")
    points = np.array([cam.center for cam in cams])
    distinct = len(np.unique(np.round(points, 12), axis=0))
    if distinct < k:
        raise GeometryError(f"Only {distinct} distinct camera centers, fewer than the {k} clusters requested")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        labels, centroids, history = _lloyd(points, _kmeans_plus_plus(points, k, rng), max_iterations)
        if best is None or history[-1] < best[2][-1]:
            best = (labels, centroids, history)
    labels, centroids, history = best

    representatives = []
    for cluster in range(k):
        members = np.flatnonzero(labels == cluster)
        if not len(members):
            members = np.setdiff1d(np.arange(len(points)), representatives)
        distances = ((points[members] - centroids[cluster]) ** 2).sum(-1)
        representatives.append(int(members[np.argmin(distances)]))
    return ClusterResult(labels, centroids, representatives, history)
