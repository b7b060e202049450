"""
Tile-based differentiable rasterizer for 2D Gaussian surfels.

Rendering runs in two passes:

1. Binning and sorting (numpy, not differentiated). Every splat is binned to
   the 16×16 pixel tiles its footprint overlaps. Each pixel center ray is then
   intersected with the splats of its tile, the hits are sorted by depth with
   the splat id as tie-break, and each list is truncated once transmittance
   falls below ``min_transmittance``.
2. Shading (tensor ops). The kept (pixel, splat) pairs are re-evaluated with
   differentiable operations and alpha-composited front to back, so one
   backward pass yields gradients for every splat field.
"""
import logging
import math
from collections import namedtuple

import numpy as np

from splat_volume.exceptions import RenderError
from splat_volume.geometry import pixel_centers, pixel_directions, project_point
from splat_volume.numerics import tensor as T
from splat_volume.numerics.tensor import make_op
from splat_volume.sh import sh_eval
from splat_volume.splat_render.primitives import build_frame, build_frame_tensor
from splat_volume.utils import get_render_config

log = logging.getLogger(__name__)

RenderResult = namedtuple("RenderResult", ["buffers", "intersections"])
RayIntersections = namedtuple(
    "RayIntersections",
    ["ids", "valid", "z", "G", "opacity", "weights", "normals", "transmittance", "height", "width"],
)


class RenderBuffers:
    """
    RGB (H, W, 3), depth (H, W), alpha (H, W) and normal (H, W, 3) tensors.

    ``splats`` is the :class:`SplatSet` the buffers were rendered from; it is
    the forward state :func:`rasterize_grad` differentiates through.
    """

    NAMES = ("rgb", "depth", "alpha", "normal")

    def __init__(self, rgb, depth, alpha, normal, splats=None):
        self.rgb = rgb
        self.depth = depth
        self.alpha = alpha
        self.normal = normal
        self.splats = splats

    def numpy(self):
        return {name: np.array(getattr(self, name).data) for name in self.NAMES}

    def __repr__(self):
        return f"RenderBuffers({self.rgb.shape[1]}x{self.rgb.shape[0]})"


def footprint_sigma(config):
    """Half-width of the binned square in units of scale."""
    if config.bin_sigma:
        return float(config.bin_sigma)
    if config.min_contribution <= 0:
        return math.inf
    return math.sqrt(2.0 * math.log(1.0 / config.min_contribution))


def composite_weights(opacity):
    """
    Front-to-back blending weights ``ω_i = a_i Π_{j<i} (1 - a_j)`` over the last axis of (P, L).

    The backward pass uses the suffix recurrence
    ``S_k = g_{k+1} a_{k+1} + (1 - a_{k+1}) S_{k+1}`` and
    ``dL/da_k = T_k (g_k - S_k)``, which stays finite for fully opaque splats.
    """
    opacity = T.as_tensor(opacity)
    a = opacity.data
    transmittance = np.cumprod(
        np.concatenate([np.ones_like(a[:, :1]), 1.0 - a[:, :-1]], axis=1), axis=1
    )
    weights = a * transmittance

    def backward(grad):
        suffix = np.zeros_like(a)
        running = np.zeros_like(a[:, 0])
        for k in range(a.shape[1] - 1, -1, -1):
            suffix[:, k] = running
            running = grad[:, k] * a[:, k] + (1.0 - a[:, k]) * running
        return (transmittance * (grad - suffix),)

    return make_op(weights, (opacity,), backward, "composite"), transmittance


def _bin_splats(arrays, frame, cam, config, tiles_x, tiles_y):
    """Inclusive tile ranges (N, 4) as tx0, tx1, ty0, ty1; rows with tx0 > tx1 touch no tile."""
    count = len(arrays["p"])
    k = footprint_sigma(config)
    full = np.tile(np.array([0, tiles_x - 1, 0, tiles_y - 1]), (count, 1))
    if not np.isfinite(k) or count == 0:
        return full
    offsets = []
    for su in (-1.0, 1.0):
        for sv in (-1.0, 1.0):
            offsets.append(
                su * k * arrays["s"][:, 0:1] * frame.t_u + sv * k * arrays["s"][:, 1:2] * frame.t_v
            )
    corners = arrays["p"][:, None, :] + np.stack(offsets, axis=1)
    projection = project_point(corners, cam)
    behind = (projection.z <= config.near_plane).any(axis=1)
    size = config.tile_size
    ranges = np.stack(
        [
            np.floor(projection.u.min(axis=1) / size),
            np.floor(projection.u.max(axis=1) / size),
            np.floor(projection.v.min(axis=1) / size),
            np.floor(projection.v.max(axis=1) / size),
        ],
        axis=1,
    )
    ranges[:, 0:2] = np.clip(ranges[:, 0:2], -1, tiles_x)
    ranges[:, 2:4] = np.clip(ranges[:, 2:4], -1, tiles_y)
    outside = (ranges[:, 1] < 0) | (ranges[:, 0] >= tiles_x) | (ranges[:, 3] < 0) | (ranges[:, 2] >= tiles_y)
    ranges[:, 0] = np.maximum(ranges[:, 0], 0)
    ranges[:, 1] = np.minimum(ranges[:, 1], tiles_x - 1)
    ranges[:, 2] = np.maximum(ranges[:, 2], 0)
    ranges[:, 3] = np.minimum(ranges[:, 3], tiles_y - 1)
    ranges = ranges.astype(np.int64)
    ranges[behind] = full[behind]
    ranges[outside & ~behind] = (1, 0, 1, 0)
    return ranges


def _intersect_tile(arrays, frame, candidates, origin, dirs, forward_dot, config):
    """Sorted, culled and truncated hit lists for the pixels of one tile."""
    normals = frame.n[candidates]
    centers = arrays["p"][candidates]
    denom = dirs @ normals.T
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = ((centers - origin) * normals).sum(-1)[None, :] / denom
        z = t * forward_dot[:, None]
        offset = origin + t[..., None] * dirs[:, None, :] - centers[None]
        u = (offset * frame.t_u[candidates][None]).sum(-1) / arrays["s"][candidates, 0]
        v = (offset * frame.t_v[candidates][None]).sum(-1) / arrays["s"][candidates, 1]
        G = np.exp(-0.5 * (u * u + v * v))
    valid = (np.abs(denom) >= config.grazing_epsilon) & (z > config.near_plane) & np.isfinite(G)
    valid &= G >= config.min_contribution

    order = np.argsort(np.where(valid, z, np.inf), axis=1, kind="stable")
    length = int(valid.sum(axis=1).max(initial=0))
    order = order[:, :length]
    ids = candidates[order]
    valid = np.take_along_axis(valid, order, axis=1)
    opacity = np.where(valid, arrays["alpha"][ids] * np.take_along_axis(G, order, axis=1), 0.0)
    before = np.cumprod(np.concatenate([np.ones_like(opacity[:, :1]), 1.0 - opacity[:, :-1]], axis=1), axis=1)
    valid &= before >= config.min_transmittance
    return np.where(valid, ids, -1), valid


def sort_intersections(splats, cam, config=None):
    """
    Per-pixel hit lists ``(ids, valid)`` of shape (H·W, L), padded with id -1.
    """
    config = config or get_render_config()
    arrays = splats.arrays()
    pixel_count = cam.width * cam.height
    if len(splats) == 0:
        return np.full((pixel_count, 0), -1, dtype=np.int64), np.zeros((pixel_count, 0), dtype=bool)

    frame = build_frame(arrays["q"])
    size = config.tile_size
    tiles_x = -(-cam.width // size)
    tiles_y = -(-cam.height // size)
    ranges = _bin_splats(arrays, frame, cam, config, tiles_x, tiles_y)
    centers = pixel_centers(cam.width, cam.height)
    directions = pixel_directions(cam, centers)
    origin = cam.center

    tiles = []
    for ty in range(tiles_y):
        for tx in range(tiles_x):
            candidates = np.flatnonzero(
                (ranges[:, 0] <= tx) & (ranges[:, 1] >= tx) & (ranges[:, 2] <= ty) & (ranges[:, 3] >= ty)
            )
            rows = np.arange(ty * size, min((ty + 1) * size, cam.height))
            cols = np.arange(tx * size, min((tx + 1) * size, cam.width))
            pixels = (rows[:, None] * cam.width + cols[None, :]).reshape(-1)
            if len(candidates) == 0:
                continue
            dirs = directions.reshape(-1, 3)[pixels]
            ids, valid = _intersect_tile(arrays, frame, candidates, origin, dirs, dirs @ cam.forward, config)
            tiles.append((pixels, ids, valid))

    length = max((ids.shape[1] for _, ids, _ in tiles), default=0)
    all_ids = np.full((pixel_count, length), -1, dtype=np.int64)
    all_valid = np.zeros((pixel_count, length), dtype=bool)
    for pixels, ids, valid in tiles:
        all_ids[pixels, :ids.shape[1]] = ids
        all_valid[pixels, :valid.shape[1]] = valid
    log.debug(f"Sorted {int(all_valid.sum())} intersections of {len(splats)} splats over {len(tiles)} tiles")
    return all_ids, all_valid


def _background(config, background):
    return np.asarray(config.background if background is None else background, dtype=np.float64)


def _empty_result(splats, cam, background):
    height, width = cam.height, cam.width
    buffers = RenderBuffers(
        T.Tensor(np.broadcast_to(background, (height, width, 3)).copy()),
        T.Tensor(np.zeros((height, width))),
        T.Tensor(np.zeros((height, width))),
        T.Tensor(np.zeros((height, width, 3))),
        splats=splats,
    )
    pixels = height * width
    empty = T.Tensor(np.zeros((pixels, 0)))
    intersections = RayIntersections(
        np.full((pixels, 0), -1, dtype=np.int64), np.zeros((pixels, 0), dtype=bool), empty, empty, empty,
        empty, T.Tensor(np.zeros((pixels, 0, 3))), np.zeros((pixels, 0)), height, width,
    )
    return RenderResult(buffers, intersections)


def rasterize(splats, cam, background=None, config=None, lists=None):
    """
    Render ``splats`` (a :class:`SplatSet`) into ``cam``.

    Returns ``(RenderBuffers, RayIntersections)``. Fields of ``splats`` that
    are tensors requiring grad receive gradients through the buffers and the
    intersection weights. ``lists`` reuses the hit lists of an earlier render
    of the same geometry (for example the coarse pass, when only colors change).
    """
    config = config or get_render_config()
    background = _background(config, background)
    splats.validate()
    if lists is None:
        ids, valid = sort_intersections(splats, cam, config)
    else:
        ids, valid = lists.ids, lists.valid
    if len(splats) == 0 or ids.shape[1] == 0:
        return _empty_result(splats, cam, background)

    pixel_count, length = ids.shape
    flat_ids = np.where(valid, ids, 0)
    directions = pixel_directions(cam, pixel_centers(cam.width, cam.height)).reshape(-1, 1, 3)
    forward_dot = (directions[:, 0, :] @ cam.forward)[:, None]
    origin = cam.center

    p = T.as_tensor(splats.p)
    frame = build_frame_tensor(splats.q)
    scales = T.as_tensor(splats.s)
    view = T.normalize(p - origin, axis=-1)
    colors = sh_eval(splats.sh, view, order=splats.sh_order)

    p_g = p[flat_ids]
    n_g = frame.n[flat_ids]
    denom = T.dot(n_g, directions)
    safe_denom = T.where(valid, denom, 1.0)
    t = T.dot(p_g - origin, n_g) / safe_denom
    offset = directions * t.reshape(pixel_count, length, 1) + (origin - p_g)
    u = T.dot(offset, frame.t_u[flat_ids]) / scales[flat_ids, 0]
    v = T.dot(offset, frame.t_v[flat_ids]) / scales[flat_ids, 1]
    G = T.exp((u * u + v * v) * -0.5)
    z = t * forward_dot

    opacity = T.as_tensor(splats.alpha)[flat_ids] * G * valid.astype(np.float64)
    weights, transmittance = composite_weights(opacity)
    facing = np.where(denom.data > 0, -1.0, 1.0)[..., None]
    normals = n_g * facing

    alpha = T.tensor_sum(weights, axis=1)
    rgb = T.tensor_sum(weights.reshape(pixel_count, length, 1) * colors[flat_ids], axis=1)
    rgb = rgb + (1.0 - alpha).reshape(pixel_count, 1) * background
    depth = T.tensor_sum(weights * z, axis=1) / T.clamp(alpha, low=config.depth_epsilon)
    normal = T.tensor_sum(weights.reshape(pixel_count, length, 1) * normals, axis=1)

    height, width = cam.height, cam.width
    buffers = RenderBuffers(
        rgb.reshape(height, width, 3),
        depth.reshape(height, width),
        alpha.reshape(height, width),
        normal.reshape(height, width, 3),
        splats=splats,
    )
    intersections = RayIntersections(
        ids, valid, z, G, opacity, weights, normals, transmittance * valid, height, width
    )
    return RenderResult(buffers, intersections)


def rasterize_grad(buffers, upstream):
    """
    Gradients of ``Σ_b <upstream[b], buffers.b>`` with respect to every splat field.

    ``buffers`` must come from :func:`rasterize` on splats whose fields are
    tensors requiring grad (see :meth:`SplatSet.as_leaves`). Returns a dict
    keyed by field name.
    """
    if buffers is None or buffers.splats is None:
        raise RenderError("rasterize_grad needs the buffers of a retained forward pass")
    leaves = {
        name: value
        for name, value in buffers.splats.fields().items()
        if isinstance(value, T.Tensor) and value.requires_grad
    }
    if not leaves:
        raise RenderError("Forward pass was run without differentiable splats; no state to differentiate")
    for leaf in leaves.values():
        leaf.grad = None

    objective = None
    for name, grad in upstream.items():
        if name not in RenderBuffers.NAMES:
            raise RenderError(f"Unknown render buffer {name}")
        term = T.tensor_sum(getattr(buffers, name) * np.asarray(grad, dtype=np.float64))
        objective = term if objective is None else objective + term
    if objective is not None and objective.requires_grad:
        objective.backward()
    return {name: np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad for name, leaf in leaves.items()}
