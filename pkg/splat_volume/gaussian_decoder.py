"""
Decoding a Gaussian volume into surfels, coarse then fine.

The coarse decoder turns every voxel feature into K surfels. The fine decoder
samples the input images and the coarse renders at each surfel center and
predicts a residual on the SH coefficients from those samples.
"""
import logging
import math
from collections import namedtuple

import numpy as np

from splat_volume.geometry import sample_image
from splat_volume.numerics import tensor as T
from splat_volume.numerics.nn import MLP, LayerNorm, Module, MultiHeadAttention
from splat_volume.splat_render.primitives import SplatSet

log = logging.getLogger(__name__)

RAW_PER_PRIMITIVE = 37
SH_COEFFS = 9
POINT_FEATURE_WIDTH = 8
ACTIVE_OPACITY = 1e-3
# Δ spans the cube [-1, 1]³, whose corners lie √3 from its center; scaling by
# r/√3 keeps every surfel inside the ball of radius r around its voxel center.
OFFSET_SCALE = 1.0 / math.sqrt(3.0)

PointFeatures = namedtuple("PointFeatures", ["features", "mask"])


class CoarseDecoder(Module):
    """
    Voxel feature (B) to K surfels through a two-layer MLP.

    Raw layout per surfel: offset 3, opacity 1, quaternion 4, scales 2, SH 27.

    Centers are ``p = v + (r / √3)·Δ`` with ``Δ = 2·sigmoid(raw) - 1`` in
    ``[-1, 1]³``, so ``|p - v| <= r`` for every surfel; see :data:`OFFSET_SCALE`.
    ``r`` is the configured fraction of the bounding box side.
    """

    def __init__(self, config, rng):
        self.K = config["K"]
        self.sh_order = config["sh_order"]
        self.radius = config["r"]
        self.mlp = MLP(config["B"], config["decoder_hidden"], self.K * RAW_PER_PRIMITIVE, rng)

    def raw(self, volume):
        features = volume.features.reshape(-1, volume.features.shape[-1])
        return self.mlp(features).reshape(features.shape[0], self.K, RAW_PER_PRIMITIVE)

    def forward(self, volume):
        """Return a :class:`SplatSet` of ``W³·K`` surfels ordered voxel-major."""
        raw = self.raw(volume)
        grid = volume.grid
        count = raw.shape[0] * self.K
        radius = self.radius * float((grid.hi - grid.lo).max())
        centers = np.repeat(grid.centers().reshape(-1, 3), self.K, axis=0)

        offset = T.sigmoid(raw[..., 0:3]) * 2.0 - 1.0
        p = offset.reshape(count, 3) * (radius * OFFSET_SCALE) + centers
        alpha = T.sigmoid(raw[..., 3]).reshape(count)
        q = T.normalize((raw[..., 4:8] + np.array([1.0, 0.0, 0.0, 0.0])).reshape(count, 4), axis=-1)
        s_max = 2.0 * float(grid.voxel_size.max())
        s = T.sigmoid(raw[..., 8:10]).reshape(count, 2) * s_max
        sh = raw[..., 10:].reshape(count, 3, SH_COEFFS)
        return SplatSet(p, q, s, alpha, sh, sh_order=self.sh_order)


def point_depth(points, cam):
    """Camera-frame depth of (N, 3) points, differentiable in the points."""
    return T.dot(points, cam.R[2]) + cam.t[2]


def sample_point_features(splats, coarse_buffers, images, cams):
    """
    Per-surfel, per-view features ``(I, Î, |D̂ - z_p|, Â)`` of shape (N, M, 8).

    ``coarse_buffers`` holds one :class:`RenderBuffers` per input view. The
    sampling location is the projected surfel center, treated as a constant;
    the samples stay differentiable in the coarse buffers and ``z_p`` in the
    surfel centers. Behind-camera and out-of-image samples are zero with
    ``mask = False``.
    """
    centers = T.as_tensor(splats.p)
    per_view = []
    masks = []
    for image, buffers, cam in zip(images, coarse_buffers, cams):
        stack = T.concat(
            [
                T.as_tensor(np.asarray(image, dtype=np.float64)),
                buffers.rgb,
                buffers.depth.reshape(cam.height, cam.width, 1),
                buffers.alpha.reshape(cam.height, cam.width, 1),
            ],
            axis=-1,
        )
        samples, _, inside = sample_image(stack, cam, centers.data)
        weight = inside[:, None].astype(np.float64)
        displacement = T.absolute(samples[:, 6:7] - point_depth(centers, cam).reshape(-1, 1)) * weight
        per_view.append(T.concat([samples[:, 0:6], displacement, samples[:, 7:8]], axis=-1))
        masks.append(inside)
    return PointFeatures(T.stack(per_view, axis=1), np.stack(masks, axis=1))


class FineDecoder(Module):
    """
    Residual SH from point features.

    The query is the surfel's voxel feature, the keys/values are its M per-view
    point features. Views with an invalid projection are masked; a surfel with
    no valid view gets a zero residual.
    """

    def __init__(self, config, rng):
        width = config["B"]
        self.K = config["K"]
        self.ln1 = LayerNorm(width)
        self.attn = MultiHeadAttention(width, config["heads"], rng, kv_width=POINT_FEATURE_WIDTH)
        self.ln2 = LayerNorm(width)
        self.mlp = MLP(width, config["decoder_hidden"], 3 * SH_COEFFS, rng, zero_init_out=True)

    def forward(self, volume, point_features, active):
        """Residuals (len(active), 3, 9) for the surfels listed in ``active``."""
        features = volume.features.reshape(-1, volume.features.shape[-1])
        queries = features[active // self.K].reshape(len(active), 1, features.shape[-1])
        keys = point_features.features[active]
        mask = point_features.mask[active]
        h = queries + self.attn(self.ln1(queries), keys, key_mask=mask)
        any_valid = mask.any(axis=1).astype(np.float64).reshape(len(active), 1, 1)
        residual = self.mlp(self.ln2(h)) * any_valid
        return residual.reshape(len(active), 3, SH_COEFFS)


def active_set(splats, culling=True):
    """Indices of surfels refined by the fine decoder."""
    alpha = np.asarray(splats.alpha.data if isinstance(splats.alpha, T.Tensor) else splats.alpha)
    if not culling:
        return np.arange(len(alpha))
    return np.flatnonzero(alpha > ACTIVE_OPACITY)


def scatter_rows(rows, index, count):
    """Place ``rows`` (A, ...) at positions ``index`` of a zero tensor with ``count`` rows."""
    rows = T.as_tensor(rows)
    padded = T.concat([rows, T.Tensor(np.zeros((1,) + rows.shape[1:]))], axis=0)
    lookup = np.full(count, len(index), dtype=np.int64)
    lookup[index] = np.arange(len(index))
    return padded[lookup]


class GaussianDecoder(Module):
    """Coarse and fine decoders sharing one Gaussian volume."""

    def __init__(self, config, rng):
        self.coarse = CoarseDecoder(config, rng)
        self.fine = FineDecoder(config, rng)

    def decode_coarse(self, volume):
        return self.coarse(volume)

    def decode_fine(self, volume, coarse_splats, point_features, culling=True):
        """
        Surfels with ``sh_fine = sh_coarse + residual``; inactive surfels keep ``sh_coarse``.
        """
        active = active_set(coarse_splats, culling)
        count = len(coarse_splats)
        log.debug(f"Refining {len(active)} of {count} surfels")
        if len(active) == 0:
            return coarse_splats.with_sh(coarse_splats.sh)
        residual = self.fine(volume, point_features, active)
        sh_fine = T.as_tensor(coarse_splats.sh) + scatter_rows(residual, active, count)
        return coarse_splats.with_sh(sh_fine)
