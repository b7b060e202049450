"""
Gradient checks of the rendering objective on small random scenes.

Every check compares the analytic gradient of ``MSE + γ_d·L_d + γ_n·L_n``
with central differences, once with respect to the surfel fields and once
with respect to the weights of a small coarse decoder feeding the renderer.
Runs in 64-bit precision with the compositing cutoffs made negligible so the
objective is smooth.
"""
import logging

import numpy as np

from splat_volume.gaussian_decoder import CoarseDecoder
from splat_volume.geometry import VoxelGrid, look_at
from splat_volume.losses_metrics import depth_normals, distortion_loss, mse, normal_consistency_loss
from splat_volume.numerics import tensor as T
from splat_volume.numerics.gradcheck import grad_check
from splat_volume.splat_render.primitives import SplatSet
from splat_volume.splat_render.rasterizer import rasterize
from splat_volume.utils import get_loss_weights, get_render_config
from splat_volume.volume_transformer import GaussianVolume

log = logging.getLogger(__name__)

SMOOTH_RENDER = {"min_contribution": 1e-12, "min_transmittance": 0.0}
DECODER_CONFIG = {"K": 1, "sh_order": 2, "r": 1.0 / 8.0, "B": 4, "decoder_hidden": 8}


def random_camera(rng, size=32):
    """A camera 2 to 3 units from the origin, looking at a jittered point near it."""
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    eye = direction * rng.uniform(2.0, 3.0)
    return look_at(eye, rng.uniform(-0.05, 0.05, 3), size, size, focal=1.5 * size)


def random_splats(rng, count, sh_order=2):
    coefficients = (sh_order + 1) ** 2
    q = rng.normal(size=(count, 4))
    return SplatSet(
        rng.uniform(-0.3, 0.3, (count, 3)),
        q / np.linalg.norm(q, axis=1, keepdims=True),
        rng.uniform(0.08, 0.25, (count, 2)),
        rng.uniform(0.2, 0.9, count),
        rng.normal(0.0, 0.3, (count, 3, coefficients)),
        sh_order=sh_order,
    )


def render_objective(splats, cam, target, weights, config):
    """``MSE(rgb, target) + γ_d·L_d + γ_n·L_n`` of one render, as a tensor."""
    buffers, hits = rasterize(splats, cam, config=config)
    loss = mse(buffers.rgb, target)
    loss = loss + distortion_loss(hits, exact=False) * weights.gamma_d
    return loss + normal_consistency_loss(hits, depth_normals(buffers.depth, cam)) * weights.gamma_n


def check_splat_gradients(rng, max_splats=8, size=32, h=1e-4, tol=1e-3, config=None):
    config = config or get_render_config(**SMOOTH_RENDER)
    weights = get_loss_weights()
    cam = random_camera(rng, size)
    leaves = random_splats(rng, int(rng.integers(1, max_splats + 1))).as_leaves()
    target = rng.uniform(0.0, 1.0, (size, size, 3))
    return grad_check(lambda: render_objective(leaves, cam, target, weights, config), leaves.fields(), h=h, tol=tol)


def check_decoder_gradients(rng, size=32, h=1e-4, tol=1e-3, max_entries=24, config=None):
    config = config or get_render_config(**SMOOTH_RENDER)
    weights = get_loss_weights()
    decoder = CoarseDecoder(DECODER_CONFIG, rng)
    decoder.bind_names()
    grid = VoxelGrid(2, lo=(-0.3, -0.3, -0.3), hi=(0.3, 0.3, 0.3))
    volume = GaussianVolume(T.Tensor(rng.normal(0.0, 1.0, (2, 2, 2, DECODER_CONFIG["B"]))), grid)
    cam = random_camera(rng, size)
    target = rng.uniform(0.0, 1.0, (size, size, 3))
    return grad_check(
        lambda: render_objective(decoder(volume), cam, target, weights, config),
        dict(decoder.named_parameters()),
        h=h,
        tol=tol,
        max_entries=max_entries,
        rng=rng,
    )


def run_gradient_suite(num_scenes=20, seed=0, max_splats=8, size=32, h=1e-4, tol=1e-3, decoder=True):
    """
    Check ``num_scenes`` random scenes; returns a JSON-ready report with the
    worst relative error per scene and an overall ``passed`` flag.
    """
    rng = np.random.default_rng(seed)
    scenes = []
    with T.precision(np.float64):
        for index in range(num_scenes):
            report = check_splat_gradients(rng, max_splats, size, h, tol)
            record = {"scene": index, "splats": max(report.errors.values())}
            if decoder:
                record["decoder"] = max(check_decoder_gradients(rng, size, h, tol).errors.values())
            log.info(f"Gradient check scene {index}: {record}")
            scenes.append(record)
    worst = max((max(v for k, v in record.items() if k != "scene") for record in scenes), default=0.0)
    return {"scenes": scenes, "max_relative_error": worst, "tolerance": tol, "passed": worst < tol}
