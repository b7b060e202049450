"""
The full reconstruction model: volume transformer plus coarse and fine decoders.
"""
import logging
from collections import namedtuple

import numpy as np

from splat_volume.exceptions import CheckpointError
from splat_volume.gaussian_decoder import GaussianDecoder, sample_point_features
from splat_volume.numerics import tensor as T
from splat_volume.numerics.checkpoint import check_config, load_checkpoint
from splat_volume.numerics.nn import Module
from splat_volume.splat_render.rasterizer import rasterize
from splat_volume.volume_transformer import VolumeTransformer

log = logging.getLogger(__name__)

SceneRender = namedtuple(
    "SceneRender",
    ["coarse_splats", "fine_splats", "coarse", "fine", "intersections"],
)


class ReconstructionModel(Module):
    """
    Posed images in, surfels out.

    All parameters are drawn from one generator seeded with ``seed``, so two
    models built from the same config and seed are identical.
    """

    def __init__(self, config, seed=0):
        rng = np.random.default_rng(seed)
        self.config = dict(config)
        self.transformer = VolumeTransformer(config, rng)
        self.decoder = GaussianDecoder(config, rng)
        self.bind_names()

    @property
    def reconstruct_calls(self):
        return self.transformer.reconstruct_calls

    def forward(self, images, cams):
        return self.transformer.reconstruct(images, cams)

    def decode(self, volume, images, cams, render_config=None, culling=True):
        """
        Coarse surfels, their renders into the input views, and the refined surfels.

        Returns ``(coarse_splats, coarse_results, fine_splats)`` where
        ``coarse_results`` holds one :class:`RenderResult` per input view.
        """
        coarse_splats = self.decoder.decode_coarse(volume)
        coarse_results = [rasterize(coarse_splats, cam, config=render_config) for cam in cams]
        features = sample_point_features(coarse_splats, [result.buffers for result in coarse_results], images, cams)
        fine_splats = self.decoder.decode_fine(volume, coarse_splats, features, culling=culling)
        return coarse_splats, coarse_results, fine_splats

    def render_scene(self, images, input_cams, target_cams, render_config=None, culling=True):
        """
        One reconstruction rendered into ``target_cams``, coarse and fine.

        The first ``len(input_cams)`` targets are expected to be the input
        views; their coarse renders are reused instead of recomputed.
        """
        volume = self(images, input_cams)
        coarse_splats, input_results, fine_splats = self.decode(volume, images, input_cams, render_config, culling)
        coarse_results = list(input_results)
        for cam in target_cams[len(input_results):]:
            coarse_results.append(rasterize(coarse_splats, cam, config=render_config))
        fine_results = [
            rasterize(fine_splats, cam, config=render_config, lists=coarse.intersections)
            for coarse, cam in zip(coarse_results, target_cams)
        ]
        return SceneRender(
            coarse_splats,
            fine_splats,
            [result.buffers for result in coarse_results],
            [result.buffers for result in fine_results],
            [result.intersections for result in fine_results],
        )


PARAM_PREFIX = "param."
OPTIM_PREFIX = "optim."


def model_tensors(model):
    return {f"{PARAM_PREFIX}{name}": array for name, array in model.state_dict().items()}


def split_tensors(tensors):
    """Separate checkpoint tensors into model parameters and optimiser moments."""
    params = {name[len(PARAM_PREFIX):]: array for name, array in tensors.items() if name.startswith(PARAM_PREFIX)}
    optim = {name[len(OPTIM_PREFIX):]: array for name, array in tensors.items() if name.startswith(OPTIM_PREFIX)}
    return params, optim


def load_model(path, model_config=None):
    """
    Rebuild a model from a checkpoint; returns ``(model, metadata)``.

    When ``model_config`` is given it must match the saved config field for
    field, otherwise CheckpointError lists the differences.
    """
    tensors, metadata = load_checkpoint(path)
    saved = metadata.get("model_config")
    if saved is None:
        raise CheckpointError(f"Checkpoint {path} carries no model config")
    if model_config is not None:
        check_config(saved, dict(model_config))
    params, _ = split_tensors(tensors)
    dtype = next(iter(params.values())).dtype.type if params else np.float64
    with T.precision(dtype):
        model = ReconstructionModel(saved)
    model.load_state_dict(params)
    log.info(f"Loaded model from {path} (step {metadata.get('step')})")
    return model, metadata
