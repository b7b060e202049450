"""
The feed-forward network mapping posed images to a Gaussian volume.

Images are patch-encoded, modulated by the Plücker ray of each patch center,
lifted into per-view feature volumes and attended to, group by group, from a
learnable embedding volume. A transposed 3D convolution doubles the final
embedding volume's resolution into the Gaussian volume.
"""
import logging
from collections import namedtuple

import numpy as np

from splat_volume.exceptions import ConfigError, ShapeError
from splat_volume.geometry import VoxelGrid, lift_features, plucker_map
from splat_volume.numerics import tensor as T
from splat_volume.numerics.nn import (
    MLP,
    Conv3d,
    ConvTranspose3d,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    truncated_normal,
)

log = logging.getLogger(__name__)

GaussianVolume = namedtuple("GaussianVolume", ["features", "grid"])


def group_unfold(volume, G):
    """
    Split a (W, W, W, C) volume into G³ groups of (W/G)³ tokens, shape (G³, (W/G)³, C).

    Group ``(a, b, c)`` (flattened as ``a·G² + b·G + c``) holds the contiguous
    block ``[a·W/G, (a+1)·W/G) × …``.
    """
    volume = T.as_tensor(volume)
    W, C = volume.shape[0], volume.shape[-1]
    if volume.ndim != 4 or volume.shape[:3] != (W, W, W):
        raise ShapeError(f"Expected a cubic (W, W, W, C) volume, got {volume.shape}")
    if G < 1 or W % G:
        raise ConfigError(f"Group count {G} does not divide volume side {W}")
    w = W // G
    blocks = volume.reshape(G, w, G, w, G, w, C).transpose(0, 2, 4, 1, 3, 5, 6)
    return blocks.reshape(G ** 3, w ** 3, C)


def group_fold(groups, G):
    """Inverse of :func:`group_unfold`."""
    groups = T.as_tensor(groups)
    count, tokens, C = groups.shape
    w = round(tokens ** (1.0 / 3.0))
    if count != G ** 3 or w ** 3 != tokens:
        raise ShapeError(f"Cannot fold {groups.shape} with G={G}")
    blocks = groups.reshape(G, G, G, w, w, w, C).transpose(0, 3, 1, 4, 2, 5, 6)
    return blocks.reshape(G * w, G * w, G * w, C)


class SelfAttentionBlock(Module):
    """Pre-LN transformer block over a token sequence."""

    def __init__(self, width, heads, mlp_ratio, rng):
        self.ln1 = LayerNorm(width)
        self.attn = MultiHeadAttention(width, heads, rng)
        self.ln2 = LayerNorm(width)
        self.mlp = MLP(width, mlp_ratio * width, width, rng)

    def forward(self, x):
        h = self.ln1(x)
        x = x + self.attn(h, h)
        return x + self.mlp(self.ln2(x))


class PatchEncoder(Module):
    """
    Toy image encoder: non-overlapping patch embedding, a learned positional
    embedding and a few self-attention blocks.
    """

    def __init__(self, config, rng):
        self.patch = config["patch"]
        self.grid = config["image_size"] // config["patch"]
        self.embed = Linear(self.patch * self.patch * 3, config["O"], rng)
        self.position = Parameter(truncated_normal(rng, (self.grid * self.grid, config["O"])))
        self.blocks = [
            SelfAttentionBlock(config["O"], config["heads"], config["mlp_ratio"], rng)
            for _ in range(config["encoder_blocks"])
        ]

    def forward(self, images):
        images = np.asarray(images)
        views, height, width = images.shape[:3]
        patch = self.patch
        if height % patch or width % patch:
            raise ShapeError(f"Image size {height}x{width} is not divisible by the patch size {patch}")
        rows, cols = height // patch, width // patch
        if rows != self.grid or cols != self.grid:
            raise ConfigError(
                f"Encoder was built for {self.grid * patch}px images, got {height}x{width}"
            )
        patches = images.reshape(views, rows, patch, cols, patch, 3).transpose(0, 1, 3, 2, 4, 5)
        tokens = self.embed(patches.reshape(views, rows * cols, patch * patch * 3)) + self.position
        for block in self.blocks:
            tokens = block(tokens)
        return tokens.reshape(views, rows, cols, tokens.shape[-1])


class PluckerModulation(Module):
    """
    Adaptive layer norm driven by the Plücker coordinates of each token's ray.

    A two-layer net maps the 6-vector ``(d, m)`` to ``(γ, β)``; the output is
    ``LN(token)·(1 + γ) + β``. The second layer starts at zero.
    """

    def __init__(self, width, rng):
        self.width = width
        self.norm = LayerNorm(width, affine=False)
        self.fc1 = Linear(6, width, rng)
        self.fc2 = Linear(width, 2 * width, rng, zero_init=True)

    def forward(self, tokens, rays):
        modulation = self.fc2(T.gelu(self.fc1(rays)))
        gamma = modulation[..., :self.width]
        beta = modulation[..., self.width:]
        return self.norm(tokens) * (gamma + 1.0) + beta


class GroupAttentionLayer(Module):
    """
    One update of the embedding volume.

    Per group: cross-attention from the embedding tokens to the concatenated
    feature tokens of all views, then an MLP, both pre-LN with residuals. The
    groups are folded back and a 3×3×3 convolution (pre-LN, residual) mixes
    neighbouring groups.
    """

    def __init__(self, width, feature_width, heads, mlp_ratio, rng):
        self.ln1 = LayerNorm(width)
        self.attn = MultiHeadAttention(width, heads, rng, kv_width=feature_width)
        self.ln2 = LayerNorm(width)
        self.mlp = MLP(width, mlp_ratio * width, width, rng)
        self.ln3 = LayerNorm(width)
        self.conv = Conv3d(width, width, rng)
        self.last_score_count = 0

    def attend(self, embedding, feature_volumes, G):
        """Grouped attention and MLP; returns groups (G³, tokens, C) before folding."""
        queries = group_unfold(embedding, G)
        keys = [group_unfold(volume, G) for volume in feature_volumes]
        for key in keys:
            if key.shape[0] != queries.shape[0]:
                raise ShapeError(f"Group count mismatch: {queries.shape[0]} embedding groups, {key.shape[0]} feature")
        keys = T.concat(keys, axis=1)
        x = queries + self.attn(self.ln1(queries), keys)
        self.last_score_count = self.attn.last_score_count
        return x + self.mlp(self.ln2(x))

    def forward(self, embedding, feature_volumes, G):
        volume = group_fold(self.attend(embedding, feature_volumes, G), G)
        return volume + self.conv(self.ln3(volume))


class VolumeTransformer(Module):
    """
    Posed images to a :class:`GaussianVolume` of side ``2·W_e``.
    """

    def __init__(self, config, rng):
        self.config = dict(config)
        for name in ("W_f", "W_e"):
            if config[name] % config["G"]:
                raise ConfigError(f"G={config['G']} must divide {name}={config[name]}")
        self.encoder = PatchEncoder(config, rng)
        self.modulation = PluckerModulation(config["O"], rng)
        W_e, C = config["W_e"], config["C"]
        self.embedding = Parameter(truncated_normal(rng, (W_e, W_e, W_e, C)))
        self.layers = [
            GroupAttentionLayer(C, config["O"], config["heads"], config["mlp_ratio"], rng)
            for _ in range(config["layers"])
        ]
        self.upsample = ConvTranspose3d(C, config["B"], rng)
        self.feature_grid = VoxelGrid(config["W_f"])
        self.gaussian_grid = VoxelGrid(2 * W_e)
        self.reconstruct_calls = 0

    def encode(self, images, cams):
        """Modulated token grids (M, H', W', O)."""
        tokens = self.encoder(images)
        rays = np.stack([plucker_map(cam, self.encoder.patch) for cam in cams])
        return self.modulation(tokens, rays)

    def lift(self, tokens, cams):
        return [lift_features(tokens[index], cam, self.feature_grid) for index, cam in enumerate(cams)]

    def score_count(self):
        """Attention scores computed by every group layer in the last forward."""
        return [layer.last_score_count for layer in self.layers]

    def forward(self, images, cams):
        if len(cams) < 1 or len(cams) != len(images):
            raise ShapeError(f"Need one camera per image and at least one view, got {len(images)}/{len(cams)}")
        self.reconstruct_calls += 1
        features = self.lift(self.encode(images, cams), cams)
        volume = self.embedding
        for layer in self.layers:
            volume = layer(volume, features, self.config["G"])
        log.debug(f"Reconstructed from {len(cams)} views, attention scores per layer {self.score_count()}")
        return GaussianVolume(self.upsample(volume), self.gaussian_grid)

    reconstruct = forward
