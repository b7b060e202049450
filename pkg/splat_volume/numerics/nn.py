"""
Neural network layers built on :mod:`splat_volume.numerics.tensor`.

Layers hold :class:`Parameter` attributes (or lists of sub-modules) and are
walked by :meth:`Module.named_parameters` in attribute definition order, which
gives stable dotted names such as ``layers.3.attn.q_proj.weight``.

All volumes are channels-last: a ``W×W×W×C`` array.
"""
import math

import numpy as np
from scipy.stats import truncnorm

from splat_volume.exceptions import CheckpointError, ConfigError, ShapeError
from splat_volume.numerics import tensor as T
from splat_volume.numerics.tensor import Tensor, make_op

INIT_STD = 0.02
MASK_FILL = -1e9


class Parameter(Tensor):
    """
    A leaf tensor that requires grad and is owned by a :class:`Module`.
    """

    def __init__(self, data, name=""):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter(name={self.name!r}, shape={self.shape})"


def truncated_normal(rng, shape, std=INIT_STD):
    """Sample N(0, std²) truncated at two standard deviations."""
    return truncnorm.rvs(-2.0, 2.0, scale=std, size=shape, random_state=rng)


class Module:
    """
    Base class for everything that owns parameters.
    """

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError(f"{self.__class__.__name__} must implement forward()")

    def named_parameters(self, prefix=""):
        """Yield ``(dotted_name, parameter)`` pairs."""
        for key, value in vars(self).items():
            path = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{path}.")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{index}.")
                    elif isinstance(item, Parameter):
                        yield f"{path}.{index}", item

    def parameters(self):
        return [param for _, param in self.named_parameters()]

    def bind_names(self):
        """Store each parameter's dotted path on the parameter itself."""
        names = set()
        for name, param in self.named_parameters():
            if name in names:
                raise ConfigError(f"Duplicate parameter name {name}")
            names.add(name)
            param.name = name
        return self

    def num_parameters(self):
        return sum(param.size for param in self.parameters())

    def zero_grad(self):
        for param in self.parameters():
            param.grad = None

    def state_dict(self):
        return {name: param.data.copy() for name, param in self.named_parameters()}

    def load_state_dict(self, state):
        """
        Copy arrays into the matching parameters.

        Raises CheckpointError when names or shapes do not line up.
        """
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise CheckpointError(f"State does not match model: missing={missing}, unexpected={unexpected}")
        for name, param in own.items():
            array = np.asarray(state[name])
            if array.shape != param.shape:
                raise CheckpointError(f"Parameter {name} has shape {param.shape}, checkpoint has {array.shape}")
            param.data = array.astype(param.data.dtype, copy=True)


class Linear(Module):
    """
    ``y = x @ weight + bias`` with ``weight`` of shape (in, out).
    """

    def __init__(self, in_features, out_features, rng, bias=True, zero_init=False):
        if zero_init:
            self.weight = Parameter(np.zeros((in_features, out_features)))
        else:
            self.weight = Parameter(truncated_normal(rng, (in_features, out_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None
        self.in_features = in_features
        self.out_features = out_features

    def forward(self, x):
        x = T.as_tensor(x)
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"Linear expects last dimension {self.in_features}, got input of shape {x.shape}")
        out = x @ self.weight
        if self.bias is not None:
            out = out + self.bias
        return out


class LayerNorm(Module):
    """
    Per-token normalization over the last axis.
    """

    def __init__(self, width, eps=1e-5, affine=True):
        self.eps = eps
        self.width = width
        self.weight = Parameter(np.ones(width)) if affine else None
        self.bias = Parameter(np.zeros(width)) if affine else None

    def forward(self, x):
        x = T.as_tensor(x)
        centered = x - T.mean(x, axis=-1, keepdims=True)
        variance = T.mean(centered * centered, axis=-1, keepdims=True)
        out = centered / T.sqrt(variance + self.eps)
        if self.weight is not None:
            out = out * self.weight + self.bias
        return out


class MLP(Module):
    """Two linear layers with a GELU between them."""

    def __init__(self, in_features, hidden, out_features, rng, zero_init_out=False):
        self.fc1 = Linear(in_features, hidden, rng)
        self.fc2 = Linear(hidden, out_features, rng, zero_init=zero_init_out)

    def forward(self, x):
        return self.fc2(T.gelu(self.fc1(x)))


def _split_heads(x, heads):
    lead = x.shape[:-2]
    tokens, width = x.shape[-2:]
    x = x.reshape(lead + (tokens, heads, width // heads))
    n = len(lead)
    return x.transpose(tuple(range(n)) + (n + 1, n, n + 2))


def _merge_heads(x):
    lead = x.shape[:-3]
    heads, tokens, head_dim = x.shape[-3:]
    n = len(lead)
    x = x.transpose(tuple(range(n)) + (n + 1, n, n + 2))
    return x.reshape(lead + (tokens, heads * head_dim))


class MultiHeadAttention(Module):
    """
    Scaled dot-product cross-attention.

    Queries come from one token set ``(..., Tq, width)`` and keys/values from
    another ``(..., Tk, kv_width)``. An optional boolean ``key_mask`` of shape
    ``(..., Tk)`` hides keys; a query whose keys are all hidden gets a zero
    context vector.
    """

    def __init__(self, width, heads, rng, kv_width=None):
        if heads < 1 or width % heads:
            raise ConfigError(f"Attention width {width} is not divisible by {heads} heads")
        kv_width = kv_width or width
        self.heads = heads
        self.width = width
        self.q_proj = Linear(width, width, rng)
        self.k_proj = Linear(kv_width, width, rng)
        self.v_proj = Linear(kv_width, width, rng)
        self.out_proj = Linear(width, width, rng)
        self.last_score_count = 0

    def forward(self, queries, keys, key_mask=None):
        q = _split_heads(self.q_proj(queries), self.heads)
        k = _split_heads(self.k_proj(keys), self.heads)
        v = _split_heads(self.v_proj(keys), self.heads)
        scale = 1.0 / math.sqrt(self.width // self.heads)
        scores = (q @ T.swapaxes(k, -1, -2)) * scale
        self.last_score_count = scores.size // self.heads

        any_valid = None
        if key_mask is not None:
            key_mask = np.asarray(key_mask, dtype=bool)
            lead = key_mask.shape[:-1]
            fill = np.where(key_mask, 0.0, MASK_FILL).reshape(lead + (1, 1, key_mask.shape[-1]))
            scores = scores + fill
            any_valid = key_mask.any(axis=-1).astype(float).reshape(lead + (1, 1, 1))

        context = T.softmax(scores, axis=-1) @ v
        if any_valid is not None:
            context = context * any_valid
        return self.out_proj(_merge_heads(context))


def _conv3d_forward(volume, weight, bias):
    """3×3×3, stride 1, zero padding; channels-last."""
    depth, height, width, channels = volume.shape
    padded = np.pad(volume, ((1, 1), (1, 1), (1, 1), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3, 3), axis=(0, 1, 2))
    # (D, H, W, C, 3, 3, 3) -> (D·H·W, 27·C) ordered as (kd, kh, kw, c)
    columns = windows.transpose(0, 1, 2, 4, 5, 6, 3).reshape(depth * height * width, 27 * channels)
    out = columns @ weight.reshape(27 * channels, -1) + bias
    return out.reshape(depth, height, width, -1), columns


class Conv3d(Module):
    """
    Channels-last 3D convolution, kernel 3, stride 1, zero padding 1.

    ``weight`` has shape (3, 3, 3, in, out).
    """

    def __init__(self, in_channels, out_channels, rng, zero_init=False):
        shape = (3, 3, 3, in_channels, out_channels)
        self.weight = Parameter(np.zeros(shape) if zero_init else truncated_normal(rng, shape))
        self.bias = Parameter(np.zeros(out_channels))
        self.in_channels = in_channels

    def forward(self, volume):
        volume = T.as_tensor(volume)
        if volume.ndim != 4 or volume.shape[-1] != self.in_channels:
            raise ShapeError(f"Conv3d expects (D, H, W, {self.in_channels}), got {volume.shape}")
        weight, bias = self.weight, self.bias
        out, columns = _conv3d_forward(volume.data, weight.data, bias.data)
        depth, height, width, channels = volume.shape

        def backward(grad):
            flat = grad.reshape(-1, grad.shape[-1])
            grad_weight = (columns.T @ flat).reshape(weight.shape)
            grad_bias = flat.sum(axis=0)
            grad_columns = (flat @ weight.data.reshape(27 * channels, -1).T).reshape(
                depth, height, width, 3, 3, 3, channels
            )
            grad_padded = np.zeros((depth + 2, height + 2, width + 2, channels), dtype=grad.dtype)
            for a in range(3):
                for b in range(3):
                    for c in range(3):
                        grad_padded[a:a + depth, b:b + height, c:c + width] += grad_columns[:, :, :, a, b, c]
            return grad_padded[1:-1, 1:-1, 1:-1], grad_weight, grad_bias

        return make_op(out, (volume, weight, bias), backward, "conv3d")


class ConvTranspose3d(Module):
    """
    Channels-last transposed 3D convolution with kernel 2 and stride 2.

    Every input voxel writes a disjoint 2×2×2 output block, so each spatial
    side doubles.
    """

    def __init__(self, in_channels, out_channels, rng):
        self.weight = Parameter(truncated_normal(rng, (in_channels, 8 * out_channels)))
        self.bias = Parameter(np.zeros(out_channels))
        self.out_channels = out_channels

    def forward(self, volume):
        volume = T.as_tensor(volume)
        if volume.ndim != 4:
            raise ShapeError(f"ConvTranspose3d expects a (D, H, W, C) volume, got {volume.shape}")
        depth, height, width, channels = volume.shape
        blocks = volume.reshape(depth * height * width, channels) @ self.weight
        blocks = blocks.reshape(depth, height, width, 2, 2, 2, self.out_channels)
        out = blocks.transpose(0, 3, 1, 4, 2, 5, 6).reshape(2 * depth, 2 * height, 2 * width, self.out_channels)
        return out + self.bias
