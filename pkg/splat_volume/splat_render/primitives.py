"""
2D Gaussian surfel primitives and their tangent frames.
"""
from collections import namedtuple

import numpy as np

from splat_volume.exceptions import GeometryError, RenderError
from splat_volume.numerics import tensor as T

Frame = namedtuple("Frame", ["t_u", "t_v", "n"])
Intersection = namedtuple("Intersection", ["u", "v", "z", "G"])

FIELDS = ("p", "q", "s", "alpha", "sh")


def _quaternion_columns(w, x, y, z):
    t_u = (1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y))
    t_v = (2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x))
    n = (2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y))
    return t_u, t_v, n


def build_frame(q):
    """
    Tangent frame ``(t_u, t_v, n)`` of quaternion(s) ``q = (w, x, y, z)``, shape (..., 4).

    The quaternion is normalized first; the three vectors are the columns of
    its rotation matrix, so ``n = t_u × t_v``.
    """
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise GeometryError("Cannot build a frame from a zero quaternion")
    w, x, y, z = np.moveaxis(q / norm, -1, 0)
    return Frame(*(np.stack(column, axis=-1) for column in _quaternion_columns(w, x, y, z)))


def build_frame_tensor(q):
    """:func:`build_frame` over an (N, 4) tensor, differentiable in ``q``."""
    q = T.normalize(T.as_tensor(q), axis=-1, eps=0.0)
    w, x, y, z = q[:, 0:1], q[:, 1:2], q[:, 2:3], q[:, 3:4]
    return Frame(*(T.concat(list(column), axis=-1) for column in _quaternion_columns(w, x, y, z)))


class SplatSet:
    """
    A batch of N surfels.

    Fields are numpy arrays or tensors: ``p`` (N, 3) centers, ``q`` (N, 4)
    unit quaternions, ``s`` (N, 2) positive scales, ``alpha`` (N,) opacities and
    ``sh`` (N, 3, n) SH coefficients.
    """

    def __init__(self, p, q, s, alpha, sh, sh_order=2):
        self.p = p
        self.q = q
        self.s = s
        self.alpha = alpha
        self.sh = sh
        self.sh_order = sh_order

    def __len__(self):
        return int(np.shape(_data(self.p))[0])

    def __repr__(self):
        return f"SplatSet({len(self)} splats, sh_order={self.sh_order})"

    def fields(self):
        return {name: getattr(self, name) for name in FIELDS}

    def arrays(self):
        """Plain float64 arrays of every field."""
        return {name: np.asarray(_data(value), dtype=np.float64) for name, value in self.fields().items()}

    def detached(self):
        return SplatSet(**self.arrays(), sh_order=self.sh_order)

    def as_leaves(self):
        """Copy with every field as a fresh tensor that requires grad."""
        return SplatSet(
            **{name: T.Tensor(value, requires_grad=True) for name, value in self.arrays().items()},
            sh_order=self.sh_order,
        )

    def with_sh(self, sh):
        return SplatSet(self.p, self.q, self.s, self.alpha, sh, sh_order=self.sh_order)

    def subset(self, index):
        index = np.asarray(index)
        return SplatSet(
            **{name: _take(value, index) for name, value in self.fields().items()},
            sh_order=self.sh_order,
        )

    def validate(self):
        """Raise RenderError naming the first splat with a non-finite or out-of-range field."""
        arrays = self.arrays()
        count = len(self)
        for name, array in arrays.items():
            if array.shape[0] != count:
                raise RenderError(f"Splat field {name} has {array.shape[0]} rows, expected {count}")
            bad = ~np.isfinite(array.reshape(count, -1)).all(axis=1)
            if bad.any():
                raise RenderError(f"Splat {int(np.flatnonzero(bad)[0])} has a non-finite {name}")
        bad = (arrays["s"] <= 0).any(axis=1)
        if bad.any():
            raise RenderError(f"Splat {int(np.flatnonzero(bad)[0])} has a non-positive scale")
        bad = (arrays["alpha"] < 0) | (arrays["alpha"] > 1)
        if bad.any():
            raise RenderError(f"Splat {int(np.flatnonzero(bad)[0])} has opacity outside [0, 1]")
        if (np.linalg.norm(arrays["q"], axis=1) == 0).any():
            raise RenderError(f"Splat {int(np.flatnonzero(np.linalg.norm(arrays['q'], axis=1) == 0)[0])} "
                              "has a zero quaternion")


def _data(value):
    return value.data if isinstance(value, T.Tensor) else value


def _take(value, index):
    if isinstance(value, T.Tensor):
        return value[index]
    return np.asarray(value)[index]


def ray_splat_intersect(p, q, s, origin, direction, near=0.01, grazing_epsilon=1e-6,
                        min_contribution=1.0 / 255.0, forward=None):
    """
    Intersect one ray with one surfel.

    Returns an :class:`Intersection` ``(u, v, z, G)`` with ``(u, v)`` the hit
    in scale-normalized plane coordinates and ``G = exp(-(u²+v²)/2)``, or
    ``None`` for grazing rays, hits at or before ``near`` and hits with
    ``G < min_contribution``. ``z`` is the distance along the ray, or the depth
    along ``forward`` when a camera axis is given.
    """
    frame = build_frame(q)
    p = np.asarray(p, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    denom = float(direction @ frame.n)
    if abs(denom) < grazing_epsilon:
        return None
    t = float((p - origin) @ frame.n) / denom
    z = t if forward is None else t * float(direction @ np.asarray(forward, dtype=np.float64))
    if z <= near:
        return None
    offset = origin + t * direction - p
    u = float(offset @ frame.t_u) / s[0]
    v = float(offset @ frame.t_v) / s[1]
    G = float(np.exp(-0.5 * (u * u + v * v)))
    if G < min_contribution:
        return None
    return Intersection(u, v, z, G)
