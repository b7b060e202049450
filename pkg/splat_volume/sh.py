"""
Real spherical harmonics up to order 2 for view-dependent splat color.
"""
import numpy as np

from splat_volume.exceptions import ConfigError
from splat_volume.numerics import tensor as T

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SUPPORTED_ORDERS = (0, 2)
COLOR_OFFSET = 0.5


def coefficient_count(order):
    check_order(order)
    return (order + 1) ** 2


def check_order(order):
    if order not in SUPPORTED_ORDERS:
        raise ConfigError(f"Unsupported SH order {order}, expected one of {SUPPORTED_ORDERS}")


def sh_basis(dirs, order=2):
    """
    Evaluate the real SH basis at unit directions (..., 3).

    Returns a tensor (..., (order+1)²) ordered DC, band 1 (y, z, x), band 2.
    """
    check_order(order)
    dirs = T.as_tensor(dirs)
    x, y, z = dirs[..., 0:1], dirs[..., 1:2], dirs[..., 2:3]
    dc = T.as_tensor(np.full(dirs.shape[:-1] + (1,), SH_C0))
    if order == 0:
        return dc
    terms = [
        dc,
        y * -SH_C1,
        z * SH_C1,
        x * -SH_C1,
        x * y * SH_C2[0],
        y * z * SH_C2[1],
        (z * z * 2.0 - x * x - y * y) * SH_C2[2],
        x * z * SH_C2[3],
        (x * x - y * y) * SH_C2[4],
    ]
    return T.concat(terms, axis=-1)


def sh_eval(coeffs, dirs, order=2):
    """
    RGB from SH coefficients (..., 3, n) at unit directions (..., 3).

    The basis dot product is offset by +0.5 and clamped to [0, 1]. Only the
    first (order+1)² coefficients of each channel are used.
    """
    count = coefficient_count(order)
    coeffs = T.as_tensor(coeffs)
    if coeffs.shape[-1] < count:
        raise ConfigError(f"SH order {order} needs {count} coefficients per channel, got {coeffs.shape[-1]}")
    if coeffs.shape[-1] > count:
        coeffs = coeffs[..., :count]
    basis = sh_basis(dirs, order)
    basis = basis.reshape(basis.shape[:-1] + (1, count))
    rgb = T.tensor_sum(coeffs * basis, axis=-1) + COLOR_OFFSET
    return T.clamp(rgb, 0.0, 1.0)
