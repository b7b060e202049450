"""
Training objectives and evaluation metrics.

Losses take tensors and stay differentiable; metrics take arrays and return
plain floats.
"""
import logging
import math
from collections import namedtuple

import numpy as np

from splat_volume.exceptions import EmptyMaskError, ShapeError
from splat_volume.numerics import tensor as T

log = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
PSNR_CAP = 99.0
DEPTH_THRESHOLDS = (0.005, 0.01, 0.02)
METRIC_KEYS = ("psnr", "ssim", "depth_abs", "acc_005", "acc_01", "acc_02")

DepthMetrics = namedtuple("DepthMetrics", ["abs_err", "acc_005", "acc_01", "acc_02"])
LossBreakdown = namedtuple("LossBreakdown", ["total", "components"])


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    offsets = np.arange(size) - (size - 1) / 2.0
    weights = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def _band_matrix(length, window):
    """(length - size + 1, length) matrix applying ``window`` at every valid position."""
    size = len(window)
    rows = length - size + 1
    band = np.zeros((rows, length))
    for row in range(rows):
        band[row, row:row + size] = window
    return band


def _blur(channels, rows_band, cols_band):
    return rows_band @ channels @ cols_band.T


def ssim(x, y):
    """
    Mean structural similarity of two (H, W, 3) images in [0, 1].

    An 11×11 Gaussian window (σ = 1.5) is applied only where it fits inside
    the image; population statistics, standard constants. Images smaller than
    the window use a window as wide as their shorter side, renormalized.
    """
    x, y = T.as_tensor(x), T.as_tensor(y)
    if x.shape != y.shape:
        raise ShapeError(f"SSIM inputs differ in shape: {x.shape} vs {y.shape}")
    height, width = x.shape[:2]
    window = gaussian_window(size=min(SSIM_WINDOW, height, width))
    rows_band = _band_matrix(height, window)
    cols_band = _band_matrix(width, window)
    xc = x.transpose(2, 0, 1)
    yc = y.transpose(2, 0, 1)
    mu_x = _blur(xc, rows_band, cols_band)
    mu_y = _blur(yc, rows_band, cols_band)
    var_x = _blur(xc * xc, rows_band, cols_band) - mu_x * mu_x
    var_y = _blur(yc * yc, rows_band, cols_band) - mu_y * mu_y
    cov = _blur(xc * yc, rows_band, cols_band) - mu_x * mu_y
    numerator = (mu_x * mu_y * 2.0 + SSIM_C1) * (cov * 2.0 + SSIM_C2)
    denominator = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return T.mean(numerator / denominator)


def mse(render, target):
    render, target = T.as_tensor(render), T.as_tensor(target)
    if render.shape != target.shape:
        raise ShapeError(f"Render shape {render.shape} does not match target shape {target.shape}")
    diff = render - target
    return T.mean(diff * diff)


def recon_loss(render, target):
    """``MSE + (1 - SSIM)``; returns ``(loss, mse, ssim)`` tensors."""
    error = mse(render, target)
    similarity = ssim(render, target)
    return error + (1.0 - similarity), error, similarity


def distortion_loss(intersections, exact=True):
    """
    ``Σ_i Σ_j ω_i ω_j |z_i - z_j|`` per ray, averaged over rays.

    The exact form evaluates every pair. The fast form uses running sums,
    ``2 Σ_i ω_i (z_i W_<i - A_<i)`` with ``W`` the weight prefix and ``A`` the
    weighted-depth prefix; it needs depths sorted along each ray, which
    rasterizer output is.
    """
    weights = T.as_tensor(intersections.weights)
    z = T.as_tensor(intersections.z)
    rays = weights.shape[0]
    if weights.shape[-1] == 0:
        return T.Tensor(0.0)
    if exact:
        length = weights.shape[1]
        gaps = T.absolute(z.reshape(rays, length, 1) - z.reshape(rays, 1, length))
        pairs = weights.reshape(rays, length, 1) * weights.reshape(rays, 1, length) * gaps
        return T.tensor_sum(pairs) / rays
    weight_prefix = T.cumsum(weights, axis=1, exclusive=True)
    depth_prefix = T.cumsum(weights * z, axis=1, exclusive=True)
    return T.tensor_sum(weights * (z * weight_prefix - depth_prefix)) * 2.0 / rays


def depth_normals(depth, cam):
    """
    World-space normals (H, W, 3) of the surface implied by a depth map.

    Pixel centers are back-projected into camera space, tangents are central
    differences with replicated borders, and every normal is flipped to face
    the camera.
    """
    depth = T.as_tensor(depth)
    height, width = depth.shape
    cols, rows = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    K = cam.K
    ray_y = (rows - K[1, 2]) / K[1, 1]
    ray_x = (cols - K[0, 2] - K[0, 1] * ray_y) / K[0, 0]
    rays = np.stack([ray_x, ray_y, np.ones_like(ray_x)], axis=-1)
    points = depth.reshape(height, width, 1) * rays

    padded_x = T.concat([points[:, :1], points, points[:, -1:]], axis=1)
    padded_y = T.concat([points[:1], points, points[-1:]], axis=0)
    tangent_x = padded_x[:, 2:] - padded_x[:, :-2]
    tangent_y = padded_y[2:] - padded_y[:-2]
    normals = T.normalize(T.cross(tangent_x, tangent_y), axis=-1)
    facing = np.where((normals.data * points.data).sum(-1, keepdims=True) > 0, -1.0, 1.0)
    return (normals * facing) @ cam.R


def normal_consistency_loss(intersections, normal_map):
    """
    ``Σ_i ω_i (1 - n_i·N)`` per ray, averaged over rays.

    ``normal_map`` is (P, 3) or (H, W, 3); intersection normals are already
    oriented toward the camera.
    """
    weights = T.as_tensor(intersections.weights)
    rays = weights.shape[0]
    if weights.shape[-1] == 0:
        return T.Tensor(0.0)
    normal_map = T.as_tensor(normal_map).reshape(rays, 1, 3)
    alignment = T.dot(T.as_tensor(intersections.normals), normal_map)
    return T.tensor_sum(weights * (1.0 - alignment)) / rays


def regularization_active(weights, epoch):
    return weights.reg_enabled and epoch >= weights.reg_start_epoch


def total_loss(coarse, fine, targets, intersections, weights, epoch, cams=None):
    """
    ``recon(coarse) + recon(fine) + γ_d·L_d + γ_n·L_n`` summed over views.

    ``coarse``/``fine`` are lists of :class:`RenderBuffers`, ``targets`` the
    matching (H, W, 3) images and ``intersections`` the fine-pass
    :class:`RayIntersections` (with ``cams`` for depth normals). The
    regularizer is skipped entirely before ``weights.reg_start_epoch``.
    Returns a :class:`LossBreakdown` with named float components.
    """
    total = None
    components = {key: 0.0 for key in ("mse_coarse", "ssim_coarse", "mse_fine", "ssim_fine", "distortion",
                                       "normal", "reg")}
    for stage, buffers_list in (("coarse", coarse), ("fine", fine)):
        for buffers, target in zip(buffers_list, targets):
            loss, error, similarity = recon_loss(buffers.rgb, target)
            total = loss if total is None else total + loss
            components[f"mse_{stage}"] += error.item()
            components[f"ssim_{stage}"] += similarity.item()

    if regularization_active(weights, epoch) and intersections:
        for index, hits in enumerate(intersections):
            distortion = distortion_loss(hits, exact=False)
            normal_map = depth_normals(fine[index].depth, cams[index])
            normal = normal_consistency_loss(hits, normal_map)
            reg = distortion * weights.gamma_d + normal * weights.gamma_n
            total = reg if total is None else total + reg
            components["distortion"] += distortion.item()
            components["normal"] += normal.item()
            components["reg"] += reg.item()

    total = total if total is not None else T.Tensor(0.0)
    components["total"] = total.item()
    return LossBreakdown(total, components)


def psnr(pred, gt):
    """PSNR in dB for [0, 1] images, capped at 99."""
    error = float(np.mean((np.asarray(pred, dtype=np.float64) - np.asarray(gt, dtype=np.float64)) ** 2))
    if error <= 0:
        return PSNR_CAP
    return min(10.0 * math.log10(1.0 / error), PSNR_CAP)


def image_metrics(pred, gt):
    """Return ``(psnr, ssim)``."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"Prediction shape {pred.shape} does not match ground truth {gt.shape}")
    with T.no_grad():
        similarity = ssim(pred, gt).item()
    return psnr(pred, gt), similarity


def depth_metrics(pred_depth, gt_depth, mask):
    """
    Mean absolute depth error and the percentage of masked pixels under each threshold.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMaskError("empty mask: no pixels to evaluate depth on")
    error = np.abs(np.asarray(pred_depth, dtype=np.float64) - np.asarray(gt_depth, dtype=np.float64))[mask]
    accuracy = [100.0 * float(np.mean(error < threshold)) for threshold in DEPTH_THRESHOLDS]
    return DepthMetrics(float(error.mean()), *accuracy)


def metrics_report(pred_rgb, gt_rgb, pred_depth, gt_depth, mask):
    """One metrics record with the keys of :data:`METRIC_KEYS`."""
    psnr_value, ssim_value = image_metrics(pred_rgb, gt_rgb)
    depth = depth_metrics(pred_depth, gt_depth, mask)
    return {
        "psnr": psnr_value,
        "ssim": ssim_value,
        "depth_abs": depth.abs_err,
        "acc_005": depth.acc_005,
        "acc_01": depth.acc_01,
        "acc_02": depth.acc_02,
    }


def aggregate_metrics(records):
    """Per-key mean of metric records."""
    if not records:
        return {key: None for key in METRIC_KEYS}
    return {key: float(np.mean([record[key] for record in records])) for key in METRIC_KEYS}
