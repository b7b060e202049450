"""
Brute-force per-pixel compositing, used to validate the tile rasterizer.

Every pixel ray is tested against every splat with no tiling; the only
culling is the grazing test, the near plane and the ``G`` contribution cutoff.
"""
import numpy as np

from splat_volume.geometry import pixel_centers, pixel_directions
from splat_volume.sh import sh_eval
from splat_volume.splat_render.primitives import build_frame, ray_splat_intersect
from splat_volume.utils import get_render_config


def reference_render(splats, cam, background=None, config=None):
    """
    Return a dict of numpy buffers ``rgb, depth, alpha, normal``.

    Intersections are composited in (depth, splat id) order until
    transmittance drops below ``config.min_transmittance``.
    """
    config = config or get_render_config()
    background = np.asarray(config.background if background is None else background, dtype=np.float64)
    arrays = splats.arrays()
    count = len(splats)
    origin = cam.center
    directions = pixel_directions(cam, pixel_centers(cam.width, cam.height))
    if count:
        normals = build_frame(arrays["q"]).n
        view = arrays["p"] - origin
        view /= np.linalg.norm(view, axis=1, keepdims=True)
        colors = sh_eval(arrays["sh"], view, order=splats.sh_order).data

    rgb = np.zeros((cam.height, cam.width, 3))
    depth = np.zeros((cam.height, cam.width))
    alpha = np.zeros((cam.height, cam.width))
    normal = np.zeros((cam.height, cam.width, 3))
    for row in range(cam.height):
        for col in range(cam.width):
            direction = directions[row, col]
            hits = []
            for index in range(count):
                hit = ray_splat_intersect(
                    arrays["p"][index], arrays["q"][index], arrays["s"][index], origin, direction,
                    near=config.near_plane, grazing_epsilon=config.grazing_epsilon,
                    min_contribution=config.min_contribution, forward=cam.forward,
                )
                if hit is not None:
                    hits.append((hit.z, index, hit.G))
            hits.sort()

            transmittance = 1.0
            color = np.zeros(3)
            weighted_depth = 0.0
            weighted_normal = np.zeros(3)
            total = 0.0
            for z, index, G in hits:
                if transmittance < config.min_transmittance:
                    break
                opacity = arrays["alpha"][index] * G
                weight = opacity * transmittance
                n = normals[index] if direction @ normals[index] <= 0 else -normals[index]
                color += weight * colors[index]
                weighted_depth += weight * z
                weighted_normal += weight * n
                total += weight
                transmittance *= 1.0 - opacity
            rgb[row, col] = color + (1.0 - total) * background
            alpha[row, col] = total
            depth[row, col] = weighted_depth / max(total, config.depth_epsilon)
            normal[row, col] = weighted_normal
    return {"rgb": rgb, "depth": depth, "alpha": alpha, "normal": normal}
