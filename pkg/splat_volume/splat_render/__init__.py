"""
Differentiable 2D Gaussian surfel rendering.
"""
from splat_volume.splat_render.primitives import SplatSet, build_frame, ray_splat_intersect  # noqa: F401
from splat_volume.splat_render.rasterizer import (  # noqa: F401
    RayIntersections,
    RenderBuffers,
    rasterize,
    rasterize_grad,
)
