"""
Procedural scenes and the analytic ray tracer that renders them.

A scene is a union of textured spheres, boxes and tori inside the canonical
box [-0.5, 0.5]³, lit by one directional light with Lambertian shading over a
white background.
"""
import logging
from collections import namedtuple

import numpy as np

from splat_volume.exceptions import ConfigError
from splat_volume.geometry import camera_rays

log = logging.getLogger(__name__)

LIGHT_DIRECTION = np.array([0.4, 0.3, 0.866])
AMBIENT = 0.35
BACKGROUND = np.ones(3)
CONTENT_EXTENT = 0.45
MARCH_STEPS = 128
MARCH_EPSILON = 1e-6

Hits = namedtuple("Hits", ["t", "normal"])
SceneView = namedtuple("SceneView", ["rgb", "depth", "alpha"])


class BaseTexture:
    """Albedo as a function of the surface point."""

    name = None

    def color(self, points):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    @classmethod
    def random(cls, rng):
        raise NotImplementedError


class CheckerTexture(BaseTexture):
    name = "checker"

    def __init__(self, color_a, color_b, frequency):
        self.color_a = np.asarray(color_a, dtype=np.float64)
        self.color_b = np.asarray(color_b, dtype=np.float64)
        self.frequency = float(frequency)

    def color(self, points):
        parity = np.floor(points * self.frequency).sum(axis=-1).astype(np.int64) % 2
        return np.where(parity[..., None] == 0, self.color_a, self.color_b)

    def to_dict(self):
        return {"name": self.name, "color_a": self.color_a.tolist(), "color_b": self.color_b.tolist(),
                "frequency": self.frequency}

    @classmethod
    def random(cls, rng):
        return cls(rng.uniform(0.05, 0.95, 3), rng.uniform(0.05, 0.95, 3), rng.uniform(4.0, 12.0))


class GradientTexture(BaseTexture):
    name = "gradient"

    def __init__(self, color_a, color_b, axis):
        self.color_a = np.asarray(color_a, dtype=np.float64)
        self.color_b = np.asarray(color_b, dtype=np.float64)
        self.axis = np.asarray(axis, dtype=np.float64) / np.linalg.norm(axis)

    def color(self, points):
        mix = np.clip(points @ self.axis + 0.5, 0.0, 1.0)[..., None]
        return (1.0 - mix) * self.color_a + mix * self.color_b

    def to_dict(self):
        return {"name": self.name, "color_a": self.color_a.tolist(), "color_b": self.color_b.tolist(),
                "axis": self.axis.tolist()}

    @classmethod
    def random(cls, rng):
        return cls(rng.uniform(0.05, 0.95, 3), rng.uniform(0.05, 0.95, 3), rng.normal(size=3))


class NoiseTexture(BaseTexture):
    """Smooth band-limited noise: a base color modulated by a few random sinusoids."""

    name = "noise"

    def __init__(self, base, amplitude, frequencies, phases):
        self.base = np.asarray(base, dtype=np.float64)
        self.amplitude = float(amplitude)
        self.frequencies = np.asarray(frequencies, dtype=np.float64).reshape(-1, 3)
        self.phases = np.asarray(phases, dtype=np.float64).reshape(-1)

    def color(self, points):
        waves = np.sin(points @ self.frequencies.T + self.phases).mean(axis=-1, keepdims=True)
        return np.clip(self.base + self.amplitude * waves, 0.0, 1.0)

    def to_dict(self):
        return {"name": self.name, "base": self.base.tolist(), "amplitude": self.amplitude,
                "frequencies": self.frequencies.tolist(), "phases": self.phases.tolist()}

    @classmethod
    def random(cls, rng):
        return cls(rng.uniform(0.2, 0.8, 3), rng.uniform(0.1, 0.3), rng.normal(0.0, 12.0, (4, 3)),
                   rng.uniform(0.0, 2.0 * np.pi, 4))


class BaseShape:
    """
    A solid with an analytic ray intersection.

    ``intersect`` returns :class:`Hits` with ``t = inf`` where the ray misses.
    """

    name = None

    def __init__(self, texture):
        self.texture = texture

    def intersect(self, origin, dirs):
        raise NotImplementedError

    def sdf(self, points):
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    def to_dict(self):
        return {"name": self.name, "texture": self.texture.to_dict(), **self.params()}

    @classmethod
    def random(cls, rng, texture):
        raise NotImplementedError


class Sphere(BaseShape):
    name = "sphere"

    def __init__(self, center, radius, texture):
        super().__init__(texture)
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)

    def intersect(self, origin, dirs):
        offset = origin - self.center
        b = dirs @ offset
        c = offset @ offset - self.radius ** 2
        disc = b * b - c
        root = np.sqrt(np.maximum(disc, 0.0))
        near, far = -b - root, -b + root
        t = np.where(near > 0, near, far)
        t = np.where((disc >= 0) & (t > 0), t, np.inf)
        points = origin + np.where(np.isfinite(t), t, 0.0)[..., None] * dirs
        return Hits(t, (points - self.center) / self.radius)

    def sdf(self, points):
        return np.linalg.norm(points - self.center, axis=-1) - self.radius

    def params(self):
        return {"center": self.center.tolist(), "radius": self.radius}

    @classmethod
    def random(cls, rng, texture):
        radius = rng.uniform(0.15, 0.35)
        center = rng.uniform(-CONTENT_EXTENT + radius, CONTENT_EXTENT - radius, 3)
        return cls(center, radius, texture)


class Box(BaseShape):
    """Axis-aligned box given by its center and half extents."""

    name = "box"

    def __init__(self, center, half_extents, texture):
        super().__init__(texture)
        self.center = np.asarray(center, dtype=np.float64)
        self.half_extents = np.asarray(half_extents, dtype=np.float64)

    def intersect(self, origin, dirs):
        safe = np.where(np.abs(dirs) < 1e-12, 1e-12, dirs)
        lo = (self.center - self.half_extents - origin) / safe
        hi = (self.center + self.half_extents - origin) / safe
        t_near = np.minimum(lo, hi)
        t_far = np.maximum(lo, hi)
        enter = t_near.max(axis=-1)
        leave = t_far.min(axis=-1)
        t = np.where(enter > 0, enter, leave)
        t = np.where((enter <= leave) & (t > 0), t, np.inf)
        axis = np.where(enter > 0, t_near.argmax(axis=-1), t_far.argmin(axis=-1))
        normal = np.zeros(dirs.shape)
        np.put_along_axis(normal, axis[..., None], -np.sign(np.take_along_axis(dirs, axis[..., None], -1)), -1)
        normal = np.where((enter > 0)[..., None], normal, -normal)
        return Hits(t, normal)

    def sdf(self, points):
        q = np.abs(points - self.center) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        return outside + np.minimum(q.max(axis=-1), 0.0)

    def params(self):
        return {"center": self.center.tolist(), "half_extents": self.half_extents.tolist()}

    @classmethod
    def random(cls, rng, texture):
        half_extents = rng.uniform(0.1, 0.28, 3)
        center = rng.uniform(-CONTENT_EXTENT + half_extents, CONTENT_EXTENT - half_extents)
        return cls(center, half_extents, texture)


class Torus(BaseShape):
    """Torus around the z axis, traced by marching its signed distance."""

    name = "torus"

    def __init__(self, center, major, minor, texture):
        super().__init__(texture)
        self.center = np.asarray(center, dtype=np.float64)
        self.major = float(major)
        self.minor = float(minor)

    def sdf(self, points):
        local = points - self.center
        ring = np.linalg.norm(local[..., :2], axis=-1) - self.major
        return np.sqrt(ring * ring + local[..., 2] ** 2) - self.minor

    def _normal(self, points):
        local = points - self.center
        radial = np.linalg.norm(local[..., :2], axis=-1, keepdims=True)
        ring_point = np.concatenate([local[..., :2] * self.major / np.maximum(radial, 1e-12),
                                     np.zeros(radial.shape)], axis=-1)
        normal = local - ring_point
        return normal / np.maximum(np.linalg.norm(normal, axis=-1, keepdims=True), 1e-12)

    def intersect(self, origin, dirs):
        bound = Sphere(self.center, self.major + self.minor, self.texture).intersect(origin, dirs).t
        t = np.where(np.isfinite(bound), bound, 0.0)
        active = np.isfinite(bound)
        hit = np.zeros(t.shape, dtype=bool)
        limit = bound + 2.0 * (self.major + self.minor)
        for _ in range(MARCH_STEPS):
            distance = self.sdf(origin + t[..., None] * dirs)
            hit |= active & (distance < MARCH_EPSILON)
            active &= ~hit & (t < limit)
            t = np.where(active, t + distance, t)
        t = np.where(hit, t, np.inf)
        points = origin + np.where(hit, t, 0.0)[..., None] * dirs
        return Hits(t, self._normal(points))

    def params(self):
        return {"center": self.center.tolist(), "major": self.major, "minor": self.minor}

    @classmethod
    def random(cls, rng, texture):
        major = rng.uniform(0.15, 0.25)
        minor = rng.uniform(0.05, 0.1)
        reach = np.array([major + minor, major + minor, minor])
        center = rng.uniform(-CONTENT_EXTENT + reach, CONTENT_EXTENT - reach)
        return cls(center, major, minor, texture)


def _registry(base):
    return {cls.name: cls for cls in base.__subclasses__() if cls.name}


def get_shape_by_name(name):
    shapes = _registry(BaseShape)
    if name not in shapes:
        raise ConfigError(f"Unknown shape {name!r}, expected one of {sorted(shapes)}")
    return shapes[name]


def get_texture_by_name(name):
    textures = _registry(BaseTexture)
    if name not in textures:
        raise ConfigError(f"Unknown texture {name!r}, expected one of {sorted(textures)}")
    return textures[name]


def texture_from_dict(data):
    data = dict(data)
    return get_texture_by_name(data.pop("name"))(**data)


def shape_from_dict(data):
    data = dict(data)
    shape_class = get_shape_by_name(data.pop("name"))
    texture = texture_from_dict(data.pop("texture"))
    return shape_class(texture=texture, **data)


class Scene:
    """A union of shapes."""

    def __init__(self, shapes, scene_id=""):
        self.shapes = list(shapes)
        self.scene_id = scene_id

    def __repr__(self):
        return f"Scene({self.scene_id!r}, {[shape.name for shape in self.shapes]})"

    def to_dict(self):
        return {"id": self.scene_id, "shapes": [shape.to_dict() for shape in self.shapes]}

    @classmethod
    def from_dict(cls, data):
        return cls([shape_from_dict(shape) for shape in data["shapes"]], data.get("id", ""))

    def sdf(self, points):
        return np.min([shape.sdf(points) for shape in self.shapes], axis=0)

    def trace(self, cam):
        """
        Render one view: RGB, camera-space depth along the forward axis and alpha.

        Missed pixels are white with depth 0 and alpha 0.
        """
        origin, dirs = camera_rays(cam)
        t = np.full(dirs.shape[:-1], np.inf)
        normal = np.zeros(dirs.shape)
        albedo = np.zeros(dirs.shape)
        for shape in self.shapes:
            hits = shape.intersect(origin, dirs)
            closer = hits.t < t
            t = np.where(closer, hits.t, t)
            normal = np.where(closer[..., None], hits.normal, normal)
            points = origin + np.where(np.isfinite(hits.t), hits.t, 0.0)[..., None] * dirs
            albedo = np.where(closer[..., None], shape.texture.color(points), albedo)

        hit = np.isfinite(t)
        light = LIGHT_DIRECTION / np.linalg.norm(LIGHT_DIRECTION)
        shading = AMBIENT + (1.0 - AMBIENT) * np.maximum(normal @ light, 0.0)
        rgb = np.where(hit[..., None], np.clip(albedo * shading[..., None], 0.0, 1.0), BACKGROUND)
        depth = np.where(hit, t, 0.0) * (dirs @ cam.forward)
        return SceneView(rgb, depth, hit.astype(np.float64))


def random_scene(rng, scene_id="", max_shapes=3):
    """1 to ``max_shapes`` random shapes, each with a random texture."""
    shape_classes = [get_shape_by_name(name) for name in ("sphere", "box", "torus")]
    texture_classes = [get_texture_by_name(name) for name in ("checker", "gradient", "noise")]
    shapes = []
    for _ in range(int(rng.integers(1, max_shapes + 1))):
        texture = texture_classes[int(rng.integers(len(texture_classes)))].random(rng)
        shapes.append(shape_classes[int(rng.integers(len(shape_classes)))].random(rng, texture))
    scene = Scene(shapes, scene_id)
    log.debug(f"Generated {scene}")
    return scene
