"""
Tests for surfel frames, splat sets and ray-surfel intersection.
"""
import math

import numpy as np
import pytest

from splat_volume.exceptions import GeometryError, RenderError
from splat_volume.splat_render.primitives import SplatSet, build_frame, build_frame_tensor, ray_splat_intersect
from test_utils.helpers import random_splats

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def test_identity_frame():
    frame = build_frame(IDENTITY)
    np.testing.assert_allclose(frame.t_u, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(frame.t_v, [0.0, 1.0, 0.0])
    np.testing.assert_allclose(frame.n, [0.0, 0.0, 1.0])


def test_quarter_turn_about_z():
    half = math.pi / 4.0
    frame = build_frame([math.cos(half), 0.0, 0.0, math.sin(half)])
    np.testing.assert_allclose(frame.t_u, [0.0, 1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(frame.t_v, [-1.0, 0.0, 0.0], atol=1e-12)


def test_frames_are_orthonormal_and_right_handed():
    q = np.random.default_rng(0).normal(size=(200, 4))
    frame = build_frame(q)
    basis = np.stack([frame.t_u, frame.t_v, frame.n], axis=-1)
    np.testing.assert_allclose(np.einsum("nji,njk->nik", basis, basis), np.broadcast_to(np.eye(3), (200, 3, 3)),
                               atol=1e-12)
    np.testing.assert_allclose(np.cross(frame.t_u, frame.t_v), frame.n, atol=1e-12)


def test_unnormalized_quaternion():
    np.testing.assert_allclose(build_frame(3.0 * IDENTITY).n, [0.0, 0.0, 1.0])


def test_zero_quaternion():
    with pytest.raises(GeometryError):
        build_frame(np.zeros(4))


def test_tensor_frame_matches():
    q = np.random.default_rng(1).normal(size=(5, 4))
    expected = build_frame(q)
    actual = build_frame_tensor(q)
    for name in ("t_u", "t_v", "n"):
        np.testing.assert_allclose(getattr(actual, name).data, getattr(expected, name), atol=1e-12)


class TestIntersection:
    p = np.array([0.0, 0.0, 2.0])
    s = np.array([0.2, 0.3])

    def test_head_on(self):
        hit = ray_splat_intersect(self.p, IDENTITY, self.s, np.zeros(3), np.array([0.0, 0.0, 1.0]))
        assert hit.u == pytest.approx(0.0)
        assert hit.v == pytest.approx(0.0)
        assert hit.z == pytest.approx(2.0)
        assert hit.G == pytest.approx(1.0)

    def test_one_scale_off_center(self):
        hit = ray_splat_intersect(self.p, IDENTITY, self.s, np.array([0.2, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
        assert hit.u == pytest.approx(1.0)
        assert hit.G == pytest.approx(math.exp(-0.5))

    def test_grazing_ray(self):
        assert ray_splat_intersect(self.p, IDENTITY, self.s, np.zeros(3), np.array([1.0, 0.0, 0.0])) is None

    def test_behind_the_near_plane(self):
        assert ray_splat_intersect(-self.p, IDENTITY, self.s, np.zeros(3), np.array([0.0, 0.0, 1.0])) is None

    def test_below_min_contribution(self):
        origin = np.array([1.0, 0.0, 0.0])
        assert ray_splat_intersect(self.p, IDENTITY, self.s, origin, np.array([0.0, 0.0, 1.0])) is None

    def test_depth_along_forward_axis(self):
        direction = np.array([0.6, 0.0, 0.8])
        hit = ray_splat_intersect(
            np.array([1.5, 0.0, 2.0]), IDENTITY, np.array([1.0, 1.0]), np.zeros(3), direction,
            forward=np.array([0.0, 0.0, 1.0]),
        )
        assert hit.z == pytest.approx(2.0)


class TestSplatSet:
    def test_subset_and_detached(self):
        splats = random_splats(np.random.default_rng(0), 6).as_leaves()
        subset = splats.subset([1, 4])
        assert len(subset) == 2
        np.testing.assert_allclose(subset.arrays()["p"], splats.arrays()["p"][[1, 4]])
        assert not isinstance(splats.detached().p, type(splats.p))

    def test_validate_names_the_splat(self):
        splats = random_splats(np.random.default_rng(0), 4)
        splats.s[2, 1] = -0.1
        with pytest.raises(RenderError) as error:
            splats.validate()
        assert "Splat 2" in str(error.value)

    def test_validate_non_finite(self):
        splats = random_splats(np.random.default_rng(0), 4)
        splats.sh[3, 0, 0] = np.nan
        with pytest.raises(RenderError) as error:
            splats.validate()
        assert "Splat 3" in str(error.value)

    def test_validate_opacity_range(self):
        splats = random_splats(np.random.default_rng(0), 3)
        splats.alpha[0] = 1.5
        with pytest.raises(RenderError):
            splats.validate()

    def test_validate_zero_quaternion(self):
        splats = random_splats(np.random.default_rng(0), 3)
        splats.q[1] = 0.0
        with pytest.raises(RenderError):
            splats.validate()

    def test_field_rows_must_agree(self):
        splats = random_splats(np.random.default_rng(0), 3)
        with pytest.raises(RenderError):
            SplatSet(splats.p, splats.q[:2], splats.s, splats.alpha, splats.sh).validate()
