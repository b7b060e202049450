"""
Tests for cameras, rays, projection, lifting and camera clustering.
"""
from unittest.mock import patch

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from splat_volume import geometry
from splat_volume.exceptions import GeometryError
from splat_volume.geometry import (
    Camera,
    VoxelGrid,
    bilinear_gather,
    intrinsics,
    kmeans_cluster_cameras,
    lift_features,
    look_at,
    plucker_map,
    plucker_ray,
    project_point,
    unproject,
)
from splat_volume.numerics import tensor as T
from test_utils.helpers import front_camera, identity_camera, ring_cameras


def camera_at(center, rotation=np.eye(3), size=128, focal=100.0):
    w2c = np.eye(4)
    w2c[:3, :3] = rotation
    w2c[:3, 3] = -rotation @ np.asarray(center, dtype=np.float64)
    return Camera(intrinsics(focal, size, size), w2c, size, size)


def point_grid(point):
    """A single-voxel grid whose center is ``point``."""
    point = np.asarray(point, dtype=np.float64)
    return VoxelGrid(1, point - 0.01, point + 0.01)


class TestPluckerRay:
    def test_principal_point_through_origin(self):
        ray = plucker_ray(identity_camera(), (64.0, 64.0))
        np.testing.assert_allclose(ray.d, [0.0, 0.0, 1.0])
        np.testing.assert_allclose(ray.m, [0.0, 0.0, 0.0])

    def test_offset_center_moment(self):
        ray = plucker_ray(camera_at((1.0, 0.0, 0.0)), (64.0, 64.0))
        np.testing.assert_allclose(ray.d, [0.0, 0.0, 1.0])
        np.testing.assert_allclose(ray.m, np.cross([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]))

    def test_invariant_along_the_ray(self):
        rng = np.random.default_rng(0)
        pixels = rng.uniform(0.0, 128.0, size=(1000, 2))
        base = plucker_ray(identity_camera(), pixels)
        for step in (0.5, -2.0, 7.0):
            moved = [plucker_ray(camera_at(step * d), pixel) for d, pixel in zip(base.d[:20], pixels[:20])]
            np.testing.assert_allclose([ray.d for ray in moved], base.d[:20], atol=1e-9)
            np.testing.assert_allclose([ray.m for ray in moved], base.m[:20], atol=1e-9)

    def test_rigid_world_transform(self):
        rng = np.random.default_rng(1)
        for seed in range(10):
            cam = camera_at(rng.normal(size=3), Rotation.random(random_state=seed).as_matrix())
            pixels = rng.uniform(0.0, 128.0, size=(100, 2))
            rotation = Rotation.random(random_state=100 + seed).as_matrix()
            shift = rng.normal(size=3)
            world = np.eye(4)
            world[:3, :3] = rotation
            world[:3, 3] = shift
            moved = Camera(cam.K, cam.w2c @ np.linalg.inv(world), cam.width, cam.height)

            before = plucker_ray(cam, pixels)
            after = plucker_ray(moved, pixels)
            rotated = before.d @ rotation.T
            np.testing.assert_allclose(after.d, rotated, atol=1e-9)
            np.testing.assert_allclose(after.m, before.m @ rotation.T + np.cross(shift, rotated), atol=1e-9)

    def test_zero_focal(self):
        cam = Camera(np.diag([0.0, 0.0, 1.0]), np.eye(4), 16, 16, validate=False)
        with pytest.raises(GeometryError):
            plucker_ray(cam, (8.0, 8.0))

    def test_map_shape(self):
        assert plucker_map(front_camera(size=32), 8).shape == (4, 4, 6)


class TestProjection:
    def test_optical_axis(self):
        projection = project_point(np.array([0.0, 0.0, 2.0]), identity_camera())
        assert (projection.u, projection.v, projection.z) == (64.0, 64.0, 2.0)
        assert projection.valid

    def test_hand_pinhole(self):
        projection = project_point(np.array([-0.1, 0.2, 1.0]), identity_camera())
        assert projection.u == pytest.approx(54.0)
        assert projection.v == pytest.approx(84.0)

    def test_behind_camera_is_flagged(self):
        projection = project_point(np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1e-9]]), identity_camera())
        assert not projection.valid.any()

    def test_round_trip(self):
        cam = front_camera(size=64, focal=50.0)
        pixels = np.random.default_rng(0).uniform(0.0, 64.0, size=(50, 2))
        projection = project_point(unproject(cam, pixels, 1.7), cam)
        np.testing.assert_allclose(np.stack([projection.u, projection.v], axis=-1), pixels, atol=1e-6)
        np.testing.assert_allclose(projection.z, 1.7)

    def test_invalid_rotation(self):
        w2c = np.eye(4)
        w2c[0, 0] = 2.0
        with pytest.raises(GeometryError):
            Camera(intrinsics(10.0, 8, 8), w2c, 8, 8)

    def test_camera_dict_round_trip(self):
        cam = look_at((1.0, 2.0, 0.5), (0.0, 0.0, 0.0), 24, 16, 30.0)
        restored = Camera.from_dict(cam.to_dict())
        np.testing.assert_allclose(restored.w2c, cam.w2c)
        assert (restored.width, restored.height) == (24, 16)

    def test_look_at_forward(self):
        cam = front_camera()
        np.testing.assert_allclose(cam.center, [2.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(cam.forward, [-1.0, 0.0, 0.0], atol=1e-12)


class TestLiftFeatures:
    cam = identity_camera(width=16, height=16, focal=16.0)

    def feature_map(self, seed=0):
        return np.random.default_rng(seed).normal(size=(4, 4, 3))

    def test_token_center_is_verbatim(self):
        features = self.feature_map()
        point = unproject(self.cam, (1.5 * 4, 2.5 * 4), 2.0)
        lifted = lift_features(features, self.cam, point_grid(point))
        np.testing.assert_allclose(lifted.data[0, 0, 0], features[2, 1], atol=1e-12)

    def test_between_tokens(self):
        features = self.feature_map()
        point = unproject(self.cam, (1.75 * 4, 2.5 * 4), 2.0)
        lifted = lift_features(features, self.cam, point_grid(point))
        np.testing.assert_allclose(lifted.data[0, 0, 0], 0.75 * features[2, 1] + 0.25 * features[2, 2], atol=1e-12)

    def test_behind_camera_is_zero(self):
        lifted = lift_features(self.feature_map(), self.cam, point_grid((0.0, 0.0, -1.0)))
        np.testing.assert_array_equal(lifted.data[0, 0, 0], np.zeros(3))

    def test_linear_in_the_map(self):
        cam = front_camera(size=16, focal=20.0)
        grid = VoxelGrid(4)
        first, second = self.feature_map(1), self.feature_map(2)
        combined = lift_features(0.3 * first - 1.2 * second, cam, grid).data
        separate = 0.3 * lift_features(first, cam, grid).data - 1.2 * lift_features(second, cam, grid).data
        np.testing.assert_allclose(combined, separate, atol=1e-9)

    def test_bilinear_gradient_reaches_the_map(self):
        image = T.Tensor(np.zeros((2, 2, 1)), requires_grad=True)
        T.tensor_sum(bilinear_gather(image, np.array([0.25]), np.array([0.0]))).backward()
        np.testing.assert_allclose(image.grad[..., 0], [[0.75, 0.25], [0.0, 0.0]])


class TestCameraClustering:
    def test_tetrahedron(self):
        vertices = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
        cams = [look_at(np.array(v, dtype=float) * 2, (0, 0, 0), 8, 8, 10.0) for v in vertices]
        result = kmeans_cluster_cameras(cams, 4, seed=3)
        assert sorted(result.labels.tolist()) == [0, 1, 2, 3]
        assert sorted(result.representatives) == [0, 1, 2, 3]

    def test_single_cluster_is_the_mean(self):
        cams = ring_cameras(count=6, elevation=20.0)
        result = kmeans_cluster_cameras(cams, 1)
        np.testing.assert_allclose(result.centroids[0], np.mean([cam.center for cam in cams], axis=0), atol=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 7, 42])
    def test_two_antipodal_bundles(self, seed):
        rng = np.random.default_rng(seed)
        cams = []
        for side in (1.0, -1.0):
            for _ in range(4):
                eye = np.array([2.0 * side, 0.0, 0.5]) + rng.normal(scale=0.02, size=3)
                cams.append(look_at(eye, (0, 0, 0), 8, 8, 10.0))
        labels = kmeans_cluster_cameras(cams, 2, seed=seed).labels
        assert len(set(labels[:4])) == 1
        assert len(set(labels[4:])) == 1
        assert labels[0] != labels[4]

    def test_objective_non_increasing(self):
        cams = ring_cameras(count=24, elevation=15.0) + ring_cameras(count=8, radius=3.0, elevation=50.0)
        history = kmeans_cluster_cameras(cams, 4, seed=5).objective_history
        assert all(later <= earlier + 1e-12 for earlier, later in zip(history, history[1:]))

    def test_deterministic(self):
        cams = ring_cameras(count=12, elevation=10.0)
        first = kmeans_cluster_cameras(cams, 3, seed=9)
        second = kmeans_cluster_cameras(cams, 3, seed=9)
        np.testing.assert_array_equal(first.labels, second.labels)

    def test_duplicate_centers(self):
        cam = front_camera()
        with pytest.raises(GeometryError):
            kmeans_cluster_cameras([cam, cam, cam], 2)

    def test_too_few_cameras(self):
        with pytest.raises(GeometryError):
            kmeans_cluster_cameras([front_camera()], 2)

    def test_empty_cluster_is_reseeded(self):
        points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [10.0, 0.0, 0.0], [11.0, 0.0, 0.0]])
        centroids = np.array([[0.5, 0.0, 0.0], [10.5, 0.0, 0.0], [100.0, 0.0, 0.0]])
        labels, centroids, _ = geometry._lloyd(points, centroids, 10)  # pylint: disable=protected-access
        assert sorted(set(labels.tolist())) == [0, 1, 2]
        assert np.all(centroids[:, 0] < 100.0)

    def test_representatives_of_an_empty_cluster(self):
        cams = ring_cameras(count=4, elevation=10.0)
        centers = np.array([cam.center for cam in cams])
        stuck = (np.array([0, 0, 1, 1]), np.stack([centers[0], centers[2], centers[1]]), [1.0])
        with patch.object(geometry, "_lloyd", return_value=stuck):
            result = kmeans_cluster_cameras(cams, 3, restarts=1)
        assert len(set(result.representatives)) == 3
        assert result.representatives[2] == 1
