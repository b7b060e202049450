"""
Tests for the tasks module.
"""
import unittest
from unittest.mock import MagicMock, patch

from splat_volume.tasks import evaluate_scene, generate_scene


class TestTasks(unittest.TestCase):
    """
    Test cases for tasks.
    """

    @patch("splat_volume.tasks.dataset")
    @patch("splat_volume.tasks.celery_log")
    def test_generate_scene(self, mock_celery_log, mock_dataset):
        mock_dataset.generate_scene.return_value = "/data/scenes/0003"
        mock_dataset.scene_id_for.return_value = "0003"

        result = generate_scene("/data", 3, 11, config={"views_per_scene": 4})

        mock_dataset.generate_scene.assert_called_once_with("/data", 3, 11, {"views_per_scene": 4})
        self.assertEqual(result, "/data/scenes/0003")
        mock_celery_log.info.assert_called_once()
        self.assertIn("0003", mock_celery_log.info.call_args[0][0])

    @patch("splat_volume.tasks.inference")
    @patch("splat_volume.tasks.dataset")
    @patch("splat_volume.tasks.load_model")
    def test_evaluate_scene(self, mock_load_model, mock_dataset, mock_inference):
        mock_model = MagicMock()
        mock_load_model.return_value = (mock_model, {"step": 3})
        mock_sample = mock_dataset.Dataset.return_value.load.return_value
        mock_inference.evaluate_sample.return_value = {"psnr": 21.0}

        report = evaluate_scene("/runs/checkpoint.ckpt", "/data", "0001", seed=2, coarse_only=True, num_inputs=3)

        mock_load_model.assert_called_once_with("/runs/checkpoint.ckpt")
        mock_dataset.Dataset.assert_called_once_with("/data")
        mock_dataset.Dataset.return_value.load.assert_called_once_with("0001")
        mock_inference.evaluate_sample.assert_called_once_with(
            mock_model, mock_sample, seed=2, coarse_only=True, num_inputs=3,
        )
        self.assertEqual(report, {"psnr": 21.0})
