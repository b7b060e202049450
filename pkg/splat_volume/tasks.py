"""
Celery tasks that fan dataset generation and evaluation out over workers.
"""
import logging

from celery import shared_task
from edx_django_utils.monitoring import set_code_owner_attribute

from splat_volume.pipeline import dataset, inference
from splat_volume.pipeline.model import load_model

log = logging.getLogger(__name__)
celery_log = logging.getLogger("splat_volume.celery.task")


@shared_task
@set_code_owner_attribute
def generate_scene(root, index, seed, config=None):
    """
    Render one procedural scene into a dataset directory.

    Arguments:
        root: dataset directory
        index: scene index; the scene id is its zero-padded form
        seed: dataset seed, shared by every scene of the dataset
        config (dict): generator settings, defaults to `settings.SPLAT_VOLUME_DATASET_CONFIG`
    """
    directory = dataset.generate_scene(root, index, seed, config)
    celery_log.info(f"Generated scene {dataset.scene_id_for(index)} in {directory}")
    return directory


@shared_task
@set_code_owner_attribute
def evaluate_scene(checkpoint, dataset_root, scene_id, seed=0, coarse_only=False, num_inputs=None):
    """
    Evaluate a checkpoint on one scene and return its metrics record.

    Arguments:
        checkpoint: path of a training checkpoint
        dataset_root: dataset directory
        scene_id: scene to reconstruct and score
        seed: input view selection seed
        coarse_only (bool): score the coarse surfels instead of the refined ones
        num_inputs: input view count, defaults to the M the model was trained with
    """
    model, _ = load_model(checkpoint)
    sample = dataset.Dataset(dataset_root).load(scene_id)
    report = inference.evaluate_sample(model, sample, seed=seed, coarse_only=coarse_only, num_inputs=num_inputs)
    celery_log.info(f"Evaluated scene {scene_id}: {report}")
    return report
