"""
Management command for evaluating a checkpoint on a dataset split.

Example usages (see usage for more options):

    # Held-out metrics of the refined surfels
    python manage.py evaluate --checkpoint runs/desk/checkpoint.ckpt --dataset data/ --out metrics.json

    # Coarse-only ablation on the training scenes
    python manage.py evaluate --checkpoint runs/desk/checkpoint.ckpt --dataset data/ --split train \
        --coarse-only --out metrics_coarse.json
"""
import logging
from textwrap import dedent

from splat_volume import formats
from splat_volume.management.base import SplatVolumeCommand
from splat_volume.pipeline import inference
from splat_volume.pipeline.config import load_model_config
from splat_volume.pipeline.dataset import Dataset
from splat_volume.pipeline.model import load_model
from splat_volume.tasks import evaluate_scene

log = logging.getLogger(__name__)


class Command(SplatVolumeCommand):
    """
    Evaluate a checkpoint.
    """

    help = dedent(__doc__).strip()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--checkpoint",
            type=str,
            required=True,
            help="training checkpoint to evaluate",
        )
        parser.add_argument(
            "--dataset",
            type=str,
            required=True,
            help="dataset directory written by gen_data",
        )
        parser.add_argument(
            "--split",
            type=str,
            default="held_out",
            help="dataset split: train, held_out or all",
        )
        parser.add_argument(
            "--coarse-only",
            action="store_true",
            help="score the coarse surfels instead of the refined ones",
        )
        parser.add_argument(
            "--inputs",
            type=int,
            help="number of input views per scene, defaults to the M the model was trained with",
        )
        parser.add_argument(
            "--async",
            action="store_true",
            dest="use_async",
            help="evaluate each scene in a celery task and wait for the results",
        )

    def run(self, **options):
        if options["inputs"] is not None and options["inputs"] < 1:
            self.fail("'inputs' must be greater than 0!")
        requested = load_model_config(options["config"]) if options["config"] else None
        model, _ = load_model(options["checkpoint"], requested)
        dataset = Dataset(options["dataset"])
        seed = self.seed(options)
        runner = None
        if options["use_async"]:
            def runner(scene_id):
                return evaluate_scene.delay(
                    options["checkpoint"], options["dataset"], scene_id, seed,
                    options["coarse_only"], options["inputs"],
                ).get()
        with self.precision(options):
            report = inference.evaluate(
                model, dataset, split=options["split"], seed=seed, coarse_only=options["coarse_only"],
                scene_runner=runner, num_inputs=options["inputs"],
            )
        formats.write_json(options["out"], report)
        log.info(f"Completed evaluation of {len(report['scenes'])} scenes: {report['mean']}")
