"""
Management command for generating a procedural multi-view dataset.

Example usages (see usage for more options):

    # 200 scenes of 16 views each at 64x64
    python manage.py gen_data --out data/ --scenes 200 --seed 0

    # Queue one celery task per scene instead of rendering in-process
    python manage.py gen_data --out data/ --scenes 2000 --async
"""
import logging
from textwrap import dedent

from splat_volume.management.base import SplatVolumeCommand
from splat_volume.pipeline.dataset import gen_dataset
from splat_volume.tasks import generate_scene

log = logging.getLogger(__name__)


def queue_scene(root, index, seed, config):
    generate_scene.delay(root, index, seed, config)


class Command(SplatVolumeCommand):
    """
    Generate a procedural dataset.
    """

    help = dedent(__doc__).strip()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--scenes",
            type=int,
            default=200,
            help="number of scenes to generate",
        )
        parser.add_argument(
            "--views",
            type=int,
            help="views per scene, defaults to SPLAT_VOLUME_DATASET_CONFIG",
        )
        parser.add_argument(
            "--image-size",
            type=int,
            help="image side in pixels, defaults to SPLAT_VOLUME_DATASET_CONFIG",
        )
        parser.add_argument(
            "--async",
            action="store_true",
            dest="use_async",
            help="queue one celery task per scene",
        )

    def run(self, **options):
        if options["scenes"] < 1:
            self.fail("'scenes' must be greater than 0!")
        if options["views"] is not None and options["views"] < 1:
            self.fail("'views' must be greater than 0!")
        runner = queue_scene if options["use_async"] else None
        gen_dataset(
            options["out"],
            options["scenes"],
            seed=self.seed(options),
            views=options["views"],
            image_size=options["image_size"],
            scene_runner=runner,
        )
        if options["use_async"]:
            log.info(f"Queued {options['scenes']} scenes for generation into {options['out']}")
