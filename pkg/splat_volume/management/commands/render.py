"""
Management command for rendering a reconstructed scene along a trajectory.

Example usages (see usage for more options):

    # 48-view orbit video frames of scene 0003
    python manage.py render --checkpoint runs/desk/checkpoint.ckpt --scene data/scenes/0003 --out renders/0003

    # Re-render the scene's own cameras and keep the decoded surfels
    python manage.py render --checkpoint runs/desk/checkpoint.ckpt --scene data/scenes/0003 --out renders/0003 \
        --trajectory inputs --export-primitives

    # Render a primitive dump without a model
    python manage.py render --primitives renders/0003/primitives.bin --out renders/again
"""
import logging
import os
from textwrap import dedent

from splat_volume import formats
from splat_volume.management.base import SplatVolumeCommand
from splat_volume.pipeline import inference
from splat_volume.pipeline.config import load_model_config
from splat_volume.pipeline.dataset import load_scene
from splat_volume.pipeline.model import load_model

log = logging.getLogger(__name__)

PRIMITIVES_NAME = "primitives.bin"


def load_splats(options):
    """Surfels from a primitive dump, or reconstructed from a scene; returns ``(splats, scene cameras)``."""
    if options["primitives"]:
        return formats.read_primitives(options["primitives"]), []
    requested = load_model_config(options["config"]) if options["config"] else None
    model, _ = load_model(options["checkpoint"], requested)
    sample = load_scene(options["scene"])
    seed = 0 if options["seed"] is None else options["seed"]
    reconstruction, _ = inference.reconstruct_sample(model, sample, seed=seed, num_inputs=options["inputs"])
    return reconstruction.fine, sample.cameras


def add_source_arguments(parser):
    parser.add_argument(
        "--checkpoint",
        type=str,
        help="training checkpoint to reconstruct with",
    )
    parser.add_argument(
        "--scene",
        type=str,
        help="scene directory holding cameras.json and the input views",
    )
    parser.add_argument(
        "--primitives",
        type=str,
        help="render a primitive dump instead of reconstructing",
    )
    parser.add_argument(
        "--inputs",
        type=int,
        help="number of input views to reconstruct from, defaults to the M the model was trained with",
    )


def check_source(command, options):
    if options["inputs"] is not None and options["inputs"] < 1:
        command.fail("'inputs' must be greater than 0!")
    if options["primitives"]:
        if options["checkpoint"] or options["scene"]:
            command.fail("'primitives' cannot be combined with 'checkpoint' or 'scene'")
        return
    if not options["checkpoint"] or not options["scene"]:
        command.fail("You must specify both 'checkpoint' and 'scene', or 'primitives'!")


class Command(SplatVolumeCommand):
    """
    Render views of a reconstruction.
    """

    help = dedent(__doc__).strip()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        add_source_arguments(parser)
        parser.add_argument(
            "--trajectory",
            type=str,
            default="orbit",
            choices=inference.TRAJECTORIES,
            help="camera path: the three-ring orbit or the scene's own cameras",
        )
        parser.add_argument(
            "--export-primitives",
            action="store_true",
            help=f"also write the decoded surfels to {PRIMITIVES_NAME}",
        )
        parser.add_argument(
            "--normals",
            action="store_true",
            help="also write normal maps as PFM",
        )

    def run(self, **options):
        check_source(self, options)
        if options["trajectory"] == "inputs" and options["primitives"]:
            self.fail("The 'inputs' trajectory needs a scene; use 'orbit' with 'primitives'")
        with self.precision(options):
            splats, scene_cams = load_splats(options)
            cams = inference.trajectory_cameras(options["trajectory"], scene_cams)
            count = inference.write_renders(splats, cams, options["out"], normals=options["normals"])
        if options["export_primitives"]:
            formats.write_primitives(os.path.join(options["out"], PRIMITIVES_NAME), splats)
        log.info(f"Completed rendering {count} views into {options['out']}")
