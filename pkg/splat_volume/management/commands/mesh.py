"""
Management command for extracting a textured mesh from a reconstruction.

Example usages (see usage for more options):

    # Fuse the 48-view orbit of scene 0003 into a PLY (an OBJ is written alongside)
    python manage.py mesh --checkpoint runs/desk/checkpoint.ckpt --scene data/scenes/0003 --out meshes/0003.ply

    # Finer TSDF grid
    python manage.py mesh --primitives renders/0003/primitives.bin --out meshes/0003.ply --resolution 256
"""
import logging
from textwrap import dedent

from splat_volume.management.base import SplatVolumeCommand
from splat_volume.management.commands.render import add_source_arguments, check_source, load_splats
from splat_volume.pipeline import inference
from splat_volume.utils import get_mesh_config

log = logging.getLogger(__name__)


class Command(SplatVolumeCommand):
    """
    Mesh a reconstruction through TSDF fusion.
    """

    help = dedent(__doc__).strip()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        add_source_arguments(parser)
        parser.add_argument(
            "--resolution",
            type=int,
            help="TSDF grid resolution, defaults to SPLAT_VOLUME_MESH_CONFIG",
        )
        parser.add_argument(
            "--truncation",
            type=float,
            help="TSDF truncation distance, defaults to SPLAT_VOLUME_MESH_CONFIG",
        )

    def run(self, **options):
        check_source(self, options)
        if options["resolution"] is not None and options["resolution"] < 2:
            self.fail("'resolution' must be at least 2!")
        config = get_mesh_config(resolution=options["resolution"], truncation=options["truncation"])
        with self.precision(options):
            splats, _ = load_splats(options)
            mesh = inference.mesh_from_splats(splats, config)
        inference.write_mesh(mesh, options["out"])
        log.info(f"Completed mesh with {len(mesh.vertices)} vertices and {len(mesh.faces)} faces")
