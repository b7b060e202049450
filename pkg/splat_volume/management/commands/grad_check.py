"""
Management command for checking analytic gradients against central differences.

Example usages (see usage for more options):

    # 20 random scenes of up to 8 surfels, surfel fields and decoder weights
    python manage.py grad_check --out grad_report.json

    # Surfel fields only, more scenes
    python manage.py grad_check --out grad_report.json --scenes 100 --no-decoder
"""
import logging
from textwrap import dedent

from splat_volume import formats
from splat_volume.management.base import SplatVolumeCommand
from splat_volume.pipeline.gradients import run_gradient_suite

log = logging.getLogger(__name__)


class Command(SplatVolumeCommand):
    """
    Run the gradient check suite.
    """

    help = dedent(__doc__).strip()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--scenes",
            type=int,
            default=20,
            help="number of random scenes",
        )
        parser.add_argument(
            "--max-splats",
            type=int,
            default=8,
            help="largest surfel count per scene",
        )
        parser.add_argument(
            "--tolerance",
            type=float,
            default=1e-3,
            help="largest accepted relative error",
        )
        parser.add_argument(
            "--no-decoder",
            action="store_true",
            help="skip the decoder weight checks",
        )

    def run(self, **options):
        if options["scenes"] < 1 or options["max_splats"] < 1:
            self.fail("'scenes' and 'max-splats' must be greater than 0!")
        report = run_gradient_suite(
            num_scenes=options["scenes"],
            seed=self.seed(options),
            max_splats=options["max_splats"],
            tol=options["tolerance"],
            decoder=not options["no_decoder"],
        )
        formats.write_json(options["out"], report)
        if not report["passed"]:
            self.fail(f"Gradient check failed: max relative error {report['max_relative_error']:.3e}")
        log.info(f"Gradient check passed: max relative error {report['max_relative_error']:.3e}")
