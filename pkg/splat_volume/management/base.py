"""
Shared plumbing for the splat_volume management commands.
"""
import logging

from django.core.management.base import BaseCommand, CommandError

from splat_volume.exceptions import SplatVolumeError
from splat_volume.numerics import tensor as T
from splat_volume.toggles import deterministic_enabled

log = logging.getLogger(__name__)


class SplatVolumeCommand(BaseCommand):
    """
    Adds the common ``--config``, ``--seed``, ``--deterministic`` and ``--out``
    options and turns library errors into CommandError.
    """

    def add_arguments(self, parser):
        parser.add_argument(
            "--config",
            type=str,
            default=None,
            help="model preset name (desk, full, full_fast) or a YAML config file; defaults to desk",
        )
        parser.add_argument(
            "--seed",
            type=int,
            default=None,
            help="seed of every random choice the command makes; defaults to 0 or the config seed",
        )
        parser.add_argument(
            "--deterministic",
            action="store_true",
            help="run in 64-bit precision for bit-identical repeated runs",
        )
        parser.add_argument(
            "--out",
            type=str,
            required=True,
            help="output path",
        )

    def seed(self, options):
        return 0 if options["seed"] is None else options["seed"]

    def precision(self, options):
        """64-bit tensors with --deterministic or SPLAT_VOLUME_DETERMINISTIC, 32-bit otherwise."""
        return T.precision("float64" if deterministic_enabled(options["deterministic"]) else "float32")

    def fail(self, message):
        log.error(message)
        raise CommandError(message)

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except SplatVolumeError as e:
            self.fail(str(e))

    def run(self, **options):
        raise NotImplementedError
