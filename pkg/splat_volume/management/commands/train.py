"""
Management command for training a reconstruction model.

Example usages (see usage for more options):

    # Desk-scale run on a generated dataset
    python manage.py train --dataset data/ --out runs/desk --config desk

    # Resume where a previous run stopped, in 64-bit deterministic mode
    python manage.py train --dataset data/ --out runs/desk --resume runs/desk/checkpoint.ckpt --deterministic
"""
import logging
from textwrap import dedent

from splat_volume.exceptions import NonFiniteLossError
from splat_volume.management.base import SplatVolumeCommand
from splat_volume.pipeline.config import load_config
from splat_volume.pipeline.training import Trainer

log = logging.getLogger(__name__)


class Command(SplatVolumeCommand):
    """
    Train a model on a dataset.
    """

    help = dedent(__doc__).strip()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--dataset",
            type=str,
            required=True,
            help="dataset directory written by gen_data",
        )
        parser.add_argument(
            "--resume",
            type=str,
            help="checkpoint to resume from",
        )
        parser.add_argument(
            "--max-steps",
            type=int,
            help="stop after this many optimiser steps",
        )
        parser.add_argument(
            "--no-reg",
            action="store_true",
            help="disable the distortion and normal regularizers",
        )

    def run(self, **options):
        if options["max_steps"] is not None and options["max_steps"] < 1:
            self.fail("'max-steps' must be greater than 0!")
        model_config, train_config = load_config(options["config"])
        if options["seed"] is not None:
            train_config["seed"] = options["seed"]
        if options["no_reg"]:
            train_config["reg_enabled"] = False
        trainer = Trainer(
            options["dataset"], model_config, train_config, options["out"],
            deterministic=options["deterministic"], resume=options["resume"],
        )
        try:
            checkpoint = trainer.run(options["max_steps"])
        except NonFiniteLossError as e:
            self.fail(f"{e} (scene {e.scene_id}); last good checkpoint is {trainer.checkpoint_path}")
        log.info(f"Training finished, checkpoint at {checkpoint}")
