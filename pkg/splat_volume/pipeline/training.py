"""
The training loop.

Each optimiser step draws ``batch_size × grad_accumulation`` training scenes.
For every scene, M input views are chosen by camera clustering and M novel
views are drawn uniformly from the rest. The model reconstructs from the
inputs, renders coarse and fine surfels into all 2M views and backpropagates
the total loss. Gradients of the scenes are averaged before an AdamW update.
"""
import logging
import math
import os
from collections import namedtuple

import numpy as np

from splat_volume import formats
from splat_volume.exceptions import CheckpointError, DatasetError, NonFiniteLossError
from splat_volume.losses_metrics import image_metrics, total_loss
from splat_volume.numerics import tensor as T
from splat_volume.numerics.checkpoint import check_config, load_checkpoint, save_checkpoint
from splat_volume.numerics.optim import AdamW, cosine_lr
from splat_volume.pipeline.dataset import Dataset
from splat_volume.pipeline.inference import select_input_views
from splat_volume.pipeline.model import OPTIM_PREFIX, ReconstructionModel, model_tensors, split_tensors
from splat_volume.toggles import deterministic_enabled, fine_culling_enabled
from splat_volume.utils import get_loss_weights, get_render_config

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.ckpt"
METRICS_NAME = "metrics.jsonl"

StepResult = namedtuple("StepResult", ["step", "epoch", "lr", "components", "scene_ids"])


def save_training_checkpoint(path, model, optimizer, model_config, train_config, step, rng):
    tensors = model_tensors(model)
    tensors.update({f"{OPTIM_PREFIX}{name}": array for name, array in optimizer.state_arrays().items()})
    metadata = {
        "model_config": model_config,
        "train_config": train_config,
        "step": int(step),
        "optimizer_step": optimizer.step_count,
        "rng_state": rng.bit_generator.state if rng is not None else None,
    }
    save_checkpoint(path, tensors, metadata)
    log.info(f"Saved checkpoint at step {step} to {path}")


def choose_views(cams, M, rng, seed=0):
    """``(inputs, novel)`` index lists: clustered inputs, then up to M uniformly drawn other views."""
    inputs = select_input_views(cams, M, seed=seed)
    rest = np.array([index for index in range(len(cams)) if index not in inputs], dtype=np.int64)
    count = min(M, len(rest))
    novel = [int(index) for index in rng.choice(rest, size=count, replace=False)] if count else []
    return inputs, novel


class Trainer:
    """
    Owns the model, optimiser, generator and output directory of one run.
    """

    def __init__(self, dataset_root, model_config, train_config, out_dir, deterministic=False, resume=None):
        self.dataset = Dataset(dataset_root)
        self.scene_ids = self.dataset.scene_ids("train")
        if not self.scene_ids:
            raise DatasetError(f"Dataset {dataset_root} has no training scenes")
        self.model_config = dict(model_config)
        self.train_config = dict(train_config)
        self.deterministic = deterministic_enabled(deterministic)
        self.dtype = np.float64 if self.deterministic else np.dtype(self.train_config["precision"]).type
        self.out_dir = formats.ensure_dir(out_dir)
        self.checkpoint_path = os.path.join(out_dir, CHECKPOINT_NAME)
        self.metrics_path = os.path.join(out_dir, METRICS_NAME)
        self.render_config = get_render_config()
        self.culling = fine_culling_enabled()
        self.total_steps = self.train_config["epochs"] * self.train_config["steps_per_epoch"]
        period = self.train_config.get("period_epochs")
        self.period = period * self.train_config["steps_per_epoch"] if period else None
        self._cache = {}

        with T.precision(self.dtype):
            self.model = ReconstructionModel(self.model_config, seed=self.train_config["seed"])
        self.optimizer = AdamW(
            self.model.named_parameters(),
            lr=self.train_config["lr"],
            betas=self.train_config["betas"],
            weight_decay=self.train_config["weight_decay"],
        )
        self.rng = np.random.default_rng(self.train_config["seed"])
        self.step = 0
        if resume:
            self.resume(resume)

    def resume(self, path):
        tensors, metadata = load_checkpoint(path)
        check_config(metadata.get("model_config", {}), self.model_config)
        params, optim = split_tensors(tensors)
        self.model.load_state_dict(params)
        self.optimizer.load_state_arrays(optim, metadata.get("optimizer_step", 0))
        if metadata.get("rng_state") is None:
            raise CheckpointError(f"Checkpoint {path} carries no generator state to resume from")
        self.rng.bit_generator.state = metadata["rng_state"]
        self.step = int(metadata["step"])
        log.info(f"Resumed training from {path} at step {self.step}")

    def epoch_of(self, step):
        return step // self.train_config["steps_per_epoch"]

    def lr_at(self, step):
        return cosine_lr(step, self.total_steps, self.train_config["lr"], self.train_config["lr_min"], self.period)

    def load(self, scene_id):
        if scene_id not in self._cache:
            self._cache[scene_id] = self.dataset.load(scene_id)
        return self._cache[scene_id]

    def scene_loss(self, sample, epoch):
        M = self.model_config["M"]
        inputs, novel = choose_views(sample.cameras, M, self.rng, seed=self.train_config["seed"])
        views = inputs + novel
        cams = [sample.cameras[index] for index in views]
        rendered = self.model.render_scene(
            sample.images[inputs], cams[:len(inputs)], cams, self.render_config, self.culling
        )
        weights = get_loss_weights(self.train_config["reg_enabled"], self.train_config["reg_start_epoch"])
        return total_loss(
            rendered.coarse, rendered.fine, list(sample.images[views]), rendered.intersections, weights, epoch,
            cams=cams,
        )

    def train_step(self):
        """One optimiser update; raises NonFiniteLossError without touching the parameters."""
        epoch = self.epoch_of(self.step)
        lr = self.lr_at(self.step)
        count = self.train_config["batch_size"] * self.train_config["grad_accumulation"]
        scene_ids = [self.scene_ids[int(index)] for index in self.rng.integers(len(self.scene_ids), size=count)]
        self.optimizer.zero_grad()
        components = {}
        with T.precision(self.dtype):
            for scene_id in scene_ids:
                breakdown = self.scene_loss(self.load(scene_id), epoch)
                if not math.isfinite(breakdown.components["total"]):
                    message = f"Non-finite loss {breakdown.components['total']} at step {self.step} on scene {scene_id}"
                    log.error(message)
                    raise NonFiniteLossError(message, scene_id=scene_id, step=self.step)
                (breakdown.total * (1.0 / count)).backward()
                for key, value in breakdown.components.items():
                    components[key] = components.get(key, 0.0) + value / count
            self.optimizer.step(lr=lr)
        self.step += 1
        return StepResult(self.step, epoch, lr, components, scene_ids)

    def validate(self):
        """Fine-render PSNR on the novel views of the first held-out (or training) scene."""
        held_out = self.dataset.scene_ids("held_out")
        sample = self.dataset.load(held_out[0]) if held_out else self.load(self.scene_ids[0])
        inputs = select_input_views(sample.cameras, self.model_config["M"], seed=self.train_config["seed"])
        targets = [index for index in range(len(sample.cameras)) if index not in inputs] or inputs
        cams = [sample.cameras[index] for index in inputs + targets]
        with T.precision(self.dtype), T.no_grad():
            rendered = self.model.render_scene(
                sample.images[inputs], cams[:len(inputs)], cams, self.render_config, self.culling
            )
        scores = [
            image_metrics(buffers.rgb.data, sample.images[index])[0]
            for buffers, index in zip(rendered.fine[len(inputs):], targets)
        ]
        return sample.scene_id, float(np.mean(scores))

    def save(self, path=None):
        save_training_checkpoint(
            path or self.checkpoint_path, self.model, self.optimizer, self.model_config, self.train_config,
            self.step, self.rng,
        )

    def run(self, max_steps=None):
        """
        Train until the schedule (or ``max_steps`` more updates) is done.

        A checkpoint is written before the first update and after every epoch,
        so a non-finite loss aborts with the last good state on disk.
        """
        end = self.total_steps if max_steps is None else min(self.total_steps, self.step + max_steps)
        log.info(f"Now training {self.model.num_parameters()} parameters from step {self.step} to {end}")
        if not os.path.exists(self.checkpoint_path):
            self.save()
        while self.step < end:
            try:
                result = self.train_step()
            except NonFiniteLossError:
                log.error(f"Aborting; last good checkpoint is {self.checkpoint_path}")
                raise
            formats.append_jsonl(self.metrics_path, {
                "type": "train",
                "step": result.step,
                "epoch": result.epoch,
                "lr": result.lr,
                "scenes": result.scene_ids,
                **result.components,
            })
            log.debug(f"Step {result.step}: loss {result.components['total']:.5f}")
            if result.step % self.train_config["validate_every"] == 0:
                scene_id, psnr = self.validate()
                formats.append_jsonl(self.metrics_path, {
                    "type": "validation", "step": result.step, "scene": scene_id, "psnr": psnr,
                })
                log.info(f"Validation PSNR at step {result.step}: {psnr:.2f} dB on scene {scene_id}")
            if result.step % self.train_config["steps_per_epoch"] == 0 or result.step == end:
                self.save()
                self.save(os.path.join(self.out_dir, f"epoch_{self.epoch_of(result.step - 1):03d}.ckpt"))
        log.info(f"Completed training at step {self.step}")
        return self.checkpoint_path


def train(dataset_root, model_config, train_config, out_dir, deterministic=False, resume=None, max_steps=None):
    return Trainer(dataset_root, model_config, train_config, out_dir, deterministic, resume).run(max_steps)
