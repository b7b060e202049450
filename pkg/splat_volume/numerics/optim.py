"""
AdamW and the cosine learning-rate schedule.
"""
import math

import numpy as np

from splat_volume.exceptions import ConfigError


def cosine_lr(step, total, lr0, lr_min=0.0, period=None):
    """
    Cosine annealing from ``lr0`` at step 0 to ``lr_min`` at ``total``.

    With ``period`` set the schedule restarts every ``period`` steps instead of
    spanning the whole run.
    """
    if total <= 0:
        raise ConfigError(f"Schedule length must be positive, got {total}")
    if period:
        step, total = step % period, period
    step = min(max(step, 0), total)
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * step / total))


def adamw_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
    """
    Apply one decoupled-weight-decay Adam update in place.

    ``params`` maps names to :class:`~splat_volume.numerics.nn.Parameter`,
    ``grads`` maps the same names to arrays (a missing or ``None`` gradient
    leaves that parameter untouched). ``state`` is a dict holding ``step`` and
    the first/second moment dicts ``m`` and ``v``; pass an empty dict on the
    first call.
    """
    if lr <= 0:
        raise ConfigError(f"Learning rate must be positive, got {lr}")
    step = state.get("step", 0) + 1
    state["step"] = step
    first = state.setdefault("m", {})
    second = state.setdefault("v", {})
    bias1 = 1.0 - beta1 ** step
    bias2 = 1.0 - beta2 ** step

    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        m = first.get(name)
        v = second.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        first[name], second[name] = m, v
        update = (m / bias1) / (np.sqrt(v / bias2) + eps)
        param.data = param.data - lr * weight_decay * param.data - lr * update
    return params


class AdamW:
    """
    Stateful wrapper over :func:`adamw_step` reading gradients from ``param.grad``.
    """

    def __init__(self, named_params, lr=2e-4, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.05):
        self.params = dict(named_params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = {}

    @property
    def step_count(self):
        return self.state.get("step", 0)

    def step(self, lr=None):
        grads = {name: param.grad for name, param in self.params.items()}
        adamw_step(
            self.params,
            grads,
            self.state,
            self.lr if lr is None else lr,
            beta1=self.betas[0],
            beta2=self.betas[1],
            eps=self.eps,
            weight_decay=self.weight_decay,
        )

    def zero_grad(self):
        for param in self.params.values():
            param.grad = None

    def state_arrays(self):
        """Moment arrays keyed ``m.<name>`` / ``v.<name>`` for checkpointing."""
        arrays = {}
        for key in ("m", "v"):
            for name, array in self.state.get(key, {}).items():
                arrays[f"{key}.{name}"] = array
        return arrays

    def load_state_arrays(self, arrays, step):
        self.state = {"step": int(step), "m": {}, "v": {}}
        for key, array in arrays.items():
            moment, name = key.split(".", 1)
            self.state[moment][name] = np.array(array)
