"""
Central-difference gradient checking.
"""
import logging
from collections import namedtuple

import numpy as np

from splat_volume.exceptions import GradientError
from splat_volume.numerics.tensor import no_grad

log = logging.getLogger(__name__)

# Magnitude below which gradients are compared absolutely.
ABS_FLOOR = 1e-8

GradCheckReport = namedtuple("GradCheckReport", ["errors", "analytic", "numeric", "tol"])


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), ABS_FLOOR)


def report_passed(report):
    return all(error < report.tol for error in report.errors.values())


def _named(params):
    if isinstance(params, dict):
        return list(params.items())
    return [(getattr(param, "name", "") or f"param{index}", param) for index, param in enumerate(params)]


def _evaluate(f, name, index, sign):
    with no_grad():
        value = float(np.asarray(f().data).reshape(-1)[0])
    if not np.isfinite(value):
        raise GradientError(f"f is not finite ({value}) after perturbing {name}{list(index)} by {sign}h")
    return value


def grad_check(f, params, h=1e-4, tol=1e-3, max_entries=None, rng=None):
    """
    Compare analytic gradients of scalar ``f()`` with central differences.

    ``params`` is a dict of name to parameter or a list of parameters. With
    ``max_entries`` set, at most that many randomly chosen entries of each
    parameter are perturbed. Returns a :class:`GradCheckReport` whose ``errors``
    hold the per-parameter maximum relative error.
    """
    named = _named(params)
    for _, param in named:
        param.grad = None

    loss = f()
    if not np.all(np.isfinite(loss.data)):
        raise GradientError(f"f is not finite ({loss.item()}) at the unperturbed parameters")
    if loss.requires_grad:
        loss.backward()

    rng = rng or np.random.default_rng(0)
    errors, analytic_all, numeric_all = {}, {}, {}
    for name, param in named:
        analytic = np.zeros_like(param.data) if param.grad is None else param.grad
        numeric = np.zeros_like(param.data)
        indices = list(np.ndindex(param.shape))
        if max_entries is not None and len(indices) > max_entries:
            chosen = rng.choice(len(indices), size=max_entries, replace=False)
            indices = [indices[i] for i in sorted(chosen)]

        worst = 0.0
        for index in indices:
            original = param.data[index]
            param.data[index] = original + h
            plus = _evaluate(f, name, index, "+")
            param.data[index] = original - h
            minus = _evaluate(f, name, index, "-")
            param.data[index] = original
            numeric[index] = (plus - minus) / (2.0 * h)
            worst = max(worst, float(relative_error(analytic[index], numeric[index])))

        errors[name] = worst
        analytic_all[name] = analytic
        numeric_all[name] = numeric
        if worst >= tol:
            log.warning(f"Gradient check for {name} failed: max relative error {worst:.3e} >= {tol:.1e}")

    return GradCheckReport(errors, analytic_all, numeric_all, tol)
