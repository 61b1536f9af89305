"""Central finite-difference check of the guidance-layer gradients."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .egl_ref import EglParams, egl_backward, egl_forward

log = logging.getLogger(__name__)

GROUPS = ("f_s", "f_e", "W", "b", "w1", "w2")


def numeric_grad(fn, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central differences of scalar ``fn`` w.r.t. every element of ``x`` (perturbed in place, then restored)."""
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn()
        flat[i] = orig - step
        down = fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return grad


def relative_error(analytic, numeric) -> float:
    """``|a - n| / max(|a|, |n|)`` in the 2-norm; absolute when both are ~0."""
    a = np.ravel(np.asarray(analytic, dtype=np.float64))
    n = np.ravel(np.asarray(numeric, dtype=np.float64))
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    diff = np.linalg.norm(a - n)
    return float(diff / scale) if scale > 1e-10 else float(diff)


def random_instance(rng: np.random.Generator, max_batch=2, max_channels=8, max_spatial=8):
    b = int(rng.integers(1, max_batch + 1))
    cs = int(rng.integers(1, max_channels + 1))
    ce = int(rng.integers(1, max_channels + 1))
    h = int(rng.integers(1, max_spatial + 1))
    w = int(rng.integers(1, max_spatial + 1))
    f_s = rng.normal(size=(b, cs, h, w))
    f_e = rng.normal(size=(b, ce, h, w))
    params = EglParams(rng.normal(size=ce), float(rng.normal()), float(rng.normal()), float(rng.normal()))
    grad_out = rng.normal(size=(b, cs, h, w))
    return f_s, f_e, params, grad_out


def check_instance(f_s, f_e, params: EglParams, grad_out, step: float = 1e-4) -> dict[str, float]:
    """Relative error per parameter group for the projection ``sum(grad_out * f_hat)``."""
    f_s = np.array(f_s, dtype=np.float64)
    f_e = np.array(f_e, dtype=np.float64)
    _, _, cache = egl_forward(f_s, f_e, params)
    analytic = egl_backward(grad_out, cache).as_dict()

    state = {
        "W": np.array(params.kernel),
        "b": np.array([params.bias]),
        "w1": np.array([params.w1]),
        "w2": np.array([params.w2]),
    }

    def objective():
        p = EglParams(state["W"], state["b"][0], state["w1"][0], state["w2"][0])
        f_hat, _, _ = egl_forward(f_s, f_e, p)
        return float(np.sum(grad_out * f_hat))

    numeric = {"f_s": numeric_grad(objective, f_s, step), "f_e": numeric_grad(objective, f_e, step)}
    for name, arr in state.items():
        numeric[name] = numeric_grad(objective, arr, step)
    return {g: relative_error(analytic[g], numeric[g]) for g in GROUPS}


@dataclass
class GradcheckReport:
    instances: int
    max_error: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e < self.tolerance for e in self.max_error.values())

    def lines(self) -> list[str]:
        return [
            f"{g:>3}  max_rel_err={self.max_error[g]:.3e}  {'ok' if self.max_error[g] < self.tolerance else 'FAIL'}"
            for g in GROUPS
        ]


def run_gradcheck(
    instances: int = 100,
    seed: int = 0,
    max_batch: int = 2,
    max_channels: int = 8,
    max_spatial: int = 8,
    step: float = 1e-4,
    tolerance: float = 1e-4,
) -> GradcheckReport:
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(GROUPS, 0.0)
    for k in range(instances):
        errs = check_instance(*random_instance(rng, max_batch, max_channels, max_spatial), step=step)
        for g, e in errs.items():
            worst[g] = max(worst[g], e)
        log.debug("instance %d: %s", k, errs)
    return GradcheckReport(instances, worst, tolerance)
