"""Reference exposure guidance layer and the two-stream training loss.

The layer fuses segmentation features ``f_s`` with a spatial gate computed
from exposure features ``f_e``::

    w_r   = sigmoid(W . f_e + b)             # 1x1 conv to one channel
    f_hat = w1 * f_s + w2 * (f_s * w_r)      # w_r broadcast over channels

Everything is float64 numpy on (batch, channels, height, width) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CacheMismatchError, DomainError, MetricUndefinedError, ShapeError
from .labels import INVALID, LabelMap

DEFAULT_W1 = 1.0
DEFAULT_W2 = 0.3
DEFAULT_ALPHA = 1.0
DEFAULT_BETA_LOSS = 0.01


def _tensor(x, name) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ShapeError(f"{name} must be (batch, channels, height, width), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class EglParams:
    kernel: np.ndarray
    bias: float = 0.0
    w1: float = DEFAULT_W1
    w2: float = DEFAULT_W2

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=np.float64).ravel()
        vals = np.array([self.bias, self.w1, self.w2], dtype=np.float64)
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(vals))):
            raise DomainError("EGL parameters must be finite")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "w1", float(self.w1))
        object.__setattr__(self, "w2", float(self.w2))


@dataclass(frozen=True)
class LossWeights:
    alpha: float = DEFAULT_ALPHA
    beta_loss: float = DEFAULT_BETA_LOSS

    def __post_init__(self):
        for name in ("alpha", "beta_loss"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be finite and non-negative, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class EglCache:
    """Forward state needed by :func:`egl_backward`."""

    f_s: np.ndarray
    f_e: np.ndarray
    params: EglParams
    w_r: np.ndarray


@dataclass(frozen=True)
class EglGrads:
    f_s: np.ndarray
    f_e: np.ndarray
    kernel: np.ndarray
    bias: float
    w1: float
    w2: float

    def as_dict(self) -> dict:
        return {"f_s": self.f_s, "f_e": self.f_e, "W": self.kernel, "b": self.bias, "w1": self.w1, "w2": self.w2}


def egl_forward(f_s, f_e, params: EglParams) -> tuple[np.ndarray, np.ndarray, EglCache]:
    """Return ``(f_hat, w_r, cache)``; ``w_r`` has shape (batch, 1, H, W)."""
    f_s = _tensor(f_s, "f_s").copy()
    f_e = _tensor(f_e, "f_e").copy()
    if f_s.shape[0] != f_e.shape[0] or f_s.shape[2:] != f_e.shape[2:]:
        raise ShapeError(f"f_s {f_s.shape} and f_e {f_e.shape} disagree on batch or spatial size")
    if params.kernel.shape[0] != f_e.shape[1]:
        raise ShapeError(f"kernel has {params.kernel.shape[0]} taps, f_e has {f_e.shape[1]} channels")
    z = np.einsum("c,bchw->bhw", params.kernel, f_e)[:, None] + params.bias
    w_r = sigmoid(z)
    f_hat = params.w1 * f_s + params.w2 * (f_s * w_r)
    f_s.setflags(write=False)
    f_e.setflags(write=False)
    w_r.setflags(write=False)
    return f_hat, w_r, EglCache(f_s, f_e, params, w_r)


def egl_backward(grad_out, cache: EglCache) -> EglGrads:
    g = np.asarray(grad_out, dtype=np.float64)
    if not isinstance(cache, EglCache):
        raise CacheMismatchError("egl_backward needs the cache returned by egl_forward")
    if g.shape != cache.f_s.shape:
        raise CacheMismatchError(f"upstream gradient {g.shape} does not match cached output {cache.f_s.shape}")
    p, f_s, f_e, w_r = cache.params, cache.f_s, cache.f_e, cache.w_r
    g_fs = g * (p.w1 + p.w2 * w_r)
    g_w1 = float(np.sum(g * f_s))
    gated = np.sum(g * f_s, axis=1, keepdims=True)
    g_w2 = float(np.sum(gated * w_r))
    g_z = p.w2 * gated * w_r * (1.0 - w_r)
    g_fe = p.kernel[None, :, None, None] * g_z
    g_kernel = np.einsum("bhw,bchw->c", g_z[:, 0], f_e)
    return EglGrads(g_fs, g_fe, g_kernel, float(g_z.sum()), g_w1, g_w2)


def log_softmax(logits, axis=1):
    logits = np.asarray(logits, dtype=np.float64)
    top = logits.max(axis=axis, keepdims=True)
    shifted = logits - top
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def area_downsample(values, out_h: int, out_w: int) -> np.ndarray:
    """Mean over non-overlapping blocks; sizes must divide evenly."""
    v = np.asarray(values, dtype=np.float64)
    h, w = v.shape[-2:]
    if (h, w) == (out_h, out_w):
        return v
    if h % out_h or w % out_w:
        raise ShapeError(f"cannot area-average {h}x{w} down to {out_h}x{out_w}")
    fy, fx = h // out_h, w // out_w
    return v.reshape(*v.shape[:-2], out_h, fy, out_w, fx).mean(axis=(-3, -1))


def _labels_array(gt) -> np.ndarray:
    if isinstance(gt, LabelMap):
        return gt.labels[None].astype(np.intp)
    arr = np.asarray(gt)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"labels must be (H, W) or (batch, H, W), got shape {arr.shape}")
    return arr.astype(np.intp)


def cross_entropy(seg_logits, gt) -> float:
    """Mean softmax cross-entropy over pixels whose label is not INVALID."""
    logits = _tensor(seg_logits, "seg_logits")
    labels = _labels_array(gt)
    if labels.shape != (logits.shape[0],) + logits.shape[2:]:
        raise ShapeError(f"labels {labels.shape} do not match logits {logits.shape}")
    valid = labels != INVALID
    if not valid.any():
        raise MetricUndefinedError("cross-entropy needs at least one valid pixel")
    if labels[valid].max() >= logits.shape[1]:
        raise ShapeError(f"label id {labels[valid].max()} has no logit channel")
    logp = log_softmax(logits, axis=1)
    picked = np.take_along_axis(logp, np.where(valid, labels, 0)[:, None], axis=1)[:, 0]
    return float(-picked[valid].mean())


def combined_loss(seg_logits, gt, exp_pred, exp_target, weights: LossWeights | None = None):
    """Return ``(L, L_c, L_e)`` with ``L = alpha * L_c + beta_loss * L_e``.

    ``exp_target`` is area-averaged down to the resolution of ``exp_pred`` when larger.
    """
    weights = weights or LossWeights()
    l_c = cross_entropy(seg_logits, gt)
    pred = np.asarray(exp_pred, dtype=np.float64)
    target = getattr(exp_target, "values", exp_target)
    target = area_downsample(target, *pred.shape[-2:])
    try:
        diff = pred - np.broadcast_to(target, pred.shape)
    except ValueError as exc:
        raise ShapeError(f"exposure prediction {pred.shape} vs target {np.shape(target)}") from exc
    l_e = float(np.abs(diff).mean())
    return weights.alpha * l_c + weights.beta_loss * l_e, l_c, l_e
