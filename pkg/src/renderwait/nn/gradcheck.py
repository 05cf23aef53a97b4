"""Central finite-difference checks of the hand-written backward passes."""

from __future__ import annotations

import numpy as np

from .core import Layer, bce_loss

ABS_FLOOR = 1e-7


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), ABS_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def _numeric(f, arr: np.ndarray, eps: float) -> np.ndarray:
    g = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = f()
        flat[i] = old - eps
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * eps)
    return g


def check_gradients(model: Layer, x: np.ndarray, loss_fn, epsilon: float = 1e-3, training: bool = True,
                    include_input: bool = True) -> dict[str, float]:
    """Compare analytic and numeric gradients for every parameter (and the input).

    ``loss_fn(output) -> (loss, dloss/doutput)``. The model is switched to
    float64 in place. Returns the max relative error per checked tensor.
    """
    model.astype(np.float64)
    x = np.array(x, dtype=np.float64)

    def loss():
        return loss_fn(model.forward(x, training))[0]

    model.zero_grad()
    out = model.forward(x, training)
    _, gout = loss_fn(out)
    gx = model.backward(np.asarray(gout, dtype=np.float64))
    errors = {}
    for k, p in enumerate(model.parameters()):
        errors[f"param{k}{list(p.shape)}"] = _rel_err(p.grad, _numeric(loss, p.data, epsilon))
    if include_input:
        errors["input"] = _rel_err(gx, _numeric(loss, x, epsilon))
    return errors


def projection_loss(shape, seed: int = 0):
    """A random linear functional: loss = sum(out * R)."""
    r = np.random.default_rng(seed).standard_normal(shape)
    return lambda out: (float((out * r).sum()), r.copy())


def grad_check(model: Layer, x: np.ndarray, labels: np.ndarray, epsilon: float = 1e-3, training: bool = True) -> float:
    """Max relative error between analytic and finite-difference gradients of
    the BCE loss of ``model(x)`` against ``labels``."""
    labels = np.asarray(labels, dtype=np.float64)
    errs = check_gradients(model, x, lambda z: bce_loss(z, labels.reshape(np.shape(z))), epsilon, training)
    return max(errs.values())
