"""Layers with explicit forward/backward passes over NCHW numpy arrays.

Each layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``Tensor.grad`` during ``backward``.
Only the fixed stacks used by the classifier are supported; there is no
general autograd graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from . import kernels

DTYPE = np.float32


@dataclass
class Tensor:
    """A trainable buffer and its gradient."""

    data: np.ndarray
    grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)


class Layer:
    def parameters(self) -> list[Tensor]:
        return []

    def buffers(self) -> list[Tensor]:
        """Non-trainable state that still belongs in a checkpoint."""
        return []

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x, training=False):
        return self.forward(x, training)

    def astype(self, dtype) -> "Layer":
        for t in self.parameters() + self.buffers():
            t.data = t.data.astype(dtype)
            if t.grad is not None:
                t.grad = t.grad.astype(dtype)
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


# activations ---------------------------------------------------------------

def relu6(x: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, 0), 6)


class ReLU6(Layer):
    def forward(self, x, training=False):
        y, self._mask = kernels.relu6_forward(np.ascontiguousarray(x))
        return y

    def backward(self, gy):
        return kernels.relu6_backward(np.ascontiguousarray(gy), self._mask)


# convolutions ----------------------------------------------------------------

POINTWISE = "Pointwise1x1"
DEPTHWISE = "Depthwise3x3"
STANDARD = "Standard3x3"
CONV_KINDS = (POINTWISE, DEPTHWISE, STANDARD)


def _out_size(n: int, stride: int) -> int:
    return -(-n // stride)


class Conv2d(Layer):
    """1x1 pointwise, 3x3 depthwise or 3x3 standard convolution, "same" zero padding."""

    def __init__(self, kind: str, in_channels: int, out_channels: int, stride: int = 1, bias: bool = True,
                 rng: np.random.Generator | None = None, dtype=DTYPE):
        if kind not in CONV_KINDS:
            raise ValueError(f"unknown conv kind {kind!r}")
        if stride not in (1, 2):
            raise ValueError("stride must be 1 or 2")
        if kind == DEPTHWISE and in_channels != out_channels:
            raise ShapeMismatch("depthwise convolution needs out_channels == in_channels")
        self.kind, self.stride = kind, stride
        self.in_channels, self.out_channels = in_channels, out_channels
        rng = rng if rng is not None else np.random.default_rng(0)
        if kind == POINTWISE:
            shape, fan_in = (out_channels, in_channels), in_channels
        elif kind == DEPTHWISE:
            shape, fan_in = (out_channels, 3, 3), 9
        else:
            shape, fan_in = (out_channels, in_channels, 3, 3), 9 * in_channels
        # He-normal init suits the ReLU6 stacks this layer sits in
        self.weight = Tensor((rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype))
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype)) if bias else None

    def parameters(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def _check(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(f"{self.kind} expects [N, {self.in_channels}, H, W], got {list(x.shape)}")

    def output_shape(self, shape):
        n, _, h, w = shape
        return (n, self.out_channels, _out_size(h, self.stride), _out_size(w, self.stride))

    def forward(self, x, training=False):
        self._check(x)
        s = self.stride
        n, c, h, w = x.shape
        ho, wo = _out_size(h, s), _out_size(w, s)
        self._xshape = x.shape
        wt = self.weight.data
        if self.kind == POINTWISE:
            xs = x[:, :, ::s, ::s] if s > 1 else x
            self._cols = xs
            y = np.matmul(wt, xs.reshape(n, c, ho * wo)).reshape(n, self.out_channels, ho, wo)
        elif self.kind == DEPTHWISE:
            xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
            self._cols = xp
            y = kernels.depthwise_forward(xp, wt.astype(x.dtype, copy=False), s, ho, wo)
        else:
            xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
            cols = np.empty((n, c, 3, 3, ho, wo), dtype=x.dtype)
            for i in range(3):
                for j in range(3):
                    cols[:, :, i, j] = xp[:, :, i:i + s * ho:s, j:j + s * wo:s]
            cols = cols.reshape(n, c * 9, ho * wo)
            self._cols = cols
            y = np.matmul(wt.reshape(self.out_channels, -1), cols).reshape(n, self.out_channels, ho, wo)
        if self.bias is not None:
            y = y + self.bias.data[None, :, None, None]
        return y

    def backward(self, gy):
        s = self.stride
        n, c, h, w = self._xshape
        _, o, ho, wo = gy.shape
        wt = self.weight.data
        if self.bias is not None:
            self.bias.grad += gy.sum(axis=(0, 2, 3))
        if self.kind == POINTWISE:
            g2 = gy.reshape(n, o, ho * wo)
            xs = self._cols.reshape(n, c, ho * wo)
            self.weight.grad += np.einsum("nop,ncp->oc", g2, xs, optimize=True)
            gxs = np.matmul(wt.T, g2).reshape(n, c, ho, wo)
            if s == 1:
                return gxs
            gx = np.zeros(self._xshape, dtype=gy.dtype)
            gx[:, :, ::s, ::s] = gxs
            return gx
        if self.kind == DEPTHWISE:
            gxp, gw = kernels.depthwise_backward(self._cols, wt.astype(gy.dtype, copy=False),
                                                 np.ascontiguousarray(gy), s)
            self.weight.grad += gw
            return gxp[:, :, 1:h + 1, 1:w + 1]
        g2 = gy.reshape(n, o, ho * wo)
        self.weight.grad += np.einsum("nop,nkp->ok", g2, self._cols, optimize=True).reshape(wt.shape)
        gcols = np.matmul(wt.reshape(o, -1).T, g2).reshape(n, c, 3, 3, ho, wo)
        gxp = np.zeros((n, c, h + 2, w + 2), dtype=gy.dtype)
        for i in range(3):
            for j in range(3):
                gxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += gcols[:, :, i, j]
        return gxp[:, :, 1:h + 1, 1:w + 1]


def conv2d_forward(layer: Conv2d, x: np.ndarray) -> np.ndarray:
    return layer.forward(x)


# normalisation -----------------------------------------------------------------

class BatchNorm2d(Layer):
    """Per-channel batch norm; ``running <- (1 - momentum) * running + momentum * batch``.

    Running variance is updated with the unbiased batch variance, normalisation
    uses the biased one.
    """

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5, dtype=DTYPE):
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.gamma = Tensor(np.ones(channels, dtype=dtype))
        self.beta = Tensor(np.zeros(channels, dtype=dtype))
        self.running_mean = Tensor(np.zeros(channels, dtype=dtype))
        self.running_var = Tensor(np.ones(channels, dtype=dtype))

    def parameters(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return [self.running_mean, self.running_var]

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeMismatch(f"batch norm expects [N, {self.channels}, H, W], got {list(x.shape)}")
        g = self.gamma.data[None, :, None, None]
        b = self.beta.data[None, :, None, None]
        if not training:
            self._training = False
            self._inv = 1.0 / np.sqrt(self.running_var.data + self.eps)
            xhat = (x - self.running_mean.data[None, :, None, None]) * self._inv[None, :, None, None]
            self._xhat = xhat
            return g * xhat + b
        n, c, h, w = x.shape
        m = n * h * w
        y, xhat, mean, var, inv = kernels.batchnorm_train_forward(
            np.ascontiguousarray(x).reshape(n, c, h * w), self.gamma.data, self.beta.data, self.eps)
        self._training, self._inv, self._xhat = True, inv, xhat.reshape(x.shape)
        mom = self.momentum
        unbiased = var * (m / max(m - 1, 1))
        self.running_mean.data = ((1 - mom) * self.running_mean.data + mom * mean).astype(self.running_mean.data.dtype)
        self.running_var.data = ((1 - mom) * self.running_var.data + mom * unbiased).astype(self.running_var.data.dtype)
        return y.reshape(x.shape)

    def backward(self, gy):
        n, c, h, w = gy.shape
        gx, ggamma, gbeta = kernels.batchnorm_backward(
            np.ascontiguousarray(gy).reshape(n, c, h * w), self._xhat.reshape(n, c, h * w),
            self.gamma.data, np.asarray(self._inv, dtype=np.float64), self._training)
        self.gamma.grad += ggamma.astype(self.gamma.grad.dtype)
        self.beta.grad += gbeta.astype(self.beta.grad.dtype)
        return gx.reshape(gy.shape)


def batchnorm_forward(layer: BatchNorm2d, x: np.ndarray, training: bool) -> np.ndarray:
    return layer.forward(x, training)


# head ------------------------------------------------------------------------

class GlobalAvgPool(Layer):
    def forward(self, x, training=False):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, gy):
        n, c, h, w = self._shape
        return np.broadcast_to(gy[:, :, None, None] / (h * w), self._shape).copy()


class Linear(Layer):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator | None = None, dtype=DTYPE):
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Tensor(rng.uniform(-bound, bound, (out_features, in_features)).astype(dtype))
        self.bias = Tensor(np.zeros(out_features, dtype=dtype))

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.weight.shape[1]:
            raise ShapeMismatch(f"linear expects [N, {self.weight.shape[1]}], got {list(x.shape)}")
        self._x = x
        return x @ self.weight.data.T + self.bias.data

    def backward(self, gy):
        self.weight.grad += gy.T @ self._x
        self.bias.grad += gy.sum(axis=0)
        return gy @ self.weight.data


class Sequential(Layer):
    def __init__(self, *layers: Layer):
        self.layers = list(layers)

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def buffers(self):
        return [b for layer in self.layers for b in layer.buffers()]

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, gy):
        for layer in reversed(self.layers):
            gy = layer.backward(gy)
        return gy


class InvertedResidual(Layer):
    """Expand (1x1) -> depthwise (3x3) -> linear projection (1x1), with a skip
    connection when stride is 1 and channel counts match."""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1, expansion: int = 6,
                 momentum: float = 0.1, rng: np.random.Generator | None = None, dtype=DTYPE):
        rng = rng if rng is not None else np.random.default_rng(0)
        hidden = in_channels * expansion
        self.in_channels, self.out_channels, self.stride = in_channels, out_channels, stride
        self.uses_residual = stride == 1 and in_channels == out_channels
        self.expand = Sequential(
            Conv2d(POINTWISE, in_channels, hidden, 1, bias=False, rng=rng, dtype=dtype),
            BatchNorm2d(hidden, momentum, dtype=dtype), ReLU6())
        self.depthwise = Sequential(
            Conv2d(DEPTHWISE, hidden, hidden, stride, bias=False, rng=rng, dtype=dtype),
            BatchNorm2d(hidden, momentum, dtype=dtype), ReLU6())
        self.project = Sequential(
            Conv2d(POINTWISE, hidden, out_channels, 1, bias=False, rng=rng, dtype=dtype),
            BatchNorm2d(out_channels, momentum, dtype=dtype))
        self.body = Sequential(self.expand, self.depthwise, self.project)

    def parameters(self):
        return self.body.parameters()

    def buffers(self):
        return self.body.buffers()

    def forward(self, x, training=False):
        y = self.body.forward(x, training)
        return x + y if self.uses_residual else y

    def backward(self, gy):
        gx = self.body.backward(gy)
        return gx + gy if self.uses_residual else gx


# loss --------------------------------------------------------------------------

def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on raw logits and its gradient w.r.t. the logits.

    Uses ``max(z, 0) - z*y + log1p(exp(-|z|))`` so large logits never overflow.
    """
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    losses = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    grad = (sigmoid(z) - y) / z.size
    return float(losses.mean()), grad.reshape(np.shape(logits)).astype(np.asarray(logits).dtype)
