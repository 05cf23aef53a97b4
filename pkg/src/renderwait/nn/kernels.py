"""Compiled inner loops for the 3x3 depthwise convolution.

Inputs are already zero-padded by one pixel on each spatial side.
"""

import numpy as np
from numba import njit

# reassociation lets reductions vectorise; NaN/inf semantics stay intact
REASSOC = {"reassoc", "contract"}


@njit(cache=True)
def depthwise_forward(xp, w, stride, ho, wo):
    n_, c_ = xp.shape[0], xp.shape[1]
    y = np.empty((n_, c_, ho, wo), dtype=xp.dtype)
    for n in range(n_):
        for c in range(c_):
            w00, w01, w02 = w[c, 0, 0], w[c, 0, 1], w[c, 0, 2]
            w10, w11, w12 = w[c, 1, 0], w[c, 1, 1], w[c, 1, 2]
            w20, w21, w22 = w[c, 2, 0], w[c, 2, 1], w[c, 2, 2]
            for oh in range(ho):
                r0 = xp[n, c, oh * stride]
                r1 = xp[n, c, oh * stride + 1]
                r2 = xp[n, c, oh * stride + 2]
                for ow in range(wo):
                    q = ow * stride
                    y[n, c, oh, ow] = (w00 * r0[q] + w01 * r0[q + 1] + w02 * r0[q + 2]
                                       + w10 * r1[q] + w11 * r1[q + 1] + w12 * r1[q + 2]
                                       + w20 * r2[q] + w21 * r2[q + 1] + w22 * r2[q + 2])
    return y


@njit(cache=True)
def depthwise_backward(xp, w, gy, stride):
    n_, c_, ho, wo = gy.shape
    gxp = np.zeros(xp.shape, dtype=gy.dtype)
    gw = np.zeros(w.shape, dtype=np.float64)
    for c in range(c_):
        w00, w01, w02 = w[c, 0, 0], w[c, 0, 1], w[c, 0, 2]
        w10, w11, w12 = w[c, 1, 0], w[c, 1, 1], w[c, 1, 2]
        w20, w21, w22 = w[c, 2, 0], w[c, 2, 1], w[c, 2, 2]
        for n in range(n_):
            a00 = a01 = a02 = a10 = a11 = a12 = a20 = a21 = a22 = np.float32(0)
            for oh in range(ho):
                r0 = xp[n, c, oh * stride]
                r1 = xp[n, c, oh * stride + 1]
                r2 = xp[n, c, oh * stride + 2]
                q0 = gxp[n, c, oh * stride]
                q1 = gxp[n, c, oh * stride + 1]
                q2 = gxp[n, c, oh * stride + 2]
                g = gy[n, c, oh]
                for ow in range(wo):
                    q = ow * stride
                    v = g[ow]
                    a00 += v * r0[q]
                    a01 += v * r0[q + 1]
                    a02 += v * r0[q + 2]
                    a10 += v * r1[q]
                    a11 += v * r1[q + 1]
                    a12 += v * r1[q + 2]
                    a20 += v * r2[q]
                    a21 += v * r2[q + 1]
                    a22 += v * r2[q + 2]
                    q0[q] += w00 * v
                    q0[q + 1] += w01 * v
                    q0[q + 2] += w02 * v
                    q1[q] += w10 * v
                    q1[q + 1] += w11 * v
                    q1[q + 2] += w12 * v
                    q2[q] += w20 * v
                    q2[q + 1] += w21 * v
                    q2[q + 2] += w22 * v
            gw[c, 0, 0] += a00
            gw[c, 0, 1] += a01
            gw[c, 0, 2] += a02
            gw[c, 1, 0] += a10
            gw[c, 1, 1] += a11
            gw[c, 1, 2] += a12
            gw[c, 2, 0] += a20
            gw[c, 2, 1] += a21
            gw[c, 2, 2] += a22
    return gxp, gw.astype(w.dtype)


# batch norm over x viewed as [N, C, P] ---------------------------------------

@njit(cache=True, fastmath=REASSOC)
def batchnorm_train_forward(x, gamma, beta, eps):
    n_, c_, p_ = x.shape
    m = n_ * p_
    y = np.empty_like(x)
    xhat = np.empty_like(x)
    mean = np.empty(c_, dtype=np.float64)
    var = np.empty(c_, dtype=np.float64)
    inv = np.empty(c_, dtype=np.float64)
    for c in range(c_):
        s = 0.0
        for n in range(n_):
            for p in range(p_):
                s += x[n, c, p]
        mu = s / m
        ss = 0.0
        for n in range(n_):
            for p in range(p_):
                d = x[n, c, p] - mu
                ss += d * d
        v = ss / m
        iv = 1.0 / np.sqrt(v + eps)
        g, b = gamma[c], beta[c]
        for n in range(n_):
            for p in range(p_):
                h = (x[n, c, p] - mu) * iv
                xhat[n, c, p] = h
                y[n, c, p] = g * h + b
        mean[c], var[c], inv[c] = mu, v, iv
    return y, xhat, mean, var, inv


@njit(cache=True, fastmath=REASSOC)
def batchnorm_backward(gy, xhat, gamma, inv, training):
    n_, c_, p_ = gy.shape
    m = n_ * p_
    gx = np.empty_like(gy)
    ggamma = np.empty(c_, dtype=np.float64)
    gbeta = np.empty(c_, dtype=np.float64)
    for c in range(c_):
        sg = 0.0
        sgx = 0.0
        for n in range(n_):
            for p in range(p_):
                g = gy[n, c, p]
                sg += g
                sgx += g * xhat[n, c, p]
        ggamma[c], gbeta[c] = sgx, sg
        k = gamma[c] * inv[c]
        if training:
            mg = sg / m
            mgx = sgx / m
            for n in range(n_):
                for p in range(p_):
                    gx[n, c, p] = k * (gy[n, c, p] - mg - xhat[n, c, p] * mgx)
        else:
            for n in range(n_):
                for p in range(p_):
                    gx[n, c, p] = k * gy[n, c, p]
    return gx, ggamma, gbeta


@njit(cache=True)
def relu6_forward(x):
    flat = x.ravel()
    y = np.empty_like(flat)
    mask = np.empty(flat.size, dtype=np.bool_)
    for i in range(flat.size):
        v = flat[i]
        mask[i] = 0 < v < 6
        y[i] = min(max(v, 0), 6)
    return y.reshape(x.shape), mask.reshape(x.shape)


@njit(cache=True)
def relu6_backward(gy, mask):
    flat = gy.ravel()
    mf = mask.ravel()
    out = np.empty_like(flat)
    for i in range(flat.size):
        out[i] = flat[i] if mf[i] else 0
    return out.reshape(gy.shape)
