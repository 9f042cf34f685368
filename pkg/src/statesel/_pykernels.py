"""Pure-Python twins of the compiled kernels in ``_ckernels.pyx``."""

from __future__ import annotations

import numpy as np


def csr_predict(indptr, indices, data, weights, bias):
    n = len(indptr) - 1
    out = np.empty(n, dtype=np.float64)
    ip = indptr.tolist()
    ix = indices.tolist()
    dv = data.tolist()
    for r in range(n):
        acc = float(bias)
        for k in range(ip[r], ip[r + 1]):
            acc = acc + float(weights[ix[k]]) * dv[k]
        out[r] = acc
    return out


def sgd_epoch(indptr, indices, data, labels, order, batch_size, lr, reg,
              weights, init_weights, bias, grad):
    ip = indptr.tolist()
    ix = indices.tolist()
    dv = data.tolist()
    ys = labels.tolist()
    rows = order.tolist()
    n = len(rows)
    loss = 0.0
    start = 0
    while start < n:
        stop = min(start + batch_size, n)
        m = float(stop - start)
        gb = 0.0
        for i in range(start, stop):
            r = rows[i]
            acc = float(bias[0])
            for k in range(ip[r], ip[r + 1]):
                acc = acc + float(weights[ix[k]]) * dv[k]
            err = acc - ys[r]
            loss = loss + err * err
            scale = 2.0 * err / m
            for k in range(ip[r], ip[r + 1]):
                j = ix[k]
                grad[j] = float(grad[j]) + scale * dv[k]
            gb = gb + scale
        if reg != 0.0:
            weights -= lr * (grad + reg * (weights - init_weights))
            grad[:] = 0.0
            bias[0] = float(bias[0]) - lr * (gb + reg * (float(bias[0]) - float(bias[1])))
        else:
            for i in range(start, stop):
                r = rows[i]
                for k in range(ip[r], ip[r + 1]):
                    j = ix[k]
                    weights[j] = float(weights[j]) - lr * float(grad[j])
                    grad[j] = 0.0
            bias[0] = float(bias[0]) - lr * gb
        start = stop
    return loss
