# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the sparse linear value model.

Must stay arithmetically identical to ``_pykernels``: same loop order, same
expression shapes, no fused multiply-add.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def csr_predict(const long long[::1] indptr, const long long[::1] indices,
                const double[::1] data, const double[::1] weights, double bias):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t r, k
    cdef double acc
    for r in range(n):
        acc = bias
        for k in range(indptr[r], indptr[r + 1]):
            acc = acc + weights[indices[k]] * data[k]
        o[r] = acc
    return out


def sgd_epoch(const long long[::1] indptr, const long long[::1] indices,
              const double[::1] data, const double[::1] labels,
              const long long[::1] order, Py_ssize_t batch_size, double lr, double reg,
              double[::1] weights, const double[::1] init_weights,
              double[::1] bias, double[::1] grad):
    """One pass of minibatch SGD on squared error, updating in place.

    ``bias`` is ``[bias, init_bias]``; ``grad`` is a zeroed scratch buffer of
    the weights' size and is left zeroed. Returns the summed squared error of
    the pre-update predictions.
    """
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t dim = weights.shape[0]
    cdef Py_ssize_t start, stop, i, r, k, j
    cdef double acc, err, scale, gb, m
    cdef double loss = 0.0
    start = 0
    while start < n:
        stop = start + batch_size
        if stop > n:
            stop = n
        m = <double>(stop - start)
        gb = 0.0
        for i in range(start, stop):
            r = order[i]
            acc = bias[0]
            for k in range(indptr[r], indptr[r + 1]):
                acc = acc + weights[indices[k]] * data[k]
            err = acc - labels[r]
            loss = loss + err * err
            scale = 2.0 * err / m
            for k in range(indptr[r], indptr[r + 1]):
                grad[indices[k]] = grad[indices[k]] + scale * data[k]
            gb = gb + scale
        if reg != 0.0:
            for j in range(dim):
                weights[j] = weights[j] - lr * (grad[j] + reg * (weights[j] - init_weights[j]))
                grad[j] = 0.0
            bias[0] = bias[0] - lr * (gb + reg * (bias[0] - bias[1]))
        else:
            for i in range(start, stop):
                r = order[i]
                for k in range(indptr[r], indptr[r + 1]):
                    j = indices[k]
                    weights[j] = weights[j] - lr * grad[j]
                    grad[j] = 0.0
            bias[0] = bias[0] - lr * gb
        start = stop
    return loss
