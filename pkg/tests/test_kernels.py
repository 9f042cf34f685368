import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from statesel import _pykernels, kernels

try:
    from statesel import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def random_csr(rng, n_rows, dim, max_nnz=6):
    indptr = [0]
    indices, data = [], []
    for _ in range(n_rows):
        k = int(rng.integers(0, max_nnz + 1))
        cols = np.sort(rng.choice(dim, size=min(k, dim), replace=False))
        indices += cols.tolist()
        data += rng.normal(size=len(cols)).tolist()
        indptr.append(len(indices))
    return (np.array(indptr, dtype=np.int64), np.array(indices, dtype=np.int64),
            np.array(data, dtype=np.float64))


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
    if _ckernels is not None and not os.environ.get("STATESEL_PURE_PYTHON"):
        assert kernels.BACKEND == "cython"


def test_predict_matches_dense():
    rng = np.random.default_rng(0)
    indptr, indices, data = random_csr(rng, 20, 16)
    w = rng.normal(size=16)
    X = np.zeros((20, 16))
    for r in range(20):
        X[r, indices[indptr[r]:indptr[r + 1]]] = data[indptr[r]:indptr[r + 1]]
    for impl in filter(None, (_pykernels, _ckernels)):
        assert np.allclose(impl.csr_predict(indptr, indices, data, w, 0.5), X @ w + 0.5, atol=1e-12)


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.01, 1.0]), st.integers(1, 9))
def test_backends_bit_identical(seed, reg, batch):
    rng = np.random.default_rng(seed)
    n, dim = 25, 12
    indptr, indices, data = random_csr(rng, n, dim)
    labels = rng.random(n)
    order = rng.permutation(n).astype(np.int64)
    w0 = rng.normal(size=dim)
    outs = []
    for impl in (_pykernels, _ckernels):
        w = w0.copy()
        bias = np.array([0.1, 0.1])
        grad = np.zeros(dim)
        losses = [impl.sgd_epoch(indptr, indices, data, labels, order, batch, 0.05, reg,
                                 w, w0, bias, grad) for _ in range(3)]
        outs.append((losses, w, bias, impl.csr_predict(indptr, indices, data, w, bias[0])))
    (lp, wp, bp, pp), (lc, wc, bc, pc) = outs
    assert lp == lc
    assert np.array_equal(wp, wc) and np.array_equal(bp, bc) and np.array_equal(pp, pc)


def test_pure_python_forced(monkeypatch):
    import importlib

    monkeypatch.setenv("STATESEL_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python" and mod.sgd_epoch is _pykernels.sgd_epoch
    finally:
        monkeypatch.delenv("STATESEL_PURE_PYTHON")
        importlib.reload(kernels)
