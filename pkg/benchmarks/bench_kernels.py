"""Compare the compiled and pure-Python training kernels.

Runs both backends on the same value dataset (synthesized demonstrations,
scripted-actor labels) and reports wall time per call plus whether their
outputs agree bit for bit.

    python benchmarks/bench_kernels.py [--demos 10] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from statesel import _pykernels
from statesel.actor import arrangement_actor
from statesel.config import Config
from statesel.harness import generate_demonstrations
from statesel.learning import collect_value_dataset, encode_dataset
from statesel.value import Featurizer, LinearValueModel

try:
    from statesel import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--demos", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cfg = Config(n_demos=args.demos)
    rng = np.random.default_rng(0)
    steps = [s for d in generate_demonstrations(cfg.n_demos, rng) for s in d]
    dataset = collect_value_dataset(steps, arrangement_actor(), cfg, rng)
    model = LinearValueModel(Featurizer(cfg.hash_bits))
    (indptr, indices, data), labels = encode_dataset(model, dataset)
    order = np.random.default_rng(1).permutation(len(labels)).astype(np.int64)
    print(f"{len(labels)} rows, {len(data)} non-zeros, dim {model.featurizer.dim}")

    backends = [("python", _pykernels)]
    if _ckernels is None:
        print("compiled extension not built; timing the pure-Python backend only")
    else:
        backends.insert(0, ("cython", _ckernels))

    results = {}
    for name, impl in backends:
        for reg in (0.0, cfg.kl_coefficient / len(labels)):
            def epoch():
                w = np.zeros(model.featurizer.dim)
                bias = np.zeros(2)
                grad = np.zeros_like(w)
                loss = impl.sgd_epoch(indptr, indices, data, labels, order, cfg.batch_size,
                                      cfg.learning_rate, reg, w, model.init_weights, bias, grad)
                return loss, w, bias
            t, out = best_of(epoch, args.repeat)
            results[(name, "sgd_epoch", reg)] = (t, out)
        w = out[1]
        t, pred = best_of(lambda: impl.csr_predict(indptr, indices, data, w, 0.1), args.repeat)
        results[(name, "csr_predict", None)] = (t, pred)

    print(f"{'kernel':<26} {'cython s':>10} {'python s':>10} {'speedup':>8} {'identical':>9}")
    for kernel, reg in [("sgd_epoch", 0.0), ("sgd_epoch", cfg.kl_coefficient / len(labels)), ("csr_predict", None)]:
        label = kernel if reg is None else f"{kernel} (reg={'0' if reg == 0 else 'c/N'})"
        tp, op = results[("python", kernel, reg)]
        if _ckernels is None:
            print(f"{label:<26} {'-':>10} {tp:>10.4f} {'-':>8} {'-':>9}")
            continue
        tc, oc = results[("cython", kernel, reg)]
        if kernel == "csr_predict":
            same = np.array_equal(op, oc)
        else:
            same = op[0] == oc[0] and np.array_equal(op[1], oc[1]) and np.array_equal(op[2], oc[2])
        print(f"{label:<26} {tc:>10.4f} {tp:>10.4f} {tp / tc:>7.1f}x {str(same):>9}")


if __name__ == "__main__":
    main()
