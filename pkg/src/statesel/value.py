"""Value model over hashed n-gram features of (description, task) text.

Each sentence of a description is tokenized and any token that also appears
among the task's content words is replaced by a shared marker. That lets the
model learn "this sentence talks about something the task mentions" without
memorizing object names, so it transfers to unseen names. Each sentence also
emits its task-mention count alone and conjoined with every other word.

A description vector is the sum of its unit-norm sentence vectors plus a
unit-norm task vector. The model is linear in that sum, so the value gained
by adding a sentence does not depend on the order in which sentences were
added.
"""

from __future__ import annotations

import math
import re
import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import kernels
from .core import Description, FeatureSet, SchemaError, TaskSpec

_TOKEN = re.compile(r"[a-z0-9]+")
TASK_MARK = "@t"
STOPWORDS = frozenset(
    "a an and are as at be by for from in is it of on or the to with your you "
    "this that these those into onto up down".split()
)
CHECKPOINT_FORMAT = "statesel-linear/1"


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def task_content_tokens(task_description: str) -> frozenset[str]:
    return frozenset(t for t in tokenize(task_description) if t not in STOPWORDS)


@dataclass(frozen=True)
class Featurizer:
    hash_bits: int = 16

    def __post_init__(self):
        if not 8 <= self.hash_bits <= 26:
            raise ValueError("hash_bits must be in [8, 26]")

    @property
    def dim(self) -> int:
        return 1 << self.hash_bits

    def sentence_vector(self, sentence: str, task_tokens: frozenset[str]) -> dict[int, float]:
        return _sentence_vector(self.hash_bits, sentence, task_tokens)

    def task_vector(self, task_description: str) -> dict[int, float]:
        return _task_vector(self.hash_bits, task_description)

    def encode(self, texts: Sequence[str], task_description: str) -> tuple[np.ndarray, np.ndarray]:
        """Sparse (indices, values) with indices sorted ascending."""
        acc = dict(self.task_vector(task_description))
        tt = task_content_tokens(task_description)
        for s in texts:
            for j, v in self.sentence_vector(s, tt).items():
                acc[j] = acc.get(j, 0.0) + v
        idx = np.array(sorted(acc), dtype=np.int64)
        vals = np.array([acc[j] for j in idx.tolist()], dtype=np.float64)
        return idx, vals


def _bucket(hash_bits: int, key: str) -> int:
    return zlib.crc32(key.encode("utf-8")) & ((1 << hash_bits) - 1)


@lru_cache(maxsize=200_000)
def _sentence_vector(hash_bits: int, sentence: str, task_tokens: frozenset[str]) -> dict[int, float]:
    toks = [TASK_MARK if t in task_tokens else t for t in tokenize(sentence)]
    keys = [f"u|{t}" for t in toks]
    padded = ["<s>", *toks, "</s>"]
    keys += [f"b|{a}|{b}" for a, b in zip(padded, padded[1:])]
    m = min(toks.count(TASK_MARK), 3)
    keys.append(f"m|{m}")
    # task-overlap level conjoined with the sentence's other words
    keys += [f"c|{m}|{t}" for t in toks if t != TASK_MARK]
    return _unit_counts(hash_bits, keys)


@lru_cache(maxsize=10_000)
def _task_vector(hash_bits: int, task_description: str) -> dict[int, float]:
    return _unit_counts(hash_bits, [f"t|{t}" for t in tokenize(task_description)])


def _unit_counts(hash_bits: int, keys: Sequence[str]) -> dict[int, float]:
    """Hashed key counts scaled to unit L2 norm."""
    vec: dict[int, float] = {}
    for k in keys:
        j = _bucket(hash_bits, k)
        vec[j] = vec.get(j, 0.0) + 1.0
    norm = math.sqrt(math.fsum(v * v for v in vec.values()))
    return {j: v / norm for j, v in vec.items()} if norm else vec


def to_csr(rows: Sequence[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, (idx, _) in enumerate(rows):
        indptr[i + 1] = indptr[i] + len(idx)
    if rows:
        indices = np.ascontiguousarray(np.concatenate([r[0] for r in rows]), dtype=np.int64)
        data = np.ascontiguousarray(np.concatenate([r[1] for r in rows]), dtype=np.float64)
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0, dtype=np.float64)
    return indptr, indices, data


@dataclass
class LinearValueModel:
    """V(x, task) = bias + w . phi(x, task).

    ``init_weights``/``init_bias`` snapshot the starting parameters; training
    penalizes squared distance from them.
    """

    featurizer: Featurizer = field(default_factory=Featurizer)
    weights: np.ndarray | None = None
    bias: float = 0.0
    init_weights: np.ndarray | None = None
    init_bias: float | None = None

    def __post_init__(self):
        if self.weights is None:
            self.weights = np.zeros(self.featurizer.dim, dtype=np.float64)
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.featurizer.dim,):
            raise ValueError("weights do not match the featurizer dimension")
        if self.init_weights is None:
            self.init_weights = self.weights.copy()
        if self.init_bias is None:
            self.init_bias = float(self.bias)

    def copy(self) -> LinearValueModel:
        return LinearValueModel(
            self.featurizer,
            self.weights.copy(),
            float(self.bias),
            self.init_weights.copy(),
            float(self.init_bias),
        )

    def encode(self, x: Description, task: TaskSpec, fs: FeatureSet):
        return self.featurizer.encode(x.texts(fs), task.description)

    def predict_rows(self, rows) -> np.ndarray:
        indptr, indices, data = to_csr(rows)
        return kernels.csr_predict(indptr, indices, data, self.weights, float(self.bias))

    def predict(self, x: Description, task: TaskSpec, fs: FeatureSet) -> float:
        return float(self.predict_rows([self.encode(x, task, fs)])[0])

    def predict_batch(self, xs: Sequence[Description], task: TaskSpec, fs: FeatureSet) -> np.ndarray:
        return self.predict_rows([self.encode(x, task, fs) for x in xs])

    def regularizer(self) -> float:
        """Squared parameter distance from the initial snapshot."""
        d = self.weights - self.init_weights
        return float(np.dot(d, d) + (self.bias - self.init_bias) ** 2)

    def to_record(self) -> dict:
        nz = np.flatnonzero(self.weights).tolist()
        nz0 = np.flatnonzero(self.init_weights).tolist()
        return {
            "format": CHECKPOINT_FORMAT,
            "hash_bits": self.featurizer.hash_bits,
            "bias": float(self.bias),
            "init_bias": float(self.init_bias),
            "weights": [[j, float(self.weights[j])] for j in nz],
            "init_weights": [[j, float(self.init_weights[j])] for j in nz0],
        }

    @classmethod
    def from_record(cls, rec: dict) -> LinearValueModel:
        if rec.get("format") != CHECKPOINT_FORMAT:
            raise SchemaError(f"unsupported checkpoint format {rec.get('format')!r}", field="format")
        feat = Featurizer(int(rec["hash_bits"]))

        def dense(pairs):
            w = np.zeros(feat.dim, dtype=np.float64)
            for j, v in pairs:
                w[int(j)] = float(v)
            return w

        return cls(feat, dense(rec["weights"]), float(rec["bias"]),
                   dense(rec["init_weights"]), float(rec["init_bias"]))
