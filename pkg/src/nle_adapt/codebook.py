"""l-vector codebooks: per-class centroids of source-model posteriors.

Three centroid notions are supported:

``l2``
    arithmetic mean of the posteriors labelled with each class.
``kl``
    minimizer of the mean ``KL(e || o)`` over the simplex.
``skl``
    minimizer of the mean symmetric KL ``sum_i (e_i - o_i) log(e_i / o_i)``.

The ``kl`` and ``skl`` rows are parameterized as ``softmax(z_c)`` and fitted
by full-batch gradient descent on ``z_c``. Both losses depend on the
posteriors only through three per-class means (``log o``, ``o`` and
``o log o``), so those are accumulated once and every epoch costs
``O(|C|^2)`` regardless of the number of frames.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    PROB_FLOOR,
    check_labels,
    check_prob_rows,
    floor_probs,
    one_hot,
    safe_log,
)
from .exceptions import (
    DivergenceError,
    InputShapeError,
    MissingEmbeddingError,
    NumericDomainError,
    PreconditionError,
)
from .nn import softmax

METHODS = ("l2", "kl", "skl")


def _pair(e, o):
    e = np.asarray(e, dtype=np.float64)
    o = np.asarray(o, dtype=np.float64)
    if e.shape != o.shape:
        raise InputShapeError(f"length mismatch: {e.shape} vs {o.shape}")
    for v in (e, o):
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise NumericDomainError("divergence arguments must be probability vectors")
    return floor_probs(e), floor_probs(o)


def kl_divergence(e, o):
    """``sum_i e_i log(e_i / o_i)``, natural log, entries floored at 1e-12."""
    e, o = _pair(e, o)
    return float(np.sum(e * (np.log(e) - np.log(o)), axis=-1))


def skl_divergence(e, o):
    """Symmetric KL, ``kl(e, o) + kl(o, e)``."""
    e, o = _pair(e, o)
    return float(np.sum((e - o) * (np.log(e) - np.log(o)), axis=-1))


@dataclass
class CentroidTrainConfig:
    learning_rate: float = 0.5
    max_epochs: int = 2000
    convergence_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0 or not self.convergence_tol > 0:
            raise PreconditionError("learning_rate and convergence_tol must be positive")
        if self.max_epochs < 0 or self.seed < 0:
            raise PreconditionError("max_epochs and seed must be non-negative")

    def to_dict(self):
        return {
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "convergence_tol": self.convergence_tol,
            "seed": self.seed,
        }


@dataclass
class Codebook:
    """``|C| x |C|`` matrix of l-vectors; row ``c`` is the soft target for class ``c``.

    Rows of classes that never occurred in the source data are NaN and
    ``coverage[c] == 0``; looking them up raises :class:`MissingEmbeddingError`.
    """

    rows: np.ndarray
    method: str
    coverage: np.ndarray
    loss_curve: list = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.coverage = np.asarray(self.coverage, dtype=np.int64)
        C = self.coverage.shape[0]
        if self.rows.shape != (C, C):
            raise InputShapeError(f"rows shape {self.rows.shape} for {C} classes")
        if self.method not in METHODS + ("one_hot",):
            raise PreconditionError(f"unknown method {self.method!r}")
        if np.any(self.covered & ~self.available):
            raise NumericDomainError("covered classes must have finite l-vectors")
        if self.available.any():
            check_prob_rows(self.rows[self.available], name="l-vectors", strict=True)

    @property
    def num_classes(self):
        return self.coverage.shape[0]

    @property
    def covered(self):
        return self.coverage > 0

    @property
    def available(self):
        """Rows usable for lookup: covered classes plus any fallback rows."""
        return ~np.isnan(self.rows).any(axis=1)

    def missing(self, labels=None):
        """Classes (optionally restricted to ``labels``) without an l-vector."""
        absent = set(np.flatnonzero(~self.available).tolist())
        if labels is None:
            return sorted(absent)
        labels = np.unique(np.asarray(labels, dtype=np.int64))
        return sorted(int(c) for c in labels if c in absent or not 0 <= c < self.num_classes)

    def lookup(self, labels):
        """Soft-target matrix for a batch of labels, one row per label."""
        labels = np.asarray(labels, dtype=np.int64)
        bad = self.missing(labels)
        if bad:
            raise MissingEmbeddingError(bad, self.num_classes)
        return self.rows[labels]

    def with_one_hot_fallback(self):
        """Copy with floored one-hot rows for classes that have no l-vector.

        ``coverage`` is left untouched so the substitution stays visible.
        """
        rows = self.rows.copy()
        absent = np.flatnonzero(~self.available)
        rows[absent] = one_hot(absent, self.num_classes, floor=True)
        return Codebook(rows, self.method, self.coverage.copy())

    @classmethod
    def one_hot(cls, num_classes):
        """Floored one-hot codebook, which reduces soft-target training to one-hot CE."""
        return cls(one_hot(np.arange(num_classes), num_classes, floor=True),
                   "one_hot", np.ones(num_classes, dtype=np.int64))

    def to_dict(self):
        return {
            "num_classes": self.num_classes,
            "method": self.method,
            "coverage": self.coverage.tolist(),
            "rows": [
                [float(v) for v in row] if c else None
                for row, c in zip(self.rows, self.available)
            ],
        }

    @classmethod
    def from_dict(cls, d):
        C = int(d["num_classes"])
        if len(d["rows"]) != C or len(d["coverage"]) != C:
            raise InputShapeError("codebook file is inconsistent with num_classes")
        rows = np.full((C, C), np.nan)
        for c, row in enumerate(d["rows"]):
            if row is not None:
                rows[c] = row
        return cls(rows, d["method"], np.asarray(d["coverage"], dtype=np.int64))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def lookup(cb, label):
    """The l-vector of a single class."""
    return cb.lookup([label])[0]


def _canonical_order(labels, values):
    """Row order grouped by label, and lexicographic by value inside a class.

    Summing in this order makes every per-class mean independent of how the
    input rows were permuted.
    """
    keys = [values[:, j] for j in range(values.shape[1] - 1, -1, -1)] + [labels]
    return np.lexsort(keys)


def _class_means(values, labels, num_classes, keys=None):
    order = _canonical_order(labels, values if keys is None else keys)
    sums = np.zeros((num_classes, values.shape[1]))
    np.add.at(sums, labels[order], values[order])
    counts = np.bincount(labels, minlength=num_classes)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts[:, None]
    means[counts == 0] = np.nan
    return means, counts


def _resolve_classes(outputs, labels, num_classes):
    O = check_prob_rows(outputs, name="outputs")
    if num_classes is None:
        num_classes = O.shape[1]
    if O.shape[1] != num_classes:
        raise InputShapeError(f"outputs have {O.shape[1]} columns for {num_classes} classes")
    y = check_labels(labels, num_classes, O.shape[0])
    return O, y, num_classes


def learn_l2(outputs, labels, num_classes=None):
    """Arithmetic mean of the posterior rows of each class."""
    O, y, C = _resolve_classes(outputs, labels, num_classes)
    means, counts = _class_means(O, y, C)
    return Codebook(means, "l2", counts)


@dataclass
class LogitTable:
    """Pre-softmax parameters ``z``; the l-vector of class ``c`` is ``softmax(z[c])``."""

    z: np.ndarray
    coverage: np.ndarray

    @property
    def covered(self):
        return self.coverage > 0

    def export(self, method="kl"):
        rows = np.full(self.z.shape, np.nan)
        cov = self.covered
        if cov.any():
            rows[cov] = softmax(self.z[cov])
        return Codebook(rows, method, self.coverage)


def init_logits(pre_softmax, labels, num_classes=None):
    """Mean pre-softmax logit vector of each class."""
    Z = np.asarray(pre_softmax, dtype=np.float64)
    if Z.ndim != 2 or not np.all(np.isfinite(Z)):
        raise InputShapeError("pre-softmax logits must be a finite 2-D array")
    C = Z.shape[1] if num_classes is None else num_classes
    if Z.shape[1] != C:
        raise InputShapeError(f"logits have {Z.shape[1]} columns for {C} classes")
    y = check_labels(labels, C, Z.shape[0])
    means, counts = _class_means(Z, y, C)
    return LogitTable(means, counts)


@dataclass
class ClassStats:
    """Per-class means of ``log o``, ``o`` and ``sum_i o_i log o_i``."""

    mean_log: np.ndarray
    mean_prob: np.ndarray
    mean_neg_entropy: np.ndarray
    counts: np.ndarray


def class_stats(outputs, labels, num_classes=None):
    O, y, C = _resolve_classes(outputs, labels, num_classes)
    logO = safe_log(O)
    stacked = np.hstack([logO, O, np.sum(O * logO, axis=1, keepdims=True)])
    # canonical order is defined on the posteriors themselves
    means, counts = _class_means(stacked, y, C, keys=O)
    return ClassStats(means[:, :C], means[:, C:2 * C], means[:, 2 * C], counts)


def centroid_loss(z, stats, method):
    """Per-class mean KL or SKL between ``softmax(z)`` and the class posteriors.

    ``z`` and the stats arrays are row-aligned; returns one loss per row.
    """
    e = softmax(z)
    loge = np.log(np.maximum(e, PROB_FLOOR))
    cross = np.sum(e * stats.mean_log, axis=1)
    if method == "kl":
        return np.sum(e * loge, axis=1) - cross
    if method == "skl":
        return (np.sum((e - stats.mean_prob) * loge, axis=1) - cross
                + stats.mean_neg_entropy)
    raise PreconditionError(f"unknown centroid method {method!r}")


def centroid_grad(z, stats, method):
    """Gradient of :func:`centroid_loss` with respect to ``z``, row by row."""
    e = softmax(z)
    loge = np.log(np.maximum(e, PROB_FLOOR))
    g = loge + 1.0 - stats.mean_log
    if method == "skl":
        g = g - stats.mean_prob / np.maximum(e, PROB_FLOOR)
    elif method != "kl":
        raise PreconditionError(f"unknown centroid method {method!r}")
    return e * (g - np.sum(e * g, axis=1, keepdims=True))


def _subset(stats, idx):
    return ClassStats(stats.mean_log[idx], stats.mean_prob[idx],
                      stats.mean_neg_entropy[idx], stats.counts[idx])


def _fit_centroids(method, outputs, labels, init, cfg):
    stats = class_stats(outputs, labels, init.z.shape[0])
    C = stats.counts.shape[0]
    covered = stats.counts > 0
    if np.any(covered & ~init.covered):
        bad = np.flatnonzero(covered & ~init.covered)
        raise PreconditionError(f"initial logits undefined for covered classes {bad.tolist()}")
    idx = np.flatnonzero(covered)
    z = init.z[idx].copy()
    sub = _subset(stats, idx)
    weights = sub.counts / sub.counts.sum()

    cur = centroid_loss(z, sub, method)
    curve = [float(weights @ cur)]
    active = np.ones(idx.size, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.max_epochs + 1):
            if not active.any():
                break
            a = np.flatnonzero(active)
            sa = _subset(sub, a)
            z[a] -= cfg.learning_rate * centroid_grad(z[a], sa, method)
            new = centroid_loss(z[a], sa, method)
            if not np.all(np.isfinite(new)) or not np.all(np.isfinite(z[a])):
                raise DivergenceError(epoch, f"non-finite {method} centroid loss at epoch {epoch}")
            done = np.abs(cur[a] - new) <= cfg.convergence_tol * np.maximum(np.abs(cur[a]), 1e-300)
            cur[a] = new
            active[a[done]] = False
            curve.append(float(weights @ cur))

    full = np.full((C, C), np.nan)
    full[idx] = z
    cb = LogitTable(full, stats.counts).export(method)
    cb.loss_curve = curve
    return cb


def learn_kl(outputs, labels, init, cfg=None):
    """Fit KL centroids by gradient descent on the logits, starting from ``init``."""
    return _fit_centroids("kl", outputs, labels, init, cfg or CentroidTrainConfig())


def learn_skl(outputs, labels, init, cfg=None):
    """Fit symmetric-KL centroids by gradient descent on the logits."""
    return _fit_centroids("skl", outputs, labels, init, cfg or CentroidTrainConfig())
