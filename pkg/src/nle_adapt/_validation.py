"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

import numpy as np

from .exceptions import InputShapeError, NumericDomainError, PreconditionError

PROB_FLOOR = 1e-12
ROW_SUM_TOL = 1e-9


def check_features(X, n_features=None):
    """Return ``X`` as a finite 2-D float64 array, checking its width."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise InputShapeError(f"features must be 2-D, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise InputShapeError(
            f"features have {X.shape[1]} columns, network expects {n_features}"
        )
    if not np.all(np.isfinite(X)):
        raise InputShapeError("features contain NaN or inf")
    return X


def check_labels(y, num_classes=None, n_samples=None):
    y = np.asarray(y)
    if y.ndim != 1:
        raise InputShapeError(f"labels must be 1-D, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InputShapeError("labels must be integer class ids")
    y = y.astype(np.int64)
    if n_samples is not None and y.shape[0] != n_samples:
        raise InputShapeError(f"{y.shape[0]} labels for {n_samples} samples")
    if y.size and y.min() < 0:
        raise PreconditionError("labels must be non-negative")
    if num_classes is not None and y.size and y.max() >= num_classes:
        raise PreconditionError(
            f"label {int(y.max())} out of range for {num_classes} classes"
        )
    return y


def check_prob_rows(P, name="probabilities", strict=False, tol=ROW_SUM_TOL):
    """Validate a matrix whose rows lie on the probability simplex.

    With ``strict=True`` every entry must be positive (the l-vector
    normalization condition); otherwise zeros are allowed, as in one-hot
    targets.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim == 1:
        P = P.reshape(1, -1)
    if P.ndim != 2:
        raise InputShapeError(f"{name} must be 2-D, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise NumericDomainError(f"{name} contain NaN or inf")
    if strict:
        if np.any(P <= 0):
            raise NumericDomainError(f"{name} must be strictly positive")
    elif np.any(P < 0):
        raise NumericDomainError(f"{name} contain negative entries")
    sums = P.sum(axis=1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NumericDomainError(f"{name} row {i} sums to {sums[i]!r}, not 1")
    return P


def floor_probs(P):
    """Clamp to ``[PROB_FLOOR, 1]``; used inside every logarithm."""
    return np.clip(P, PROB_FLOOR, 1.0)


def safe_log(P):
    return np.log(floor_probs(P))


def one_hot(y, num_classes, floor=False):
    """One-hot rows; ``floor=True`` moves ``PROB_FLOOR`` mass onto every
    off-class entry so the rows satisfy the strict normalization."""
    y = np.asarray(y, dtype=np.int64)
    T = np.zeros((y.shape[0], num_classes))
    T[np.arange(y.shape[0]), y] = 1.0
    if floor:
        T = np.where(T > 0, 1.0 - PROB_FLOOR * (num_classes - 1), PROB_FLOOR)
    return T
