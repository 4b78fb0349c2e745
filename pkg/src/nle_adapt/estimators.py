"""scikit-learn compatible wrappers around the network and codebook code.

These make the pieces usable inside ``Pipeline``, ``clone`` and model
selection utilities:

* :class:`SoftTargetMLPClassifier` fits on integer labels or on a matrix of
  soft targets.
* :class:`LabelEmbedding` learns l-vectors from posteriors and transforms
  labels into soft targets.
* :class:`NLEAdapter` chains them: distil a fitted source classifier, then
  fine-tune a copy of it on target data.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from . import codebook as cbm
from . import nn
from ._validation import check_features, check_labels, check_prob_rows, one_hot, safe_log


def _targets(y, n_classes):
    y = np.asarray(y)
    if y.ndim == 2:
        T = check_prob_rows(y, name="soft targets")
        return T, T.shape[1]
    y = check_labels(y)
    C = n_classes or int(y.max()) + 1
    return one_hot(y, C), C


class SoftTargetMLPClassifier(ClassifierMixin, BaseEstimator):
    """Feedforward softmax classifier trained with soft-target cross-entropy.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
    activation : {"relu", "tanh"}
    optimizer : {"adam", "sgd"}
    learning_rate, batch_size, max_epochs, tol, random_state
        Passed through to :class:`nn.TrainConfig`; ``random_state`` seeds
        both the initial weights and the batch order.
    n_classes : int or None
        Output width.  Inferred from ``y`` when omitted.
    init_network : nn.Network or None
        Start from these weights instead of a fresh initialization, as in
        adaptation from a source model.  The object is never modified.
    """

    def __init__(self, hidden_layer_sizes=(64, 64), activation="relu", optimizer="adam",
                 learning_rate=1e-3, batch_size=64, max_epochs=100, tol=1e-6,
                 random_state=0, n_classes=None, init_network=None):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.tol = tol
        self.random_state = random_state
        self.n_classes = n_classes
        self.init_network = init_network

    def _config(self):
        return nn.TrainConfig(self.optimizer, self.learning_rate, self.batch_size,
                              self.max_epochs, self.tol, self.random_state or 0)

    def fit(self, X, y):
        """``y`` is either a 1-D array of class ids or an ``(n, C)`` matrix of soft targets."""
        X = check_features(X)
        T, C = _targets(y, self.n_classes)
        if self.init_network is not None:
            net = self.init_network
        else:
            dims = [X.shape[1], *self.hidden_layer_sizes, C]
            net = nn.init_network(dims, self.activation, seed=self.random_state or 0)
        self.network_, self.loss_curve_ = nn.train(net, X, T, self._config(), return_curve=True)
        self.n_iter_ = len(self.loss_curve_) - 1
        self.classes_ = np.arange(self.network_.n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "network_")
        return nn.forward_logits(self.network_, X)

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        return nn.forward(self.network_, X)

    def predict(self, X):
        check_is_fitted(self, "network_")
        # np.argmax keeps the first maximum: ties go to the lowest class id
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


class LabelEmbedding(TransformerMixin, BaseEstimator):
    """Codebook of per-class centroids of source-model posteriors.

    ``fit(P, y)`` takes posterior rows ``P`` and their labels;
    ``transform(y)`` maps labels to their l-vectors.

    Parameters
    ----------
    method : {"l2", "kl", "skl"}
    learning_rate, max_epochs, tol
        Gradient-descent settings for ``kl`` and ``skl``.
    missing : {"error", "one_hot"}
        What ``transform`` does with a class that never occurred in ``y``.
    """

    def __init__(self, method="skl", learning_rate=0.5, max_epochs=2000, tol=1e-9,
                 missing="error"):
        self.method = method
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.tol = tol
        self.missing = missing

    def fit(self, P, y, logits=None):
        """If ``logits`` (pre-softmax outputs) are given they seed the KL/SKL
        fits; otherwise ``log P`` is used, which has the same class means up
        to a per-row shift."""
        P = check_prob_rows(P, name="posteriors")
        y = check_labels(y, P.shape[1], P.shape[0])
        if self.method == "l2":
            cb = cbm.learn_l2(P, y)
        elif self.method in ("kl", "skl"):
            init = cbm.init_logits(safe_log(P) if logits is None else logits, y, P.shape[1])
            cfg = cbm.CentroidTrainConfig(self.learning_rate, self.max_epochs, self.tol)
            learn = cbm.learn_kl if self.method == "kl" else cbm.learn_skl
            cb = learn(P, y, init, cfg)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        if self.missing == "one_hot":
            cb = cb.with_one_hot_fallback()
        elif self.missing != "error":
            raise ValueError(f"unknown missing policy {self.missing!r}")
        self.codebook_ = cb
        self.n_classes_ = cb.num_classes
        return self

    def transform(self, y):
        check_is_fitted(self, "codebook_")
        return self.codebook_.lookup(check_labels(y))

    def fit_transform(self, P, y, **fit_params):
        return self.fit(P, y, **fit_params).transform(y)


class NLEAdapter(ClassifierMixin, BaseEstimator):
    """Adapt a fitted source classifier to a target domain through l-vectors.

    ``fit(X, y, X_source=..., y_source=...)``: the source classifier is run
    on the source frames, a :class:`LabelEmbedding` is learned from its
    posteriors, and a copy of the source network is fine-tuned on the
    target frames ``(X, y)`` with the looked-up l-vectors as targets.
    The source and target sets need not be aligned or of equal size.
    """

    def __init__(self, source, embedding=None, learning_rate=1e-3, batch_size=32,
                 max_epochs=50, tol=1e-9, random_state=0):
        self.source = source
        self.embedding = embedding
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y, X_source=None, y_source=None):
        if X_source is None or y_source is None:
            raise ValueError("X_source and y_source are required to learn the embedding")
        check_is_fitted(self.source, "network_")
        src_net = self.source.network_
        emb = clone(self.embedding) if self.embedding is not None else LabelEmbedding()
        emb.fit(self.source.predict_proba(X_source), y_source,
                logits=self.source.decision_function(X_source))
        targets = emb.transform(y)
        self.embedding_ = emb
        self.target_ = SoftTargetMLPClassifier(
            optimizer="adam", learning_rate=self.learning_rate, batch_size=self.batch_size,
            max_epochs=self.max_epochs, tol=self.tol, random_state=self.random_state,
            init_network=src_net,
        ).fit(X, targets)
        self.classes_ = self.target_.classes_
        self.n_features_in_ = self.target_.n_features_in_
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "target_")
        return self.target_.predict_proba(X)

    def predict(self, X):
        check_is_fitted(self, "target_")
        return self.target_.predict(X)
