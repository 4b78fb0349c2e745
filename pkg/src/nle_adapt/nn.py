"""Dense feedforward softmax classifier with soft-target cross-entropy.

The network is a plain value: a list of weight matrices and bias vectors.
``train`` never mutates its input, it returns a fresh :class:`Network`.
"""

import json
from dataclasses import dataclass

import numpy as np

from ._validation import (
    PROB_FLOOR,
    check_features,
    check_prob_rows,
)
from .exceptions import DivergenceError, InputShapeError, NumericDomainError, PreconditionError

ACTIVATIONS = ("relu", "tanh")
OPTIMIZERS = ("sgd", "adam")
_LOG_FLOOR = np.log(PROB_FLOOR)


@dataclass
class Network:
    layer_dims: list
    weights: list
    biases: list
    activation: str = "relu"

    def __post_init__(self):
        self.layer_dims = [int(d) for d in self.layer_dims]
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise PreconditionError(f"invalid layer_dims {self.layer_dims}")
        if self.activation not in ACTIVATIONS:
            raise PreconditionError(f"unknown activation {self.activation!r}")
        self.weights = [np.asarray(W, dtype=np.float64) for W in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        n_layers = len(self.layer_dims) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise InputShapeError("parameter count does not match layer_dims")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_dims[k], self.layer_dims[k + 1])
            if W.shape != expect or b.shape != (expect[1],):
                raise InputShapeError(
                    f"layer {k}: weight {W.shape}, bias {b.shape}, expected {expect}"
                )

    @property
    def n_inputs(self):
        return self.layer_dims[0]

    @property
    def n_classes(self):
        return self.layer_dims[-1]

    @property
    def n_params(self):
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def copy(self):
        return Network(
            list(self.layer_dims),
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )

    def params(self):
        """All parameters flattened into one vector (weights then bias, per layer)."""
        return np.concatenate(
            [a.ravel() for W, b in zip(self.weights, self.biases) for a in (W, b)]
        )

    def with_params(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise InputShapeError(f"expected {self.n_params} parameters, got {flat.shape}")
        weights, biases, pos = [], [], 0
        for W, b in zip(self.weights, self.biases):
            weights.append(flat[pos:pos + W.size].reshape(W.shape))
            pos += W.size
            biases.append(flat[pos:pos + b.size].copy())
            pos += b.size
        return Network(list(self.layer_dims), weights, biases, self.activation)

    def equals(self, other):
        return (
            self.layer_dims == other.layer_dims
            and self.activation == other.activation
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    def to_dict(self):
        return {
            "layer_dims": self.layer_dims,
            "activation": self.activation,
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["layer_dims"], d["weights"], d["biases"], d.get("activation", "relu"))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    convergence_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise PreconditionError(f"unknown optimizer {self.optimizer!r}")
        if not self.learning_rate > 0 or not self.convergence_tol > 0:
            raise PreconditionError("learning_rate and convergence_tol must be positive")
        if self.batch_size < 1:
            raise PreconditionError("batch_size must be positive")
        # zero epochs is allowed and means "return the input network"
        if self.max_epochs < 0 or self.seed < 0:
            raise PreconditionError("max_epochs and seed must be non-negative")

    def to_dict(self):
        return {
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "convergence_tol": self.convergence_tol,
            "seed": self.seed,
        }


def init_network(layer_dims, activation="relu", seed=0):
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(list(layer_dims), weights, biases, activation)


def softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _act(net, A):
    return np.maximum(A, 0.0) if net.activation == "relu" else np.tanh(A)


def _act_grad(net, pre, post):
    if net.activation == "relu":
        return (pre > 0).astype(np.float64)
    return 1.0 - post * post


def _forward_cache(net, X):
    pres, posts = [], [X]
    H = X
    last = len(net.weights) - 1
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        A = H @ W + b
        if k == last:
            return A, pres, posts
        H = _act(net, A)
        pres.append(A)
        posts.append(H)


def forward_logits(net, features):
    """Pre-softmax outputs of the final layer, shape ``(N, n_classes)``."""
    X = check_features(features, net.n_inputs)
    return _forward_cache(net, X)[0]


def forward(net, features):
    """Posterior rows ``softmax(logits)``; every row sums to one."""
    return softmax(forward_logits(net, features))


def _log_softmax_floored(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    logp = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
    return np.maximum(logp, _LOG_FLOOR)


def _check_targets(targets, shape):
    T = check_prob_rows(targets, name="targets")
    if T.shape != shape:
        raise InputShapeError(f"targets shape {T.shape} does not match {shape}")
    return T


def soft_cross_entropy(outputs, targets):
    """Mean over rows of ``-sum_i t_i log o_i`` with ``o`` floored at 1e-12."""
    O = np.asarray(outputs, dtype=np.float64)
    if O.ndim == 1:
        O = O.reshape(1, -1)
    if not np.all(np.isfinite(O)) or np.any(O < 0) or np.any(O > 1 + 1e-9):
        raise NumericDomainError("outputs must be finite probabilities")
    T = _check_targets(targets, O.shape)
    logo = np.log(np.clip(O, PROB_FLOOR, 1.0))
    return float(-np.sum(T * logo) / O.shape[0])


def _loss_from_logits(Z, T):
    return float(-np.sum(T * _log_softmax_floored(Z)) / Z.shape[0])


def loss_and_grads(net, X, T):
    """Soft cross-entropy and its gradient for every weight and bias.

    The softmax/cross-entropy pair gives ``dL/dlogits = (o - t) / N`` for
    rows of ``t`` that sum to one.
    """
    Z, pres, posts = _forward_cache(net, X)
    n = X.shape[0]
    loss = _loss_from_logits(Z, T)
    delta = (softmax(Z) - T) / n
    gW, gb = [None] * len(net.weights), [None] * len(net.weights)
    for k in range(len(net.weights) - 1, -1, -1):
        gW[k] = posts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ net.weights[k].T) * _act_grad(net, pres[k - 1], posts[k])
    return loss, gW, gb


def loss(net, features, targets):
    X = check_features(features, net.n_inputs)
    T = _check_targets(targets, (X.shape[0], net.n_classes))
    return _loss_from_logits(_forward_cache(net, X)[0], T)


class _Adam:
    def __init__(self, net, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in net.weights + net.biases]
        self.v = [np.zeros_like(p) for p in net.weights + net.biases]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def train(net, features, targets, cfg, return_curve=False):
    """Minimize soft cross-entropy over ``(features, targets)``.

    Mini-batches follow a seeded permutation per epoch.  The recorded loss
    curve holds the full-data loss before training and after every epoch;
    training stops once the relative change drops below
    ``cfg.convergence_tol`` or after ``cfg.max_epochs`` epochs.

    Raises
    ------
    DivergenceError
        If the loss or any parameter becomes non-finite.
    """
    X = check_features(features, net.n_inputs)
    T = _check_targets(targets, (X.shape[0], net.n_classes))
    net = net.copy()
    curve = [_loss_from_logits(_forward_cache(net, X)[0], T)]
    if not np.isfinite(curve[0]):
        raise DivergenceError(0)
    rng = np.random.default_rng(cfg.seed)
    opt = _Adam(net, cfg.learning_rate) if cfg.optimizer == "adam" else _SGD(cfg.learning_rate)
    n = X.shape[0]
    bs = min(cfg.batch_size, n)
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.max_epochs + 1):
            order = rng.permutation(n) if bs < n else np.arange(n)
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                _, gW, gb = loss_and_grads(net, X[idx], T[idx])
                opt.step(net.weights + net.biases, gW + gb)
            if not all(np.all(np.isfinite(p)) for p in net.weights + net.biases):
                raise DivergenceError(epoch, f"non-finite parameters at epoch {epoch}")
            cur = _loss_from_logits(_forward_cache(net, X)[0], T)
            if not np.isfinite(cur):
                raise DivergenceError(epoch)
            prev = curve[-1]
            curve.append(cur)
            if abs(prev - cur) <= cfg.convergence_tol * max(abs(prev), 1e-300):
                break
    return (net, curve) if return_curve else net


def gradient_check(net, features, targets, epsilon=1e-5):
    """Largest relative gap between backprop and central differences.

    Each parameter is perturbed by ``+-epsilon``; the relative error is
    ``|a - n| / max(|a|, |n|, 1e-12)``.
    """
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    X = check_features(features, net.n_inputs)
    T = _check_targets(targets, (X.shape[0], net.n_classes))
    _, gW, gb = loss_and_grads(net, X, T)
    analytic = np.concatenate([a.ravel() for W, b in zip(gW, gb) for a in (W, b)])
    theta = net.params()
    numeric = np.empty_like(theta)
    for j in range(theta.size):
        saved = theta[j]
        theta[j] = saved + epsilon
        up = _loss_from_logits(_forward_cache(net.with_params(theta), X)[0], T)
        theta[j] = saved - epsilon
        down = _loss_from_logits(_forward_cache(net.with_params(theta), X)[0], T)
        theta[j] = saved
        numeric[j] = (up - down) / (2.0 * epsilon)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denom))
