"""Seeded Gaussian-class source/target domains with a controllable covariate shift.

Source frames of class ``c`` are drawn from ``N(mu_c, sigma^2 I)``.  Target
frames come from the same class conditionals pushed through

    x -> scale * R(theta) x + t

where ``R`` rotates the first two feature dimensions.  Class semantics are
unchanged, only the input distribution moves.
"""

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ._validation import check_features, check_labels
from .exceptions import InputShapeError, PreconditionError

DEFAULT_MEANS_SEED = 20200504
DEFAULT_MEANS_SCALE = 2.0
# Monte Carlo Bayes error of the default task: estimate_bayes_error(DomainShiftSpec(), 200_000, seed=0)
DEFAULT_BAYES_ERROR = 0.02316


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    domain_tag: str = ""

    def __post_init__(self):
        self.features = check_features(self.features)
        self.labels = check_labels(self.labels, n_samples=self.features.shape[0])
        if self.features.shape[0] < 1:
            raise PreconditionError("a dataset needs at least one frame")

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def class_counts(self, num_classes=None):
        return np.bincount(self.labels, minlength=num_classes or 0)

    def to_csv(self, path, spec=None):
        """Write ``f0..f{D-1},label`` rows; ``spec`` goes to a JSON sidecar."""
        path = Path(path)
        header = ",".join([f"f{j}" for j in range(self.n_features)] + ["label"])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for x, y in zip(self.features, self.labels):
                fh.write(",".join(repr(float(v)) for v in x) + f",{int(y)}\n")
        sidecar = {"domain_tag": self.domain_tag, "n_frames": len(self)}
        if spec is not None:
            sidecar["spec"] = spec.to_dict()
        sidecar_path(path).write_text(json.dumps(sidecar, indent=2))

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if not header or header[-1] != "label":
            raise InputShapeError(f"{path}: last column must be 'label'")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        tag = ""
        if sidecar_path(path).exists():
            tag = json.loads(sidecar_path(path).read_text()).get("domain_tag", "")
        return cls(data[:, :-1], data[:, -1].astype(np.int64), tag)


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def default_class_means(num_classes=10, feature_dim=8, scale=DEFAULT_MEANS_SCALE,
                        seed=DEFAULT_MEANS_SEED):
    """Fixed class centres shared by every run of a task."""
    return np.random.default_rng(seed).normal(0.0, scale, size=(num_classes, feature_dim))


@dataclass
class DomainShiftSpec:
    num_classes: int = 10
    feature_dim: int = 8
    source_per_class: int = 2000
    adapt_per_class: int = 200
    test_per_class: int = 500
    class_means: list = None
    sigma: float = 1.0
    # shift; translation=None means translation_norm * sigma along (1,..,1)/sqrt(D)
    translation: list = None
    translation_norm: float = 1.5
    rotation_deg: float = 20.0
    scale: float = 1.0
    seed: int = 0
    means_seed: int = DEFAULT_MEANS_SEED
    means_scale: float = DEFAULT_MEANS_SCALE

    def __post_init__(self):
        for name in ("num_classes", "feature_dim", "source_per_class",
                     "adapt_per_class", "test_per_class"):
            if int(getattr(self, name)) < 1:
                raise PreconditionError(f"{name} must be a positive integer")
        if self.num_classes < 2:
            raise PreconditionError("need at least two classes")
        if not self.sigma > 0 or not self.scale > 0:
            raise PreconditionError("sigma and scale must be positive")
        if self.rotation_deg and self.feature_dim < 2:
            raise PreconditionError("rotation needs feature_dim >= 2")
        if self.seed < 0:
            raise PreconditionError("seed must be non-negative")
        if self.class_means is not None:
            m = np.asarray(self.class_means, dtype=np.float64)
            if m.shape != (self.num_classes, self.feature_dim):
                raise PreconditionError(f"class_means shape {m.shape} does not match spec")
        if self.translation is not None and len(self.translation) != self.feature_dim:
            raise PreconditionError("translation length must equal feature_dim")

    @property
    def means(self):
        if self.class_means is not None:
            return np.asarray(self.class_means, dtype=np.float64)
        return default_class_means(self.num_classes, self.feature_dim,
                                   self.means_scale, self.means_seed)

    @property
    def shift_vector(self):
        if self.translation is not None:
            return np.asarray(self.translation, dtype=np.float64)
        u = np.ones(self.feature_dim) / math.sqrt(self.feature_dim)
        return self.translation_norm * self.sigma * u

    def rotation(self):
        R = np.eye(self.feature_dim)
        if self.feature_dim >= 2:
            a = math.radians(self.rotation_deg)
            R[:2, :2] = [[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]]
        return R

    def is_identity_shift(self):
        return (self.rotation_deg == 0 and self.scale == 1.0
                and not np.any(self.shift_vector))

    def identity(self):
        """Same task with the shift removed."""
        return DomainShiftSpec(**{**self.to_dict(), "translation": [0.0] * self.feature_dim,
                                  "rotation_deg": 0.0, "scale": 1.0})

    def replace(self, **changes):
        return DomainShiftSpec(**{**self.to_dict(), **changes})

    def to_dict(self):
        d = asdict(self)
        for k in ("class_means", "translation"):
            if d[k] is not None:
                d[k] = np.asarray(d[k], dtype=np.float64).tolist()
        return d


def apply_shift(spec, X):
    return spec.scale * (X @ spec.rotation().T) + spec.shift_vector


def invert_shift(spec, X):
    return ((X - spec.shift_vector) / spec.scale) @ spec.rotation()


def _draw(spec, per_class, rng):
    means = spec.means
    labels = np.repeat(np.arange(spec.num_classes), per_class)
    X = means[labels] + spec.sigma * rng.standard_normal((labels.size, spec.feature_dim))
    perm = rng.permutation(labels.size)
    return X[perm], labels[perm]


def _streams(spec):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(4)]


def generate(spec):
    """Draw ``(source, target_adapt, target_test)``; no row pairing across domains."""
    src_rng, adapt_rng, test_rng, _ = _streams(spec)
    Xs, ys = _draw(spec, spec.source_per_class, src_rng)
    Xa, ya = _draw(spec, spec.adapt_per_class, adapt_rng)
    Xt, yt = _draw(spec, spec.test_per_class, test_rng)
    return (
        Dataset(Xs, ys, "source"),
        Dataset(apply_shift(spec, Xa), ya, "target_adapt"),
        Dataset(apply_shift(spec, Xt), yt, "target_test"),
    )


def generate_source_holdout(spec, per_class=None):
    """Held-out source frames from a stream independent of :func:`generate`."""
    rng = _streams(spec)[3]
    X, y = _draw(spec, per_class or spec.test_per_class, rng)
    return Dataset(X, y, "source_test")


def generate_paired(spec, per_class=None):
    """Frame-aligned source/target copies, the setting teacher-student learning needs."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    X, y = _draw(spec, per_class or spec.adapt_per_class, rng)
    return Dataset(X, y, "paired_source"), Dataset(apply_shift(spec, X), y, "paired_target")


def estimate_bayes_error(spec, n_samples=100_000, seed=0):
    """Monte Carlo error of the Bayes classifier on the source domain.

    Classes are equiprobable and share an isotropic covariance, so the
    Bayes rule picks the class with the highest Gaussian log density.
    The shift is an isometry up to a common scale, so the target domain
    has the same Bayes error.  Returns ``(error, standard_error)``.
    """
    if n_samples < 10_000:
        raise PreconditionError("n_samples must be at least 1e4")
    rng = np.random.default_rng(seed)
    means = spec.means
    y = rng.integers(0, spec.num_classes, size=n_samples)
    X = means[y] + spec.sigma * rng.standard_normal((n_samples, spec.feature_dim))
    sq = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    logdens = -0.5 * sq / spec.sigma ** 2
    pred = np.argmax(logdens, axis=1)
    err = float(np.mean(pred != y))
    return err, math.sqrt(max(err * (1 - err), 1e-12) / n_samples)
