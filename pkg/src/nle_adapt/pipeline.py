"""End-to-end label-embedding adaptation and the method comparison suite.

Seeds
-----
One master seed drives a whole comparison.  Run ``i`` and stage ``s`` get
``SeedSequence([master, i, STAGES[s]]).generate_state(1)[0]``, so each stage
of each run is reproducible on its own.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import codebook as cbm
from . import nn
from ._validation import one_hot
from .exceptions import MissingEmbeddingError, PairingError, PreconditionError
from .synth import Dataset, DomainShiftSpec, generate, generate_paired, generate_source_holdout

log = logging.getLogger(__name__)

METHODS = ("unadapted", "one_hot", "nle_l2", "nle_kl", "nle_skl", "ts")
STAGES = {"data": 0, "source": 1, "adapt": 2, "centroid": 3}


def stage_seed(master_seed, run, stage):
    ss = np.random.SeedSequence([int(master_seed), int(run), STAGES[stage]])
    return int(ss.generate_state(1)[0])


@dataclass
class RunReport:
    method: str
    error_rate: float
    seed: object = None
    epochs: int = 0
    loss_curve: list = field(default_factory=list)
    wall_time_s: float = 0.0
    n_eval: int = 0
    n_errors: int = 0

    def to_dict(self):
        return {
            "method": self.method,
            "seed": self.seed,
            "error_rate": self.error_rate,
            "n_errors": self.n_errors,
            "n_eval": self.n_eval,
            "epochs": self.epochs,
            "wall_time_s": self.wall_time_s,
            "loss_curve": list(self.loss_curve),
        }


def default_source_config(seed=0):
    return nn.TrainConfig("adam", 1e-3, 128, 30, 1e-6, seed)


def default_adapt_config(seed=0):
    return nn.TrainConfig("adam", 1e-3, 32, 50, 1e-9, seed)


def train_source(train, cfg=None, hidden=(64, 64), activation="tanh", num_classes=None,
                 return_curve=False):
    """Fit the source-domain classifier on one-hot labels."""
    cfg = cfg or default_source_config()
    present = np.unique(train.labels)
    if present.size < 2:
        raise PreconditionError("source data must cover at least two classes")
    C = num_classes or int(train.labels.max()) + 1
    net = nn.init_network([train.n_features, *hidden, C], activation, seed=cfg.seed)
    return nn.train(net, train.features, one_hot(train.labels, C), cfg, return_curve)


def distill(source, src, method, cfg=None):
    """Forward the source data once and learn a codebook with ``method``."""
    if method not in cbm.METHODS:
        raise PreconditionError(f"unknown distillation method {method!r}")
    Z = nn.forward_logits(source, src.features)
    O = nn.softmax(Z)
    C = source.n_classes
    if method == "l2":
        return cbm.learn_l2(O, src.labels, C)
    init = cbm.init_logits(Z, src.labels, C)
    learn = cbm.learn_kl if method == "kl" else cbm.learn_skl
    return learn(O, src.labels, init, cfg or cbm.CentroidTrainConfig())


def soft_targets(cb, labels, uncovered="error"):
    if uncovered == "one_hot":
        cb = cb.with_one_hot_fallback()
    elif uncovered != "error":
        raise PreconditionError(f"unknown uncovered-label policy {uncovered!r}")
    bad = cb.missing(labels)
    if bad:
        raise MissingEmbeddingError(bad, cb.num_classes)
    return cb.lookup(labels)


def adapt_nle(init, tgt, cb, cfg=None, uncovered="error", return_curve=False):
    """Train a copy of ``init`` on target data with l-vectors as soft targets.

    Every target label is checked against the codebook before any update.
    """
    T = soft_targets(cb, tgt.labels, uncovered)
    return nn.train(init, tgt.features, T, cfg or default_adapt_config(), return_curve)


def retrain_one_hot(init, tgt, cfg=None, return_curve=False):
    T = one_hot(tgt.labels, init.n_classes)
    return nn.train(init, tgt.features, T, cfg or default_adapt_config(), return_curve)


def ts_learn(teacher, student_init, paired, cfg=None, return_curve=False):
    """Teacher-student learning on frame-aligned ``(source_X, target_X)``.

    The student sees target frames and matches the teacher's posteriors on
    the aligned source frames.  Pure teacher posteriors are used, with no
    one-hot interpolation.
    """
    Xs, Xt = (np.asarray(a, dtype=np.float64) for a in paired)
    if Xs.shape[0] != Xt.shape[0]:
        raise PairingError(f"paired inputs have {Xs.shape[0]} and {Xt.shape[0]} rows")
    T = nn.forward(teacher, Xs)
    return nn.train(student_init, Xt, T, cfg or default_adapt_config(), return_curve)


def target_construction_times(teacher, paired_source_X, cb, labels, repeats=5):
    """Best-of-``repeats`` seconds to build one epoch of soft targets.

    Returns ``(lookup_s, teacher_forward_s)``: a codebook lookup over
    ``labels`` versus a teacher forward pass over the paired source frames.
    """
    def best(fn):
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return min(times)

    return (best(lambda: cb.lookup(labels)),
            best(lambda: nn.forward(teacher, paired_source_X)))


def evaluate(net, data, method="", seed=None):
    """Classification error with ties resolved toward the lowest class index."""
    pred = np.argmax(nn.forward(net, data.features), axis=1)
    n_err = int(np.count_nonzero(pred != data.labels))
    return RunReport(method, n_err / len(data), seed, n_eval=len(data), n_errors=n_err)


# ---------------------------------------------------------------------------
# comparison suite

TASKS = {
    "default": DomainShiftSpec,
    "null_shift": lambda **kw: DomainShiftSpec(**kw).identity(),
    "small": lambda **kw: DomainShiftSpec(
        **{"source_per_class": 300, "adapt_per_class": 60, "test_per_class": 100, **kw}),
}


def task_spec(name, seed=0, **overrides):
    if name not in TASKS:
        raise PreconditionError(f"unknown task {name!r}; known: {sorted(TASKS)}")
    return TASKS[name](**overrides).replace(seed=seed)


@dataclass
class ExperimentSpec:
    task: str = "default"
    shift: dict = field(default_factory=dict)
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    source_cfg: nn.TrainConfig = field(default_factory=default_source_config)
    adapt_cfg: nn.TrainConfig = field(default_factory=default_adapt_config)
    centroid_cfg: cbm.CentroidTrainConfig = field(default_factory=cbm.CentroidTrainConfig)
    num_seeds: int = 10
    master_seed: int = 0
    uncovered: str = "error"

    def __post_init__(self):
        if self.task not in TASKS:
            raise PreconditionError(f"unknown task {self.task!r}")
        if self.num_seeds < 1:
            raise PreconditionError("num_seeds must be positive")


def _with_seed(cfg, seed):
    return type(cfg)(**{**cfg.to_dict(), "seed": seed})


def _run_seed(methods, spec, run):
    data_spec = task_spec(spec.task, stage_seed(spec.master_seed, run, "data"), **spec.shift)
    src, adapt, test = generate(data_spec)
    C = data_spec.num_classes
    source = train_source(src, _with_seed(spec.source_cfg, stage_seed(spec.master_seed, run, "source")),
                          spec.hidden, spec.activation, C)
    adapt_cfg = _with_seed(spec.adapt_cfg, stage_seed(spec.master_seed, run, "adapt"))
    centroid_cfg = _with_seed(spec.centroid_cfg, stage_seed(spec.master_seed, run, "centroid"))

    out = {}
    for method in methods:
        t0 = time.perf_counter()
        curve = []
        if method == "unadapted":
            net = source
        elif method == "one_hot":
            net, curve = retrain_one_hot(source, adapt, adapt_cfg, return_curve=True)
        elif method.startswith("nle_"):
            cb = distill(source, src, method[4:], centroid_cfg)
            net, curve = adapt_nle(source, adapt, cb, adapt_cfg, spec.uncovered, return_curve=True)
        elif method == "ts":
            p_src, p_tgt = generate_paired(data_spec)
            net, curve = ts_learn(source, source, (p_src.features, p_tgt.features),
                                  adapt_cfg, return_curve=True)
        else:
            raise PreconditionError(f"unknown method {method!r}")
        rep = evaluate(net, test, method, run)
        rep.loss_curve = curve
        rep.epochs = max(len(curve) - 1, 0)
        rep.wall_time_s = time.perf_counter() - t0
        out[method] = rep
        log.info("seed %d %-9s error %.4f", run, method, rep.error_rate)
    return out


def compare(methods, spec):
    """One report per method per seed, then one mean report per method.

    Runs share the data, source model and adaptation seed for a given run
    index, so methods differ only in their training targets.  Reports are
    ordered as ``methods`` (runs ascending within a method), followed by the
    means in the same method order.
    """
    methods = list(methods)
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise PreconditionError(f"unknown method(s) {unknown}; known: {list(METHODS)}")
    if not methods:
        return []
    per_run = [_run_seed(methods, spec, run) for run in range(spec.num_seeds)]
    reports = [per_run[r][m] for m in methods for r in range(spec.num_seeds)]
    for m in methods:
        runs = [per_run[r][m] for r in range(spec.num_seeds)]
        reports.append(RunReport(
            m, float(np.mean([r.error_rate for r in runs])), "mean",
            epochs=float(np.mean([r.epochs for r in runs])),
            wall_time_s=float(np.mean([r.wall_time_s for r in runs])),
            n_eval=sum(r.n_eval for r in runs), n_errors=sum(r.n_errors for r in runs),
        ))
    return reports


def source_holdout_error(spec, run=0):
    """Held-out source error of the run-``run`` source model (sanity check)."""
    data_spec = task_spec(spec.task, stage_seed(spec.master_seed, run, "data"), **spec.shift)
    src, _, _ = generate(data_spec)
    source = train_source(src, _with_seed(spec.source_cfg, stage_seed(spec.master_seed, run, "source")),
                          spec.hidden, spec.activation, data_spec.num_classes)
    return evaluate(source, generate_source_holdout(data_spec)).error_rate
