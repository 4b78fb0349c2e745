"""Domain adaptation of softmax classifiers through neural label embeddings.

A source classifier is distilled into a codebook of per-class posterior
centroids (l-vectors); a target classifier is then trained with those
l-vectors as soft targets, with no frame pairing between the domains.
"""

from .codebook import (
    CentroidTrainConfig,
    Codebook,
    LogitTable,
    init_logits,
    kl_divergence,
    learn_kl,
    learn_l2,
    learn_skl,
    lookup,
    skl_divergence,
)
from .estimators import LabelEmbedding, NLEAdapter, SoftTargetMLPClassifier
from .exceptions import (
    ConfigError,
    DivergenceError,
    InputShapeError,
    MissingEmbeddingError,
    NLEError,
    NumericDomainError,
    PairingError,
    PreconditionError,
)
from .nn import Network, TrainConfig, forward, forward_logits, gradient_check, soft_cross_entropy, train
from .pipeline import (
    ExperimentSpec,
    RunReport,
    adapt_nle,
    compare,
    distill,
    evaluate,
    retrain_one_hot,
    train_source,
    ts_learn,
)
from .synth import Dataset, DomainShiftSpec, estimate_bayes_error, generate

__version__ = "0.1.0"
