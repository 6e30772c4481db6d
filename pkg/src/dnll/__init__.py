"""Dual-model semi-supervised learning with pseudo-negative labels.

Two independently initialised classifiers teach each other which classes an
unlabeled item does *not* belong to. Weak-view predictions become pseudo
labels; a few of the remaining classes are sampled as negative targets
(uniformly, or error-perception weighted) and scored on strong views with
the negative-label loss. The ``theory`` module checks the framework's two
combinatorial guarantees against direct Monte Carlo simulation.
"""

from .config import Seeds, TrainConfig, parse_config, parse_config_file, serialize_config
from .data import (
    AugmentConfig,
    Dataset,
    Split,
    augment_strong,
    augment_weak,
    load_pair,
    load_train_test,
    parse_idx,
    read_split_manifest,
    split_dataset,
    split_indices,
    write_idx,
    write_split_manifest,
)
from .losses import LossResult, cross_entropy, negative_loss, one_hot
from .negative_labels import (
    MisclassProfile,
    NegativeLabelSet,
    candidate_count,
    normalize_profile,
    pseudo_label,
    sample_negative_batch,
    sample_negatives_ep,
    sample_negatives_epm,
    update_misclass_profile,
)
from .nn import (
    Architecture,
    ForwardCache,
    Gradients,
    ModelState,
    backprop,
    backprop_from,
    forward,
    init_model,
    predict_probs,
    softmax,
)
from .optim import OptimizerConfig, cosine_lr, sgd_step
from .synthetic import synthetic_digit, synthetic_digits
from .theory import (
    SimResult,
    TransferModel,
    coupling_probability,
    coupling_probability_stirling,
    run_grid,
    simulate_coupling,
    simulate_transfer_error,
    transfer_error_rate,
)
from .trainer import (
    METRICS_HEADER,
    DualTrainer,
    EpochMetrics,
    TrainData,
    evaluate,
    evaluate_ensemble,
)

__version__ = "0.1.0"
