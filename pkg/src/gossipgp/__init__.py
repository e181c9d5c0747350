"""Decentralized Gaussian process regression with random Fourier features.

The model keeps a Gaussian posterior over random-feature weights in
information form (precision matrix and information vector), which makes
Bayesian updates additive: a network of agents can reconstruct the
centralized posterior by summing their local update increments via gossip.
On top of that sit robust residual reweighing, forgetting schemes for
drifting targets, and evidence-weighted hyperparameter ensembles.
"""

from .features import KernelSpec, FeatureMap, sample_frequencies, feature_matrix, feature_map
from .info_filter import (
    InfoState,
    Increment,
    Prediction,
    NumericalDegeneracyError,
    prior_state,
    compute_increment,
    apply_increment,
    posterior_moments,
    predict,
    predict_batch,
    save_state,
    load_state,
)
from .robust import (
    RobustConfig,
    huber_weight,
    hampel_weight,
    weights_for,
    standardized_residuals,
    robust_increment,
)
from .dynamics import DynamicsConfig, apply_forgetting, augment_time, augment_time_matrix
from .consensus import (
    Topology,
    ConsensusConfig,
    build_topology,
    metropolis_weights,
    consensus_sum,
)
from .ensemble import (
    EnsembleSpec,
    EnsembleState,
    MixturePrediction,
    member_seed,
    init_ensemble,
    update_evidence,
    ensemble_weights,
    mixture_log_density,
    mixture_predict,
    mixture_predict_batch,
)

__version__ = "0.1.0"

__all__ = [
    "KernelSpec",
    "FeatureMap",
    "sample_frequencies",
    "feature_matrix",
    "feature_map",
    "InfoState",
    "Increment",
    "Prediction",
    "NumericalDegeneracyError",
    "prior_state",
    "compute_increment",
    "apply_increment",
    "posterior_moments",
    "predict",
    "predict_batch",
    "save_state",
    "load_state",
    "RobustConfig",
    "huber_weight",
    "hampel_weight",
    "weights_for",
    "standardized_residuals",
    "robust_increment",
    "DynamicsConfig",
    "apply_forgetting",
    "augment_time",
    "augment_time_matrix",
    "Topology",
    "ConsensusConfig",
    "build_topology",
    "metropolis_weights",
    "consensus_sum",
    "EnsembleSpec",
    "EnsembleState",
    "MixturePrediction",
    "member_seed",
    "init_ensemble",
    "update_evidence",
    "ensemble_weights",
    "mixture_log_density",
    "mixture_predict",
    "mixture_predict_batch",
    "__version__",
]
