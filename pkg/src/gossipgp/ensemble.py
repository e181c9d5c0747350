"""Ensembles of RF-GP models with evidence-weighted mixture predictions.

Each agent runs M models with distinct kernel hyperparameters. Member
weights are the softmax of accumulated prequential evidence (one-step-ahead
predictive log-densities of incoming batches). Mixture moments are matched
exactly; log-density evaluation uses the exact Gaussian mixture, not the
moment-matched Gaussian.

Every member's feature basis is derived from (base_seed, member_index) and
is therefore identical at every agent, which is what makes summing
information increments across the network meaningful.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .features import FeatureMap, KernelSpec, sample_frequencies
from .info_filter import InfoState, predict_batch, prior_state

__all__ = [
    "EnsembleSpec",
    "EnsembleState",
    "MixturePrediction",
    "member_seed",
    "init_ensemble",
    "update_evidence",
    "ensemble_weights",
    "mixture_predict",
    "mixture_predict_batch",
    "mixture_log_density",
]


def member_seed(base_seed: int, index: int) -> int:
    """Agent-independent frequency seed for one ensemble member."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class EnsembleSpec:
    """M kernel hypotheses sharing a feature count and a base seed."""

    members: tuple[KernelSpec, ...]
    shared_J: int
    base_seed: int = 0

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if len(members) == 0:
            raise ValueError("ensemble needs at least one member")
        if self.shared_J < 1:
            raise ValueError(f"shared_J must be >= 1, got {self.shared_J}")
        d = members[0].spatial_dim
        temporal = members[0].temporal_lengthscale is not None
        for m in members:
            if m.spatial_dim != d:
                raise ValueError("all members must share the spatial input dimension")
            if (m.temporal_lengthscale is not None) != temporal:
                raise ValueError("members must be all static or all spatiotemporal")

    @property
    def num_members(self) -> int:
        return len(self.members)

    @classmethod
    def from_grid(
        cls,
        lengthscales,
        prior_variances,
        obs_variance: float,
        spatial_dim: int,
        shared_J: int,
        base_seed: int = 0,
        temporal_lengthscale: float | None = None,
    ) -> "EnsembleSpec":
        """Cartesian product of isotropic lengthscales and prior variances.

        Member order is (lengthscale-major, prior-variance-minor).
        """
        members = [
            KernelSpec(
                spatial_lengthscales=(float(ls),) * spatial_dim,
                temporal_lengthscale=temporal_lengthscale,
                prior_variance=float(pv),
                obs_variance=obs_variance,
            )
            for ls, pv in itertools.product(lengthscales, prior_variances)
        ]
        return cls(members=tuple(members), shared_J=shared_J, base_seed=base_seed)


@dataclass
class EnsembleState:
    """Per-member information states plus accumulated log-evidence."""

    models: list[InfoState]
    log_evidence: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.log_evidence = np.asarray(self.log_evidence, dtype=float)
        if self.log_evidence.shape != (len(self.models),):
            raise ValueError("log_evidence length must match the member count")

    @property
    def num_members(self) -> int:
        return len(self.models)


def init_ensemble(spec: EnsembleSpec) -> tuple[EnsembleState, list[FeatureMap]]:
    """Prior states, zero evidence, and the shared per-member feature maps."""
    maps = [
        sample_frequencies(m, spec.shared_J, m.spatial_dim, member_seed(spec.base_seed, i))
        for i, m in enumerate(spec.members)
    ]
    models = [prior_state(m, spec.shared_J) for m in spec.members]
    state = EnsembleState(models=models, log_evidence=np.zeros(spec.num_members))
    return state, maps


def update_evidence(state: EnsembleState, log_densities: np.ndarray) -> EnsembleState:
    """Accumulate one batch's per-member predictive log-densities."""
    inc = np.asarray(log_densities, dtype=float)
    if inc.shape != state.log_evidence.shape:
        raise ValueError(
            f"expected {state.log_evidence.shape[0]} log-densities, got shape {inc.shape}"
        )
    if not np.all(np.isfinite(inc)):
        raise ValueError("log-densities must be finite")
    return EnsembleState(models=state.models, log_evidence=state.log_evidence + inc)


def ensemble_weights(state: EnsembleState) -> np.ndarray:
    """Softmax of log-evidence, invariant to a common additive shift."""
    z = state.log_evidence - state.log_evidence.max()
    w = np.exp(z)
    return w / w.sum()


def mixture_log_density(
    weights: np.ndarray,
    member_means: np.ndarray,
    member_variances: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    """log sum_m w_m N(y | mu_m, var_m) for vectors of evaluation points.

    member_means/member_variances have shape (M, n); y has shape (n,).
    """
    member_means = np.asarray(member_means, dtype=float)
    member_variances = np.asarray(member_variances, dtype=float)
    y = np.asarray(y, dtype=float)
    log_norm = -0.5 * (np.log(2.0 * np.pi * member_variances))
    log_pdf = log_norm - 0.5 * (y[np.newaxis, :] - member_means) ** 2 / member_variances
    return logsumexp(log_pdf, axis=0, b=np.asarray(weights)[:, np.newaxis])


@dataclass(frozen=True)
class MixturePrediction:
    """Moment-matched mixture moments plus the exact mixture density."""

    mean: float
    variance: float
    member_means: np.ndarray = field(repr=False)
    member_variances: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def log_density(self, y: float) -> float:
        return float(
            mixture_log_density(
                self.weights,
                self.member_means[:, np.newaxis],
                self.member_variances[:, np.newaxis],
                np.asarray([y], dtype=float),
            )[0]
        )


def mixture_predict_batch(
    state: EnsembleState, feature_maps: list[FeatureMap], X: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Mixture mean/variance at the rows of X plus per-member moments.

    Returns (mean, variance, member_means, member_variances, weights) with
    member arrays of shape (M, n). The variance is moment-matched:
    sum_m w_m (var_m + mu_m^2) - mean^2.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    M = state.num_members
    member_means = np.empty((M, n))
    member_variances = np.empty((M, n))
    for m, (model, fm) in enumerate(zip(state.models, feature_maps)):
        member_means[m], member_variances[m] = predict_batch(model, fm, X)
    w = ensemble_weights(state)
    mean = w @ member_means
    variance = w @ (member_variances + member_means**2) - mean**2
    return mean, variance, member_means, member_variances, w


def mixture_predict(
    state: EnsembleState, feature_maps: list[FeatureMap], x_star: np.ndarray
) -> MixturePrediction:
    """Mixture prediction at a single input."""
    x_star = np.asarray(x_star, dtype=float)
    mean, variance, mm, mv, w = mixture_predict_batch(
        state, feature_maps, x_star[np.newaxis, :]
    )
    return MixturePrediction(
        mean=float(mean[0]),
        variance=float(variance[0]),
        member_means=mm[:, 0],
        member_variances=mv[:, 0],
        weights=w,
    )
