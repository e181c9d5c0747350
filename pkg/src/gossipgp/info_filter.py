"""Information-form posterior of the random-feature GP linear model.

The model is y = phi(x)^T theta + noise with theta ~ N(0, sigma_theta^2 I).
The posterior after T batches is Gaussian with

    D = sigma_obs^-2 sum_t Phi_t Phi_t^T + sigma_theta^-2 I    (precision)
    eta = sigma_obs^-2 sum_t Phi_t y_t                         (information vector)
    Sigma = D^-1,  mu = D^-1 eta.

Each batch contributes an additive increment (P, s) with
P = sigma_obs^-2 Phi Phi^T and s = sigma_obs^-2 Phi y, which makes the
recursion online (D += P, eta += s) and makes network-wide fusion a plain
sum of per-agent increments.

Snapshot serialization (see save_state/load_state): little-endian binary,
magic b"GGPIF001", uint32 dim, float64 obs_variance, float64 prior_variance,
then D row-major (dim*dim float64) and eta (dim float64).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np
import scipy.linalg

from .features import FeatureMap, KernelSpec, feature_matrix

__all__ = [
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
]

STATE_MAGIC = b"GGPIF001"

# Relative jitter added once if the Cholesky factorization fails.
_JITTER_SCALE = 1e-10


class NumericalDegeneracyError(RuntimeError):
    """Raised when the information matrix cannot be factorized as SPD."""


@dataclass
class InfoState:
    """Information-form Gaussian posterior of one RF-GP model.

    Treated as immutable: every operation returns a new state. Single-writer
    per agent and per ensemble member.
    """

    D: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    obs_variance: float
    prior_variance: float

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        if self.D.ndim != 2 or self.D.shape[0] != self.D.shape[1]:
            raise ValueError(f"D must be square, got shape {self.D.shape}")
        if self.eta.shape != (self.D.shape[0],):
            raise ValueError(
                f"eta shape {self.eta.shape} inconsistent with D shape {self.D.shape}"
            )
        if self.obs_variance <= 0 or self.prior_variance <= 0:
            raise ValueError("variances must be strictly positive")

    @property
    def dim(self) -> int:
        return self.D.shape[0]


@dataclass
class Increment:
    """One batch's additive contribution (P, s) to an InfoState.

    P is symmetric PSD with rank at most the batch size; this is the unit
    exchanged by consensus.
    """

    P: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if self.P.ndim != 2 or self.P.shape[0] != self.P.shape[1]:
            raise ValueError(f"P must be square, got shape {self.P.shape}")
        if self.s.shape != (self.P.shape[0],):
            raise ValueError(
                f"s shape {self.s.shape} inconsistent with P shape {self.P.shape}"
            )

    @property
    def dim(self) -> int:
        return self.P.shape[0]


@dataclass(frozen=True)
class Prediction:
    """Predictive distribution at one input; variance includes obs noise."""

    mean: float
    variance: float


def prior_state(spec: KernelSpec, J: int) -> InfoState:
    """Prior information state: D = I / sigma_theta^2, eta = 0."""
    if J < 1:
        raise ValueError(f"J must be >= 1, got {J}")
    dim = 2 * J
    D = np.eye(dim) / spec.prior_variance
    return InfoState(
        D=D,
        eta=np.zeros(dim),
        obs_variance=spec.obs_variance,
        prior_variance=spec.prior_variance,
    )


def compute_increment(Phi: np.ndarray, y: np.ndarray, obs_variance: float) -> Increment:
    """Increment of one batch: P = Phi Phi^T / s2, s = Phi y / s2."""
    Phi = np.asarray(Phi, dtype=float)
    y = np.asarray(y, dtype=float)
    if Phi.ndim != 2:
        raise ValueError(f"Phi must be 2-D, got shape {Phi.shape}")
    if y.shape != (Phi.shape[1],):
        raise ValueError(
            f"batch size mismatch: Phi has {Phi.shape[1]} columns, y has shape {y.shape}"
        )
    if obs_variance <= 0:
        raise ValueError("obs_variance must be strictly positive")
    P = (Phi @ Phi.T) / obs_variance
    P = 0.5 * (P + P.T)  # exact no-op in value, pins bitwise symmetry
    s = (Phi @ y) / obs_variance
    return Increment(P=P, s=s)


def apply_increment(state: InfoState, inc: Increment) -> InfoState:
    """Add an increment: D += P, eta += s. Pure, returns a new state."""
    if inc.dim != state.dim:
        raise ValueError(f"increment dim {inc.dim} does not match state dim {state.dim}")
    D = state.D + inc.P
    D = 0.5 * (D + D.T)
    return InfoState(
        D=D,
        eta=state.eta + inc.s,
        obs_variance=state.obs_variance,
        prior_variance=state.prior_variance,
    )


def _cholesky(state: InfoState):
    """SPD factor of D with a single jitter retry on failure."""
    try:
        return scipy.linalg.cho_factor(state.D, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        pass
    jitter = _JITTER_SCALE * np.trace(state.D) / state.dim
    try:
        return scipy.linalg.cho_factor(
            state.D + jitter * np.eye(state.dim), lower=True, check_finite=False
        )
    except scipy.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(state.D)[0])
        raise NumericalDegeneracyError(
            f"information matrix is not positive definite even after jitter "
            f"{jitter:.3e}; smallest eigenvalue {smallest:.6e}"
        ) from None


def posterior_moments(state: InfoState) -> tuple[np.ndarray, np.ndarray]:
    """Recover (mu, Sigma) = (D^-1 eta, D^-1) via Cholesky; Sigma symmetrized."""
    factor = _cholesky(state)
    Sigma = scipy.linalg.cho_solve(factor, np.eye(state.dim), check_finite=False)
    Sigma = 0.5 * (Sigma + Sigma.T)
    mu = scipy.linalg.cho_solve(factor, state.eta, check_finite=False)
    return mu, Sigma


def predict_batch(
    state: InfoState, fm: FeatureMap, X: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Predictive means and variances at the rows of X, sharing one factorization.

    mean_i = phi(x_i)^T mu and var_i = phi(x_i)^T Sigma phi(x_i) + sigma_obs^2.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    Phi = feature_matrix(fm, X)
    if Phi.shape[0] != state.dim:
        raise ValueError(
            f"feature dim {Phi.shape[0]} does not match state dim {state.dim}"
        )
    factor = _cholesky(state)
    SigmaPhi = scipy.linalg.cho_solve(factor, Phi, check_finite=False)
    means = SigmaPhi.T @ state.eta
    variances = np.einsum("jn,jn->n", Phi, SigmaPhi) + state.obs_variance
    return means, variances


def predict(state: InfoState, fm: FeatureMap, x_star: np.ndarray) -> Prediction:
    """Predictive distribution at a single input x_star."""
    x_star = np.asarray(x_star, dtype=float)
    means, variances = predict_batch(state, fm, x_star[np.newaxis, :])
    return Prediction(mean=float(means[0]), variance=float(variances[0]))


def save_state(state: InfoState, fp: BinaryIO) -> None:
    """Write the binary snapshot of one InfoState (layout in module docstring)."""
    fp.write(STATE_MAGIC)
    fp.write(struct.pack("<I", state.dim))
    fp.write(struct.pack("<dd", state.obs_variance, state.prior_variance))
    fp.write(np.ascontiguousarray(state.D, dtype="<f8").tobytes())
    fp.write(np.ascontiguousarray(state.eta, dtype="<f8").tobytes())


def load_state(fp: BinaryIO) -> InfoState:
    """Read one InfoState snapshot written by save_state."""
    magic = fp.read(len(STATE_MAGIC))
    if magic != STATE_MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}, expected {STATE_MAGIC!r}")
    (dim,) = struct.unpack("<I", fp.read(4))
    obs_variance, prior_variance = struct.unpack("<dd", fp.read(16))
    D = np.frombuffer(fp.read(8 * dim * dim), dtype="<f8").reshape(dim, dim)
    eta = np.frombuffer(fp.read(8 * dim), dtype="<f8")
    return InfoState(
        D=D.astype(float),
        eta=eta.astype(float),
        obs_variance=obs_variance,
        prior_variance=prior_variance,
    )
