"""Robust per-observation weights and weighted information increments.

Each observation is scored by its standardized residual
e = (y - yhat) / sigma_y against the pre-update predictive distribution
(sigma_y includes observation noise), mapped to a weight in [0, 1] by a
Huber or Hampel function, and folded into the increment through a diagonal
weight matrix W:

    P = sigma_obs^-2 Phi W Phi^T,   s = sigma_obs^-2 Phi W y.

Weights of one downweight nothing; a weight of zero deletes the observation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureMap
from .info_filter import Increment, InfoState, predict_batch

__all__ = [
    "RobustConfig",
    "huber_weight",
    "hampel_weight",
    "weights_for",
    "standardized_residuals",
    "robust_increment",
]

# Classical M-estimation defaults.
DEFAULT_HUBER_DELTA = 1.345
DEFAULT_HAMPEL_ABC = (2.0, 4.0, 8.0)


@dataclass(frozen=True)
class RobustConfig:
    """Choice of weight function: none, huber (delta), or hampel (a < b < c)."""

    kind: str = "none"
    delta: float = DEFAULT_HUBER_DELTA
    a: float = DEFAULT_HAMPEL_ABC[0]
    b: float = DEFAULT_HAMPEL_ABC[1]
    c: float = DEFAULT_HAMPEL_ABC[2]

    def __post_init__(self):
        if self.kind not in ("none", "huber", "hampel"):
            raise ValueError(f"unknown robust kind {self.kind!r}")
        if self.kind == "huber" and self.delta <= 0:
            raise ValueError("huber requires delta > 0")
        if self.kind == "hampel" and not (0 < self.a < self.b < self.c):
            raise ValueError(
                f"hampel requires 0 < a < b < c, got ({self.a}, {self.b}, {self.c})"
            )


def huber_weight(e, delta: float):
    """Huber weight: 1 for |e| <= delta, else delta/|e|.

    Accepts a scalar or an array of residuals; returns the same shape.
    """
    if delta <= 0:
        raise ValueError("delta must be strictly positive")
    e = np.asarray(e, dtype=float)
    ae = np.abs(e)
    w = np.where(ae <= delta, 1.0, delta / np.maximum(ae, delta))
    return float(w) if w.ndim == 0 else w


def hampel_weight(e, a: float, b: float, c: float):
    """Redescending Hampel weight.

    1 on [0, a]; a/|e| on (a, b]; a(c-|e|)/(|e|(c-b)) on (b, c]; 0 beyond c.
    Continuous everywhere, identically zero past c.
    """
    if not (0 < a < b < c):
        raise ValueError(f"breakpoints must satisfy 0 < a < b < c, got ({a}, {b}, {c})")
    e = np.asarray(e, dtype=float)
    ae = np.abs(e)
    safe = np.maximum(ae, a)  # avoids division by zero off-branch
    w = np.select(
        [ae <= a, ae <= b, ae <= c],
        [1.0, a / safe, a * (c - ae) / (safe * (c - b))],
        default=0.0,
    )
    return float(w) if w.ndim == 0 else w


def weights_for(e, cfg: RobustConfig):
    """Weights of the configured kind; all-ones for kind 'none'."""
    e = np.asarray(e, dtype=float)
    if cfg.kind == "huber":
        return huber_weight(e, cfg.delta)
    if cfg.kind == "hampel":
        return hampel_weight(e, cfg.a, cfg.b, cfg.c)
    return np.ones_like(e)


def standardized_residuals(
    state: InfoState, fm: FeatureMap, X: np.ndarray, y: np.ndarray
) -> np.ndarray:
    """Residuals (y - yhat)/sigma_y from the pre-update predictive distribution."""
    y = np.asarray(y, dtype=float)
    means, variances = predict_batch(state, fm, X)
    if means.shape != y.shape:
        raise ValueError(f"y shape {y.shape} does not match {means.shape} inputs")
    return (y - means) / np.sqrt(variances)


def robust_increment(
    Phi: np.ndarray, y: np.ndarray, weights: np.ndarray, obs_variance: float
) -> Increment:
    """Weighted increment P = Phi W Phi^T / s2, s = Phi W y / s2, W = diag(weights)."""
    Phi = np.asarray(Phi, dtype=float)
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if y.shape != (Phi.shape[1],) or weights.shape != y.shape:
        raise ValueError(
            f"shape mismatch: Phi {Phi.shape}, y {y.shape}, weights {weights.shape}"
        )
    if weights.size and (weights.min() < 0.0 or weights.max() > 1.0):
        raise ValueError("weights must lie in [0, 1]")
    if obs_variance <= 0:
        raise ValueError("obs_variance must be strictly positive")
    P = ((Phi * weights) @ Phi.T) / obs_variance
    P = 0.5 * (P + P.T)
    s = (Phi @ (weights * y)) / obs_variance
    return Increment(P=P, s=s)
