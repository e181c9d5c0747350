"""Evaluation metrics and the deterministic metrics.csv format.

Floats are written with repr(), which round-trips float64 exactly, so two
runs that produce bitwise-equal numbers produce byte-identical files.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..ensemble import mixture_log_density

__all__ = [
    "rmse",
    "npll",
    "wasserstein2_gaussians",
    "MetricsRecord",
    "write_metrics_csv",
    "read_metrics_csv",
]

CSV_HEADER = ("t", "agent_id", "rmse", "npll", "w2_to_centralized")


def rmse(predictions: np.ndarray, truths: np.ndarray) -> float:
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if predictions.shape != truths.shape:
        raise ValueError(
            f"shape mismatch: predictions {predictions.shape}, truths {truths.shape}"
        )
    if predictions.size == 0:
        raise ValueError("rmse over an empty set is undefined")
    return float(np.sqrt(np.mean((predictions - truths) ** 2)))


def npll(member_means, member_variances, truths, weights=None) -> float:
    """Mean negative predictive log-likelihood of truths.

    member_means / member_variances may be (n,) for a single predictive
    Gaussian per point or (M, n) for an M-component mixture; in the mixture
    case the exact mixture density is scored, not a moment-matched Gaussian.
    """
    means = np.asarray(member_means, dtype=float)
    variances = np.asarray(member_variances, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if means.ndim == 1:
        means = means[np.newaxis, :]
        variances = variances[np.newaxis, :]
    if weights is None:
        if means.shape[0] != 1:
            raise ValueError("weights are required for a multi-member mixture")
        weights = np.ones(1)
    weights = np.asarray(weights, dtype=float)
    if truths.size == 0:
        raise ValueError("npll over an empty set is undefined")
    log_densities = mixture_log_density(weights, means, variances, truths)
    return float(-np.mean(log_densities))


def _psd_sqrt(S: np.ndarray, name: str) -> np.ndarray:
    """Symmetric square root via eigendecomposition, clipping tiny negatives."""
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    floor = -1e-10 * max(np.trace(S), 1.0)
    if np.any(vals < floor):
        raise ValueError(
            f"{name} is not positive semidefinite: min eigenvalue {vals.min():.3e}"
        )
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def wasserstein2_gaussians(mu1, Sigma1, mu2, Sigma2) -> float:
    """2-Wasserstein distance between two Gaussians.

    W2^2 = |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}).
    """
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    Sigma1 = np.asarray(Sigma1, dtype=float)
    Sigma2 = np.asarray(Sigma2, dtype=float)
    if mu1.shape != mu2.shape or Sigma1.shape != Sigma2.shape:
        raise ValueError("moment shapes do not match")
    root2 = _psd_sqrt(Sigma2, "Sigma2")
    cross = _psd_sqrt(root2 @ Sigma1 @ root2, "S2^1/2 S1 S2^1/2")
    d2 = float(np.sum((mu1 - mu2) ** 2) + np.trace(Sigma1) + np.trace(Sigma2)
               - 2.0 * np.trace(cross))
    scale = max(float(np.trace(Sigma1) + np.trace(Sigma2)), 1.0)
    if d2 < -1e-10 * scale:
        raise ValueError(f"negative squared distance {d2:.3e} beyond tolerance")
    return float(np.sqrt(max(d2, 0.0)))


@dataclass(frozen=True)
class MetricsRecord:
    """One metrics.csv row: per agent, per evaluated epoch."""

    t: int
    agent_id: int
    rmse: float | None = None
    npll: float | None = None
    w2_to_centralized: float | None = None


def _cell(value) -> str:
    return "" if value is None else repr(float(value))


def write_metrics_csv(path, records: list[MetricsRecord]) -> None:
    """Write records in (t, agent_id) order with repr() float formatting."""
    ordered = sorted(records, key=lambda r: (r.t, r.agent_id))
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in ordered:
            writer.writerow(
                [r.t, r.agent_id, _cell(r.rmse), _cell(r.npll), _cell(r.w2_to_centralized)]
            )


def read_metrics_csv(path) -> list[MetricsRecord]:
    records = []
    with open(path, "r", newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected metrics header {header!r}")
        for row in reader:
            t, agent_id, r_, n_, w_ = row
            records.append(
                MetricsRecord(
                    t=int(t),
                    agent_id=int(agent_id),
                    rmse=float(r_) if r_ else None,
                    npll=float(n_) if n_ else None,
                    w2_to_centralized=float(w_) if w_ else None,
                )
            )
    return records
