"""Multi-agent simulation loop.

Each epoch runs, in order: forgetting, residual weighing, local increment
construction, gossip, increment application, evidence accumulation, then
metric evaluation. All agents share the ensemble's feature maps, so
network-wide sums of increments are exactly the increments a fusion center
would form from the pooled batch.

A shadow centralized oracle is maintained whenever the w2 metric is
requested (or states are captured): it applies the exact network sum of the
per-agent increments every epoch. With eval.w2_oracle == "identical" the
oracle uses the same robustness weights as the agents; with "unit" it uses
unit weights, measuring what the robust network deviates from a
non-robust fusion center.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..consensus import consensus_sum
from ..dynamics import apply_forgetting, augment_time_matrix
from ..ensemble import (
    EnsembleState,
    ensemble_weights,
    init_ensemble,
    update_evidence,
    mixture_predict_batch,
)
from ..features import feature_matrix
from ..info_filter import (
    Increment,
    InfoState,
    apply_increment,
    load_state,
    posterior_moments,
    predict_batch,
    prior_state,
    save_state,
)
from ..robust import robust_increment, weights_for
from .config import GridFileSource, Scenario, SyntheticSource
from .metrics import MetricsRecord, npll, rmse, wasserstein2_gaussians
from .streams import Stream, inject_outliers, load_grid_dataset, synth_stream

__all__ = [
    "RunError",
    "RunResult",
    "materialize_stream",
    "run_scenario",
    "save_snapshot",
    "load_snapshot",
    "SNAPSHOT_MAGIC",
]

SNAPSHOT_MAGIC = b"GGPSNAP1"


class RunError(RuntimeError):
    """A module failure during a run, annotated with epoch/agent context."""


@dataclass
class RunResult:
    scenario: Scenario
    stream: Stream = field(repr=False)
    records: list[MetricsRecord] = field(repr=False)
    feature_maps: list = field(repr=False)
    agent_states: list[EnsembleState] = field(repr=False)
    oracle_state: EnsembleState | None = field(repr=False)
    snapshots: dict = field(repr=False)
    captured: dict | None = field(repr=False, default=None)


def materialize_stream(scenario: Scenario) -> Stream:
    if isinstance(scenario.stream_source, GridFileSource):
        stream = load_grid_dataset(scenario.stream_source.path, scenario.num_agents)
    elif isinstance(scenario.stream_source, SyntheticSource):
        stream = synth_stream(scenario.stream_source.params, seed=scenario.seed)
    else:
        raise TypeError(f"unknown stream source {scenario.stream_source!r}")
    if scenario.outliers is not None:
        stream = inject_outliers(stream, scenario.outliers)
    return stream


def _gaussian_log_pdf(y, means, variances):
    return -0.5 * (np.log(2.0 * np.pi * variances) + (y - means) ** 2 / variances)


def _prior_ensemble(spec) -> EnsembleState:
    models = tuple(prior_state(m, spec.shared_J) for m in spec.members)
    return EnsembleState(models=models, log_evidence=np.zeros(spec.num_members))


def run_scenario(scenario: Scenario, capture_states: bool = False) -> RunResult:
    stream = materialize_stream(scenario)
    _check_stream(scenario, stream)
    K = scenario.num_agents
    spec = scenario.ensemble
    M = spec.num_members
    dim = 2 * spec.shared_J
    spatiotemporal = scenario.dynamics.mode == "spatiotemporal"

    first_state, fmaps = init_ensemble(spec)
    agent_states = [first_state] + [_prior_ensemble(spec) for _ in range(K - 1)]

    need_w2 = "w2" in scenario.eval.metrics
    track_oracle = need_w2 or capture_states
    oracle_state = _prior_ensemble(spec) if track_oracle else None
    unit_oracle = scenario.eval.w2_oracle == "unit"

    share_increments = scenario.consensus_mode == "sum"
    share_evidence = share_increments and scenario.evidence_mode == "consensus"

    eval_epochs = scenario.eval.epochs
    if eval_epochs is None:
        eval_epochs = stream.epochs
    else:
        missing = set(eval_epochs) - set(stream.epochs)
        if missing:
            raise RunError(f"eval epochs {sorted(missing)} are not in the stream")
    eval_set = set(eval_epochs)
    snapshot_set = set(scenario.eval.snapshot_epochs)
    bad_snapshots = snapshot_set - set(stream.epochs)
    if bad_snapshots:
        raise RunError(f"snapshot epochs {sorted(bad_snapshots)} are not in the stream")

    records: list[MetricsRecord] = []
    snapshots: dict[int, list[list[InfoState]]] = {}
    captured: dict | None = {} if capture_states else None

    for t in stream.epochs:
        batches = stream.batches[t]
        # Per-agent local step: forget, weigh residuals, build increments.
        forgotten = [[None] * M for _ in range(K)]
        local_inc = [[None] * M for _ in range(K)]
        unit_inc = [[None] * M for _ in range(K)] if (track_oracle and unit_oracle) else None
        local_ev = np.zeros((K, M))
        unit_ev = np.zeros((K, M))
        for k in range(K):
            batch = batches[k]
            X_in = augment_time_matrix(batch.X, t) if spatiotemporal else batch.X
            for m in range(M):
                try:
                    state = apply_forgetting(agent_states[k].models[m], scenario.dynamics)
                    forgotten[k][m] = state
                    member = spec.members[m]
                    means, variances = predict_batch(state, fmaps[m], X_in)
                    e = (batch.y - means) / np.sqrt(variances)
                    w = weights_for(e, scenario.robust)
                    Phi = feature_matrix(fmaps[m], X_in)
                    local_inc[k][m] = robust_increment(Phi, batch.y, w, member.obs_variance)
                    log_pdf = _gaussian_log_pdf(batch.y, means, variances)
                    local_ev[k, m] = float(np.sum(w * log_pdf))
                    unit_ev[k, m] = float(np.sum(log_pdf))
                    if unit_inc is not None:
                        unit_inc[k][m] = robust_increment(
                            Phi, batch.y, np.ones_like(batch.y), member.obs_variance
                        )
                except Exception as exc:
                    raise RunError(f"epoch {t}, agent {k}, member {m}: {exc}") from exc

        # Gossip: approximate network sums of the stacked increments.
        if share_increments:
            packed = [_pack(local_inc[k], local_ev[k], share_evidence) for k in range(K)]
            mixed = consensus_sum(packed, scenario.topology, scenario.consensus)
            applied_inc, applied_ev = zip(
                *(_unpack(mixed[k], M, dim, local_ev[k], share_evidence) for k in range(K))
            )
        else:
            applied_inc = local_inc
            applied_ev = local_ev

        # Apply and accumulate evidence.
        for k in range(K):
            try:
                models = tuple(
                    apply_increment(forgotten[k][m], applied_inc[k][m]) for m in range(M)
                )
                agent_states[k] = update_evidence(
                    EnsembleState(models=models, log_evidence=agent_states[k].log_evidence),
                    applied_ev[k],
                )
            except Exception as exc:
                raise RunError(f"epoch {t}, agent {k}: {exc}") from exc

        if track_oracle:
            oracle_inc = unit_inc if unit_oracle else local_inc
            oracle_ev = unit_ev if unit_oracle else local_ev
            try:
                models = []
                for m in range(M):
                    o = apply_forgetting(oracle_state.models[m], scenario.dynamics)
                    total = Increment(
                        P=_sum_over_agents([oracle_inc[k][m].P for k in range(K)]),
                        s=_sum_over_agents([oracle_inc[k][m].s for k in range(K)]),
                    )
                    models.append(apply_increment(o, total))
                oracle_state = update_evidence(
                    EnsembleState(
                        models=tuple(models), log_evidence=oracle_state.log_evidence
                    ),
                    oracle_ev.sum(axis=0),
                )
            except Exception as exc:
                raise RunError(f"epoch {t}, centralized oracle: {exc}") from exc

        if t in eval_set:
            records.extend(
                _evaluate_epoch(scenario, stream, t, agent_states, oracle_state, fmaps)
            )
        if t in snapshot_set:
            snapshots[t] = [list(agent_states[k].models) for k in range(K)]
        if capture_states:
            captured[t] = {
                "agents": list(agent_states),
                "oracle": oracle_state,
            }

    return RunResult(
        scenario=scenario,
        stream=stream,
        records=records,
        feature_maps=fmaps,
        agent_states=agent_states,
        oracle_state=oracle_state,
        snapshots=snapshots,
        captured=captured,
    )


def _check_stream(scenario: Scenario, stream: Stream) -> None:
    if stream.num_agents != scenario.num_agents:
        raise RunError(
            f"stream has {stream.num_agents} agents, topology has {scenario.num_agents}"
        )
    member_dim = scenario.ensemble.members[0].spatial_dim
    if stream.spatial_dim != member_dim:
        raise RunError(
            f"stream spatial dim {stream.spatial_dim} does not match "
            f"ensemble spatial dim {member_dim}"
        )
    if scenario.eval.mode == "stitched" and stream.eval_owner is None:
        raise RunError("stitched evaluation requires a stream with block ownership")


def _pack(increments, evidences, with_evidence: bool) -> np.ndarray:
    parts = []
    for m, inc in enumerate(increments):
        parts.append(inc.P.ravel())
        parts.append(inc.s)
        if with_evidence:
            parts.append(np.asarray([evidences[m]]))
    return np.concatenate(parts)


def _unpack(flat: np.ndarray, M: int, dim: int, local_ev: np.ndarray, with_evidence: bool):
    incs = []
    evs = np.array(local_ev, dtype=float)
    stride = dim * dim + dim + (1 if with_evidence else 0)
    for m in range(M):
        base = m * stride
        P = flat[base : base + dim * dim].reshape(dim, dim)
        s = flat[base + dim * dim : base + dim * dim + dim]
        incs.append(Increment(P=P, s=s))
        if with_evidence:
            evs[m] = flat[base + dim * dim + dim]
    return incs, evs


def _sum_over_agents(arrays: list[np.ndarray]) -> np.ndarray:
    total = arrays[0].copy()
    for a in arrays[1:]:
        total += a
    return total


def _evaluate_epoch(scenario, stream, t, agent_states, oracle_state, fmaps):
    X_eval = stream.eval_inputs[t]
    y_true = stream.eval_truth[t]
    spatiotemporal = scenario.dynamics.mode == "spatiotemporal"
    want = scenario.eval.metrics
    oracle_moments = None
    if "w2" in want:
        try:
            oracle_moments = [posterior_moments(m) for m in oracle_state.models]
        except Exception as exc:
            raise RunError(f"epoch {t}, centralized oracle: {exc}") from exc

    out = []
    for k in range(len(agent_states)):
        try:
            if scenario.eval.mode == "stitched":
                sel = stream.eval_owner == k
                X_k, y_k = X_eval[sel], y_true[sel]
            else:
                X_k, y_k = X_eval, y_true
            X_in = augment_time_matrix(X_k, t) if spatiotemporal else X_k
            rmse_val = npll_val = w2_val = None
            if ("rmse" in want or "npll" in want) and X_k.shape[0] > 0:
                mean, _, mm, mv, w = mixture_predict_batch(agent_states[k], fmaps, X_in)
                if "rmse" in want:
                    rmse_val = rmse(mean, y_k)
                if "npll" in want:
                    npll_val = npll(mm, mv, y_k, weights=w)
            if "w2" in want:
                w2_val = _w2_to_oracle(agent_states[k], oracle_moments)
            out.append(
                MetricsRecord(
                    t=t, agent_id=k, rmse=rmse_val, npll=npll_val,
                    w2_to_centralized=w2_val,
                )
            )
        except Exception as exc:
            raise RunError(f"epoch {t}, agent {k}, evaluation: {exc}") from exc
    return out


def _w2_to_oracle(state: EnsembleState, oracle_moments) -> float:
    """Evidence-weighted member-wise distance to the centralized posterior."""
    w = ensemble_weights(state)
    total = 0.0
    for m, model in enumerate(state.models):
        mu, Sigma = posterior_moments(model)
        mu_o, Sigma_o = oracle_moments[m]
        total += w[m] * wasserstein2_gaussians(mu, Sigma, mu_o, Sigma_o)
    return float(total)


def save_snapshot(path, states: list[InfoState]) -> None:
    """Write one agent's per-member states as a single binary snapshot."""
    with open(path, "wb") as fp:
        fp.write(SNAPSHOT_MAGIC)
        fp.write(struct.pack("<I", len(states)))
        for state in states:
            save_state(state, fp)


def load_snapshot(path) -> list[InfoState]:
    with open(path, "rb") as fp:
        magic = fp.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        (count,) = struct.unpack("<I", fp.read(4))
        return [load_state(fp) for _ in range(count)]
