"""Scenario schema: defaults, validation, member grammar, resolved echo."""
import pytest
import yaml

from gossipgp.harness.config import (
    ConfigError,
    GridFileSource,
    SyntheticSource,
    load_scenario,
    resolved_yaml,
    scenario_from_dict,
)
from gossipgp.harness.streams import OutlierSpec


def minimal(**overrides):
    cfg = {
        "ensemble": {"members": [{"lengthscales": 0.3}]},
        "stream": {"kind": "synthetic", "synthetic": {"epochs": 3, "batch_size": 5}},
    }
    cfg.update(overrides)
    return cfg


class TestDefaults:
    def test_defaults_fill_in(self):
        sc = scenario_from_dict(minimal())
        assert sc.seed == 0
        assert sc.topology.num_agents == 4
        # default topology is the complete graph on four agents
        assert sc.topology.adjacency.sum() == 12
        assert sc.consensus.rounds == 1
        assert sc.consensus_mode == "sum"
        assert sc.evidence_mode == "consensus"
        assert sc.dynamics.mode == "static" and sc.dynamics.nu == 1.0
        assert sc.robust.kind == "none"
        assert sc.robust.delta == 1.345
        assert (sc.robust.a, sc.robust.b, sc.robust.c) == (2.0, 4.0, 8.0)
        assert sc.eval.mode == "global"
        assert sc.eval.metrics == ("rmse", "npll")
        assert sc.eval.epochs is None
        assert sc.eval.w2_oracle == "identical"
        assert sc.eval.snapshot_epochs == ()
        assert sc.outliers is None

    def test_member_defaults(self):
        sc = scenario_from_dict(minimal())
        (m,) = sc.ensemble.members
        assert m.prior_variance == 1.0
        assert m.obs_variance == 0.05
        assert m.temporal_lengthscale is None

    def test_scalar_lengthscale_broadcasts(self):
        cfg = minimal()
        cfg["stream"]["synthetic"]["spatial_dim"] = 3
        sc = scenario_from_dict(cfg)
        assert sc.ensemble.members[0].spatial_lengthscales == (0.3, 0.3, 0.3)

    def test_grid_file_assumes_two_spatial_dims(self):
        cfg = minimal(stream={"kind": "grid_file", "path": "w.csv"})
        sc = scenario_from_dict(cfg)
        assert isinstance(sc.stream_source, GridFileSource)
        assert sc.stream_source.path == "w.csv"
        assert sc.ensemble.members[0].spatial_lengthscales == (0.3, 0.3)

    def test_synthetic_params_built(self):
        sc = scenario_from_dict(minimal())
        assert isinstance(sc.stream_source, SyntheticSource)
        p = sc.stream_source.params
        assert p.epochs == 3 and p.batch_size == 5
        assert p.num_agents == 4  # inherited from topology
        assert p.kind == "static_gp"


class TestValidation:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="top-level"):
            scenario_from_dict(minimal(experiment="x"))

    @pytest.mark.parametrize("section,key", [
        ("topology", "degree"),
        ("consensus", "weights"),
        ("dynamics", "rate"),
        ("robust", "threshold"),
        ("eval", "plot"),
    ])
    def test_unknown_section_keys(self, section, key):
        cfg = minimal(**{section: {key: 1}})
        with pytest.raises(ConfigError, match=key):
            scenario_from_dict(cfg)

    def test_unknown_ensemble_key(self):
        cfg = minimal()
        cfg["ensemble"]["weighting"] = "softmax"
        with pytest.raises(ConfigError, match="weighting"):
            scenario_from_dict(cfg)

    def test_unknown_member_key(self):
        cfg = minimal()
        cfg["ensemble"]["members"] = [{"lengthscales": 0.3, "bandwidth": 1}]
        with pytest.raises(ConfigError, match="bandwidth"):
            scenario_from_dict(cfg)

    def test_unknown_synthetic_key(self):
        cfg = minimal()
        cfg["stream"]["synthetic"]["noise"] = 0.1
        with pytest.raises(ConfigError, match="noise"):
            scenario_from_dict(cfg)

    def test_missing_ensemble_section(self):
        cfg = minimal()
        del cfg["ensemble"]
        with pytest.raises(ConfigError, match="ensemble"):
            scenario_from_dict(cfg)

    def test_members_and_grid_both_given(self):
        cfg = minimal()
        cfg["ensemble"]["grid"] = {"lengthscales": [0.1], "prior_variances": [1.0]}
        with pytest.raises(ConfigError, match="exactly one"):
            scenario_from_dict(cfg)

    def test_neither_members_nor_grid(self):
        cfg = minimal(ensemble={"shared_J": 50})
        with pytest.raises(ConfigError, match="exactly one"):
            scenario_from_dict(cfg)

    def test_wrong_length_lengthscale_list(self):
        cfg = minimal()
        cfg["ensemble"]["members"] = [{"lengthscales": [0.1, 0.2, 0.3]}]
        with pytest.raises(ConfigError, match="lengthscales"):
            scenario_from_dict(cfg)

    def test_missing_stream(self):
        cfg = minimal()
        del cfg["stream"]
        with pytest.raises(ConfigError, match="stream"):
            scenario_from_dict(cfg)

    def test_bad_stream_kind(self):
        with pytest.raises(ConfigError, match="grid_file or synthetic"):
            scenario_from_dict(minimal(stream={"kind": "live"}))

    def test_grid_file_needs_path(self):
        with pytest.raises(ConfigError, match="path"):
            scenario_from_dict(minimal(stream={"kind": "grid_file"}))

    def test_bad_consensus_mode(self):
        with pytest.raises(ConfigError, match="sum or local"):
            scenario_from_dict(minimal(consensus={"mode": "average"}))

    def test_bad_evidence_mode(self):
        cfg = minimal()
        cfg["ensemble"]["evidence"] = "broadcast"
        with pytest.raises(ConfigError, match="consensus or local"):
            scenario_from_dict(cfg)

    def test_breakpoints_need_three_values(self):
        with pytest.raises(ConfigError, match="breakpoints"):
            scenario_from_dict(minimal(robust={"breakpoints": [2.0, 4.0]}))

    def test_unordered_breakpoints_rejected(self):
        # RobustConfig enforces a < b < c; the wrapper surfaces it as ConfigError.
        with pytest.raises(ConfigError):
            scenario_from_dict(minimal(robust={"kind": "hampel",
                                               "breakpoints": [4.0, 2.0, 8.0]}))

    def test_bad_eval_mode(self):
        with pytest.raises(ConfigError, match="global or stitched"):
            scenario_from_dict(minimal(eval={"mode": "patchwork"}))

    def test_unknown_metric(self):
        with pytest.raises(ConfigError, match="mae"):
            scenario_from_dict(minimal(eval={"metrics": ["rmse", "mae"]}))

    def test_bad_w2_oracle(self):
        with pytest.raises(ConfigError, match="identical or unit"):
            scenario_from_dict(minimal(eval={"w2_oracle": "median"}))

    def test_bad_eval_epochs(self):
        with pytest.raises(ConfigError, match="eval.epochs"):
            scenario_from_dict(minimal(eval={"epochs": "final"}))

    def test_bad_synthetic_kind_wrapped(self):
        cfg = minimal()
        cfg["stream"]["synthetic"]["kind"] = "brownian"
        with pytest.raises(ConfigError):
            scenario_from_dict(cfg)

    def test_bad_topology_kind_wrapped(self):
        with pytest.raises(ConfigError):
            scenario_from_dict(minimal(topology={"kind": "torus"}))


class TestTemporalCoupling:
    def test_spatiotemporal_requires_temporal_lengthscale(self):
        cfg = minimal(dynamics={"mode": "spatiotemporal"})
        with pytest.raises(ConfigError, match="temporal_lengthscale"):
            scenario_from_dict(cfg)

    def test_temporal_lengthscale_requires_spatiotemporal(self):
        cfg = minimal()
        cfg["ensemble"]["temporal_lengthscale"] = 4.0
        with pytest.raises(ConfigError, match="spatiotemporal"):
            scenario_from_dict(cfg)

    def test_coupled_config_sets_member_temporal(self):
        cfg = minimal(dynamics={"mode": "spatiotemporal"})
        cfg["ensemble"]["temporal_lengthscale"] = 4.0
        sc = scenario_from_dict(cfg)
        assert all(m.temporal_lengthscale == 4.0 for m in sc.ensemble.members)


class TestGridGrammar:
    def test_grid_expands_cartesian_product(self):
        cfg = minimal(ensemble={"grid": {
            "lengthscales": [0.1, 0.5],
            "prior_variances": [1.0, 25.0],
            "obs_variance": 0.02,
        }})
        sc = scenario_from_dict(cfg)
        ms = sc.ensemble.members
        assert len(ms) == 4
        # lengthscale-major, prior-variance-minor ordering
        assert [m.spatial_lengthscales[0] for m in ms] == [0.1, 0.1, 0.5, 0.5]
        assert [m.prior_variance for m in ms] == [1.0, 25.0, 1.0, 25.0]
        assert all(m.obs_variance == 0.02 for m in ms)

    def test_grid_missing_prior_variances(self):
        cfg = minimal(ensemble={"grid": {"lengthscales": [0.1]}})
        with pytest.raises(ConfigError, match="prior_variances"):
            scenario_from_dict(cfg)

    def test_unknown_grid_key(self):
        cfg = minimal(ensemble={"grid": {
            "lengthscales": [0.1], "prior_variances": [1.0], "jitter": 0,
        }})
        with pytest.raises(ConfigError, match="jitter"):
            scenario_from_dict(cfg)


class TestStitched:
    def test_stitched_requires_grid_file(self):
        with pytest.raises(ConfigError, match="stitched"):
            scenario_from_dict(minimal(eval={"mode": "stitched"}))

    def test_stitched_with_grid_file_ok(self):
        cfg = minimal(stream={"kind": "grid_file", "path": "w.csv"},
                      eval={"mode": "stitched"})
        sc = scenario_from_dict(cfg)
        assert sc.eval.mode == "stitched"


class TestOutliers:
    def test_outlier_spec_built(self):
        cfg = minimal(outliers={
            "epoch": 7, "fraction": 0.3, "magnitude_sd": 6.0,
            "agents": [1, 2], "region": [[0.0, 0.0], [0.5, 0.5]],
            "jitter": 0.1, "seed": 3,
        })
        sc = scenario_from_dict(cfg)
        o = sc.outliers
        assert isinstance(o, OutlierSpec)
        assert o.epoch == 7 and o.fraction == 0.3 and o.magnitude_sd == 6.0
        assert o.agents == (1, 2)
        assert o.region == ((0.0, 0.0), (0.5, 0.5))
        assert o.jitter == 0.1 and o.seed == 3

    def test_outlier_defaults(self):
        sc = scenario_from_dict(minimal(outliers={"epoch": 2, "fraction": 0.1}))
        o = sc.outliers
        assert o.magnitude_sd == 8.0 and o.jitter == 0.25 and o.seed == 0
        assert o.region is None and o.agents is None

    def test_outliers_require_epoch_and_fraction(self):
        with pytest.raises(ConfigError, match="epoch and fraction"):
            scenario_from_dict(minimal(outliers={"fraction": 0.1}))

    def test_unknown_outlier_key(self):
        with pytest.raises(ConfigError, match="scale"):
            scenario_from_dict(minimal(outliers={"epoch": 1, "fraction": 0.1,
                                                 "scale": 2}))

    def test_bad_fraction_wrapped(self):
        with pytest.raises(ConfigError):
            scenario_from_dict(minimal(outliers={"epoch": 1, "fraction": 1.5}))


class TestResolved:
    def test_resolved_echo_is_complete(self):
        sc = scenario_from_dict(minimal())
        r = sc.resolved
        assert set(r) == {"seed", "topology", "consensus", "ensemble", "dynamics",
                          "robust", "stream", "outliers", "eval"}
        assert r["topology"]["num_agents"] == 4
        assert r["stream"]["synthetic"]["epochs"] == 3
        # synthetic defaults are echoed even when omitted from the input
        assert r["stream"]["synthetic"]["true_J"] == 64
        assert r["outliers"] is None

    def test_resolved_expands_grid_members(self):
        cfg = minimal(ensemble={"grid": {
            "lengthscales": [0.1, 0.5], "prior_variances": [1.0],
        }})
        sc = scenario_from_dict(cfg)
        members = sc.resolved["ensemble"]["members"]
        assert len(members) == 2
        assert members[0]["lengthscales"] == [0.1, 0.1]

    def test_resolved_yaml_round_trips(self):
        sc = scenario_from_dict(minimal(seed=9))
        text = resolved_yaml(sc)
        back = yaml.safe_load(text)
        assert back == sc.resolved
        assert back["seed"] == 9

    def test_resolved_scenario_reloads_identically(self):
        # Feeding the resolved dict back through the parser is a fixed point.
        sc = scenario_from_dict(minimal(seed=4, robust={"kind": "huber"}))
        cfg2 = dict(sc.resolved)
        cfg2["eval"] = {k: v for k, v in cfg2["eval"].items() if k != "epochs"}
        sc2 = scenario_from_dict(cfg2)
        assert sc2.resolved == sc.resolved


class TestLoadScenario:
    def test_load_from_yaml_file(self, tmp_path):
        p = tmp_path / "scenario.yaml"
        p.write_text(yaml.safe_dump(minimal(seed=11)))
        sc = load_scenario(p)
        assert sc.seed == 11
        assert sc.resolved == scenario_from_dict(minimal(seed=11)).resolved

    def test_non_mapping_file_rejected(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("- just\n- a list\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_scenario(p)
