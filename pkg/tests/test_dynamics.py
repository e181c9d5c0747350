"""Forgetting operators and time augmentation."""
import numpy as np
import pytest

from gossipgp import (
    DynamicsConfig,
    KernelSpec,
    apply_forgetting,
    apply_increment,
    augment_time,
    augment_time_matrix,
    compute_increment,
    feature_matrix,
    posterior_moments,
    prior_state,
    sample_frequencies,
)


def fitted_state(seed=0, prior_variance=1.0, obs_variance=0.2):
    spec = KernelSpec(
        spatial_lengthscales=(0.5,), prior_variance=prior_variance, obs_variance=obs_variance
    )
    fm = sample_frequencies(spec, J=3, d=1, seed=seed)
    rng = np.random.default_rng(seed + 1)
    X = rng.uniform(size=(12, 1))
    y = rng.standard_normal(12)
    inc = compute_increment(feature_matrix(fm, X), y, obs_variance)
    return apply_increment(prior_state(spec, J=3), inc), spec


class TestDynamicsConfig:
    def test_valid_modes(self):
        for mode in ("static", "b2p", "ui", "spatiotemporal"):
            DynamicsConfig(mode=mode, nu=0.9)

    def test_invalid_mode(self):
        with pytest.raises(ValueError):
            DynamicsConfig(mode="exponential")

    def test_nu_range(self):
        DynamicsConfig(mode="b2p", nu=0.0)
        DynamicsConfig(mode="b2p", nu=1.0)
        with pytest.raises(ValueError):
            DynamicsConfig(mode="b2p", nu=1.1)
        with pytest.raises(ValueError):
            DynamicsConfig(mode="b2p", nu=-0.1)


class TestApplyForgetting:
    def test_static_returns_same_object(self):
        state, _ = fitted_state()
        assert apply_forgetting(state, DynamicsConfig(mode="static")) is state
        assert apply_forgetting(state, DynamicsConfig(mode="spatiotemporal")) is state

    def test_nu_one_is_identity_for_both_modes(self):
        state, _ = fitted_state()
        for mode in ("b2p", "ui"):
            out = apply_forgetting(state, DynamicsConfig(mode=mode, nu=1.0))
            assert np.array_equal(out.D, state.D)
            assert np.array_equal(out.eta, state.eta)

    def test_b2p_nu_zero_resets_to_prior(self):
        state, spec = fitted_state(prior_variance=2.5)
        out = apply_forgetting(state, DynamicsConfig(mode="b2p", nu=0.0))
        fresh = prior_state(spec, J=3)
        assert np.array_equal(out.D, fresh.D)
        assert np.array_equal(out.eta, fresh.eta)

    def test_b2p_formula(self):
        state, spec = fitted_state(prior_variance=2.0)
        nu = 0.7
        out = apply_forgetting(state, DynamicsConfig(mode="b2p", nu=nu))
        expected_D = nu * state.D + (1.0 - nu) / 2.0 * np.eye(state.dim)
        assert np.allclose(out.D, expected_D, atol=1e-15)
        assert np.allclose(out.eta, nu * state.eta, atol=1e-15)

    def test_ui_preserves_mean_and_inflates_covariance(self):
        state, _ = fitted_state()
        nu = 0.6
        out = apply_forgetting(state, DynamicsConfig(mode="ui", nu=nu))
        mu0, Sigma0 = posterior_moments(state)
        mu1, Sigma1 = posterior_moments(out)
        assert np.linalg.norm(mu1 - mu0) <= 1e-10 * max(np.linalg.norm(mu0), 1.0)
        assert np.allclose(Sigma1, Sigma0 / nu, atol=1e-10)

    def test_ui_rejects_degenerate_nu(self):
        state, _ = fitted_state()
        with pytest.raises(ValueError):
            apply_forgetting(state, DynamicsConfig(mode="ui", nu=0.0))

    def test_forgetting_is_pure(self):
        state, _ = fitted_state()
        D0 = state.D.copy()
        apply_forgetting(state, DynamicsConfig(mode="b2p", nu=0.5))
        assert np.array_equal(state.D, D0)


class TestTimeAugmentation:
    def test_basic(self):
        out = augment_time(np.array([0.2, 0.7]), 46)
        assert np.array_equal(out, np.array([0.2, 0.7, 46.0]))

    def test_zero_dimensional_edge(self):
        out = augment_time(np.zeros(0), 5)
        assert np.array_equal(out, np.array([5.0]))

    def test_matrix_form(self):
        X = np.array([[0.1, 0.2], [0.3, 0.4]])
        out = augment_time_matrix(X, 7)
        assert out.shape == (2, 3)
        assert np.array_equal(out[:, 2], np.array([7.0, 7.0]))
        assert np.array_equal(out[:, :2], X)

    def test_time_column_not_normalized(self):
        # Epoch indices pass through unchanged, whatever their magnitude.
        out = augment_time_matrix(np.zeros((1, 2)), 47)
        assert out[0, 2] == 47.0
