"""Information-filter tests against brute-force Bayesian linear regression."""
import io

import numpy as np
import pytest

from gossipgp import (
    Increment,
    InfoState,
    KernelSpec,
    NumericalDegeneracyError,
    apply_increment,
    compute_increment,
    feature_map,
    feature_matrix,
    load_state,
    posterior_moments,
    predict,
    predict_batch,
    prior_state,
    sample_frequencies,
)


def brute_force_posterior(Phi, y, obs_variance, prior_variance):
    """Direct dense evaluation of the Gaussian posterior over weights."""
    dim = Phi.shape[0]
    D = Phi @ Phi.T / obs_variance + np.eye(dim) / prior_variance
    Sigma = np.linalg.inv(D)
    mu = Sigma @ (Phi @ y) / obs_variance
    return mu, Sigma, D


def make_model(J=4, d=2, seed=0, prior_variance=1.0, obs_variance=0.1):
    spec = KernelSpec(
        spatial_lengthscales=(0.5,) * d,
        prior_variance=prior_variance,
        obs_variance=obs_variance,
    )
    fm = sample_frequencies(spec, J=J, d=d, seed=seed)
    return spec, fm


class TestPriorState:
    def test_unit_prior_is_identity(self):
        spec = KernelSpec(spatial_lengthscales=(1.0,), prior_variance=1.0)
        state = prior_state(spec, J=1)
        assert np.array_equal(state.D, np.eye(2))
        assert np.array_equal(state.eta, np.zeros(2))

    def test_prior_variance_25(self):
        spec = KernelSpec(spatial_lengthscales=(1.0,), prior_variance=25.0)
        state = prior_state(spec, J=2)
        assert np.array_equal(state.D, 0.04 * np.eye(4))

    def test_prior_moments(self):
        spec = KernelSpec(spatial_lengthscales=(1.0,), prior_variance=7.5)
        mu, Sigma = posterior_moments(prior_state(spec, J=3))
        assert np.allclose(mu, 0.0, atol=1e-12)
        assert np.allclose(Sigma, 7.5 * np.eye(6), atol=1e-10)

    def test_rejects_bad_j(self):
        spec = KernelSpec(spatial_lengthscales=(1.0,))
        with pytest.raises(ValueError):
            prior_state(spec, J=0)


class TestComputeIncrement:
    def test_empty_batch_is_zero(self):
        inc = compute_increment(np.zeros((4, 0)), np.zeros(0), obs_variance=0.5)
        assert np.array_equal(inc.P, np.zeros((4, 4)))
        assert np.array_equal(inc.s, np.zeros(4))

    def test_single_observation_hand_case(self):
        # phi = (0, 1) at the origin with J=1; y=2, noise variance 0.5:
        # P = 2 * phi phi^T has a single nonzero entry, s = (0, 4).
        spec, fm = make_model(J=1, d=1)
        phi = feature_map(fm, np.zeros(1))
        assert np.array_equal(phi, np.array([0.0, 1.0]))
        inc = compute_increment(phi[:, np.newaxis], np.array([2.0]), obs_variance=0.5)
        assert np.array_equal(inc.P, np.array([[0.0, 0.0], [0.0, 2.0]]))
        assert np.array_equal(inc.s, np.array([0.0, 4.0]))

    def test_batch_equals_sum_of_singles(self):
        spec, fm = make_model(J=3, d=2)
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(3, 2))
        y = rng.standard_normal(3)
        Phi = feature_matrix(fm, X)
        whole = compute_increment(Phi, y, obs_variance=0.2)
        parts_P = sum(
            compute_increment(Phi[:, i : i + 1], y[i : i + 1], 0.2).P for i in range(3)
        )
        parts_s = sum(
            compute_increment(Phi[:, i : i + 1], y[i : i + 1], 0.2).s for i in range(3)
        )
        assert np.allclose(whole.P, parts_P, atol=1e-14)
        assert np.allclose(whole.s, parts_s, atol=1e-14)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            compute_increment(np.zeros((4, 2)), np.zeros(3), 0.1)
        with pytest.raises(ValueError):
            compute_increment(np.zeros((4, 2)), np.zeros(2), 0.0)

    def test_increment_is_symmetric(self):
        spec, fm = make_model(J=5, d=2)
        X = np.random.default_rng(2).uniform(size=(10, 2))
        Phi = feature_matrix(fm, X)
        inc = compute_increment(Phi, np.ones(10), 0.3)
        assert np.array_equal(inc.P, inc.P.T)


class TestApplyIncrement:
    def test_zero_increment_no_op(self):
        spec, fm = make_model(J=2)
        state = prior_state(spec, J=2)
        inc = Increment(P=np.zeros((4, 4)), s=np.zeros(4))
        out = apply_increment(state, inc)
        assert np.array_equal(out.D, state.D)
        assert np.array_equal(out.eta, state.eta)

    def test_is_pure(self):
        spec, fm = make_model(J=2)
        state = prior_state(spec, J=2)
        D0 = state.D.copy()
        inc = Increment(P=np.eye(4), s=np.ones(4))
        apply_increment(state, inc)
        assert np.array_equal(state.D, D0)

    def test_sequential_matches_batch_oracle(self):
        # Streaming through T batches reproduces the one-shot posterior on the
        # pooled data to 1e-10 relative Frobenius error.
        spec, fm = make_model(J=6, d=2, obs_variance=0.3)
        rng = np.random.default_rng(3)
        state = prior_state(spec, J=6)
        all_Phi, all_y = [], []
        for _ in range(8):
            X = rng.uniform(size=(5, 2))
            y = rng.standard_normal(5)
            Phi = feature_matrix(fm, X)
            state = apply_increment(state, compute_increment(Phi, y, 0.3))
            all_Phi.append(Phi)
            all_y.append(y)
        Phi = np.hstack(all_Phi)
        y = np.concatenate(all_y)
        _, _, D_direct = brute_force_posterior(Phi, y, 0.3, spec.prior_variance)
        eta_direct = Phi @ y / 0.3
        assert np.linalg.norm(state.D - D_direct) <= 1e-10 * np.linalg.norm(D_direct)
        assert np.linalg.norm(state.eta - eta_direct) <= 1e-10 * np.linalg.norm(eta_direct)

    def test_commutativity(self):
        spec, fm = make_model(J=4, d=2)
        rng = np.random.default_rng(4)
        state = prior_state(spec, J=4)
        incs = []
        for _ in range(2):
            X = rng.uniform(size=(3, 2))
            incs.append(compute_increment(feature_matrix(fm, X), rng.standard_normal(3), 0.1))
        ab = apply_increment(apply_increment(state, incs[0]), incs[1])
        ba = apply_increment(apply_increment(state, incs[1]), incs[0])
        assert np.allclose(ab.D, ba.D, atol=1e-14)
        assert np.allclose(ab.eta, ba.eta, atol=1e-14)

    def test_dim_mismatch_rejected(self):
        spec, fm = make_model(J=2)
        state = prior_state(spec, J=2)
        with pytest.raises(ValueError):
            apply_increment(state, Increment(P=np.zeros((2, 2)), s=np.zeros(2)))


class TestPosteriorMoments:
    def test_single_observation_matches_textbook_formula(self):
        spec, fm = make_model(J=1, d=1, prior_variance=2.0, obs_variance=0.5)
        x = np.array([0.7])
        y = np.array([1.3])
        phi = feature_map(fm, x)[:, np.newaxis]
        state = apply_increment(prior_state(spec, J=1), compute_increment(phi, y, 0.5))
        mu, Sigma = posterior_moments(state)
        mu_direct, Sigma_direct, _ = brute_force_posterior(phi, y, 0.5, 2.0)
        assert np.allclose(mu, mu_direct, atol=1e-12)
        assert np.allclose(Sigma, Sigma_direct, atol=1e-12)

    def test_mean_solves_information_equation(self):
        spec, fm = make_model(J=5, d=2, obs_variance=0.2)
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(20, 2))
        y = rng.standard_normal(20)
        state = apply_increment(
            prior_state(spec, J=5), compute_increment(feature_matrix(fm, X), y, 0.2)
        )
        mu, _ = posterior_moments(state)
        residual = np.linalg.norm(state.D @ mu - state.eta)
        assert residual <= 1e-10 * np.linalg.norm(state.eta)

    def test_degenerate_matrix_raises_with_eigenvalue(self):
        state = prior_state(KernelSpec(spatial_lengthscales=(1.0,)), J=1)
        state.D = np.array([[1.0, 0.0], [0.0, -1.0]])
        with pytest.raises(NumericalDegeneracyError, match="eigenvalue"):
            posterior_moments(state)


class TestPredict:
    def test_prior_prediction(self):
        spec, fm = make_model(J=8, d=2, prior_variance=3.0, obs_variance=0.25)
        state = prior_state(spec, J=8)
        pred = predict(state, fm, np.array([0.4, -0.2]))
        assert abs(pred.mean) <= 1e-12
        # ||phi||^2 = 1, so the prior predictive variance is
        # prior_variance + obs_variance exactly.
        assert abs(pred.variance - 3.25) <= 1e-10

    def test_variance_floor_is_observation_noise(self):
        spec, fm = make_model(J=4, d=1, obs_variance=0.1)
        x_star = np.array([0.5])
        Phi = np.repeat(feature_map(fm, x_star)[:, np.newaxis], 400, axis=1)
        y = np.full(400, 2.0)
        state = apply_increment(prior_state(spec, J=4), compute_increment(Phi, y, 0.1))
        pred = predict(state, fm, x_star)
        assert 0.1 < pred.variance < 0.101

    def test_hand_case_against_direct_formula(self):
        spec, fm = make_model(J=1, d=1, prior_variance=1.5, obs_variance=0.4)
        X = np.array([[0.2], [0.9], [-0.3]])
        y = np.array([0.5, -1.0, 0.25])
        Phi = feature_matrix(fm, X)
        state = apply_increment(prior_state(spec, J=1), compute_increment(Phi, y, 0.4))
        mu_direct, Sigma_direct, _ = brute_force_posterior(Phi, y, 0.4, 1.5)
        x_star = np.array([0.6])
        phi = feature_map(fm, x_star)
        pred = predict(state, fm, x_star)
        assert abs(pred.mean - phi @ mu_direct) <= 1e-12
        assert abs(pred.variance - (phi @ Sigma_direct @ phi + 0.4)) <= 1e-12

    def test_batch_matches_pointwise(self):
        spec, fm = make_model(J=3, d=2)
        rng = np.random.default_rng(6)
        X = rng.uniform(size=(12, 2))
        y = rng.standard_normal(12)
        state = apply_increment(
            prior_state(spec, J=3), compute_increment(feature_matrix(fm, X), y, 0.1)
        )
        X_star = rng.uniform(size=(5, 2))
        means, variances = predict_batch(state, fm, X_star)
        for i in range(5):
            p = predict(state, fm, X_star[i])
            assert abs(means[i] - p.mean) <= 1e-12
            assert abs(variances[i] - p.variance) <= 1e-12

    def test_empty_batch(self):
        spec, fm = make_model(J=3, d=2)
        state = prior_state(spec, J=3)
        means, variances = predict_batch(state, fm, np.zeros((0, 2)))
        assert means.shape == (0,) and variances.shape == (0,)


class TestSerialization:
    def test_round_trip_bitwise(self):
        spec, fm = make_model(J=4, d=2, prior_variance=2.0, obs_variance=0.3)
        rng = np.random.default_rng(7)
        X = rng.uniform(size=(9, 2))
        y = rng.standard_normal(9)
        state = apply_increment(
            prior_state(spec, J=4), compute_increment(feature_matrix(fm, X), y, 0.3)
        )
        buf = io.BytesIO()
        from gossipgp import save_state

        save_state(state, buf)
        buf.seek(0)
        loaded = load_state(buf)
        assert np.array_equal(loaded.D, state.D)
        assert np.array_equal(loaded.eta, state.eta)
        assert loaded.obs_variance == state.obs_variance
        assert loaded.prior_variance == state.prior_variance

    def test_bad_magic_rejected(self):
        with pytest.raises(ValueError, match="magic"):
            load_state(io.BytesIO(b"NOTMAGIC" + b"\x00" * 64))


class TestValidation:
    def test_info_state_shape_checks(self):
        with pytest.raises(ValueError):
            InfoState(D=np.zeros((2, 3)), eta=np.zeros(2), obs_variance=1.0, prior_variance=1.0)
        with pytest.raises(ValueError):
            InfoState(D=np.eye(2), eta=np.zeros(3), obs_variance=1.0, prior_variance=1.0)
        with pytest.raises(ValueError):
            InfoState(D=np.eye(2), eta=np.zeros(2), obs_variance=0.0, prior_variance=1.0)

    def test_increment_shape_checks(self):
        with pytest.raises(ValueError):
            Increment(P=np.zeros((2, 3)), s=np.zeros(2))
        with pytest.raises(ValueError):
            Increment(P=np.eye(2), s=np.zeros(3))
