"""Synthetic data generator: determinism, truth bookkeeping, moment checks."""

import numpy as np
import pytest

from gpbtl.kernels import KernelSpec, gram
from gpbtl.synthesis import SynthesisConfig, sample_icm


def make_config(**overrides):
    defaults = dict(
        source_noise=1.0,
        target_noise=1.0,
        source_weight=0.8,
        target_weight=1.0,
        latent_kernel=KernelSpec("SquaredExponential", signal_variance=2.0, length_scale_sq=0.4),
        n_train=8,
        input_range=(-3.5, 3.5),
        n_test=5,
        test_range=(-5.0, 5.0),
        seed=123,
    )
    defaults.update(overrides)
    return SynthesisConfig(**defaults)


class TestValidation:
    def test_bad_ranges(self):
        with pytest.raises(ValueError):
            make_config(input_range=(2.0, -2.0))
        with pytest.raises(ValueError):
            make_config(n_train=0)
        with pytest.raises(ValueError):
            make_config(source_noise=-1.0)


class TestSampleIcm:
    def test_noiseless_outputs_equal_truth(self):
        s = sample_icm(make_config(source_noise=0.0, target_noise=0.0))
        np.testing.assert_array_equal(s.source.outputs, s.source_truth_train)
        np.testing.assert_array_equal(s.target.outputs, s.target_truth_train)

    def test_equal_weights_share_truth(self):
        s = sample_icm(make_config(source_weight=0.9, target_weight=0.9))
        np.testing.assert_array_equal(s.source_truth_train, s.target_truth_train)
        np.testing.assert_array_equal(s.source_truth_test, s.target_truth_test)

    def test_truth_scales_with_latent(self):
        s = sample_icm(make_config())
        np.testing.assert_allclose(s.source_truth_test, 0.8 * s.latent_test, rtol=1e-15)
        np.testing.assert_allclose(s.target_truth_test, 1.0 * s.latent_test, rtol=1e-15)

    def test_shapes_and_grid(self):
        s = sample_icm(make_config())
        assert s.source.n == s.target.n == 8
        assert s.test_inputs.shape == (5, 1)
        np.testing.assert_allclose(s.test_inputs[:, 0], np.linspace(-5, 5, 5))
        assert np.all(s.train_inputs >= -3.5) and np.all(s.train_inputs <= 3.5)
        np.testing.assert_array_equal(s.source.inputs, s.target.inputs)

    def test_fixed_seed_bit_identical(self):
        a = sample_icm(make_config(seed=7))
        b = sample_icm(make_config(seed=7))
        np.testing.assert_array_equal(a.source.outputs, b.source.outputs)
        np.testing.assert_array_equal(a.target.outputs, b.target.outputs)
        np.testing.assert_array_equal(a.latent_test, b.latent_test)

    def test_noise_sweep_preserves_other_task(self):
        # Rescaling the source noise reuses the same underlying draws, so the
        # target data and the latent are unchanged.
        low = sample_icm(make_config(source_noise=0.01, seed=11))
        high = sample_icm(make_config(source_noise=100.0, seed=11))
        np.testing.assert_array_equal(low.target.outputs, high.target.outputs)
        np.testing.assert_array_equal(low.latent_train, high.latent_train)
        assert not np.array_equal(low.source.outputs, high.source.outputs)


class TestMoments:
    def test_cross_covariance_matches_kernel(self):
        # Cov(f_source(x), f_target(x')) at fixed test sites over many draws
        # must match w_s * w_t * k(x, x') within three standard errors.
        cfg = make_config(n_train=2, n_test=4, source_weight=0.8, target_weight=1.0)
        n_draws = 10_000
        f_s = np.zeros((n_draws, 4))
        f_t = np.zeros((n_draws, 4))
        for i in range(n_draws):
            s = sample_icm(make_config(n_train=2, n_test=4, seed=1000 + i))
            f_s[i] = s.source_truth_test
            f_t[i] = s.target_truth_test
        k_test = gram(cfg.latent_kernel, np.linspace(-5, 5, 4).reshape(-1, 1),
                      np.linspace(-5, 5, 4).reshape(-1, 1))
        expected = 0.8 * 1.0 * k_test
        centered_s = f_s - f_s.mean(axis=0)
        centered_t = f_t - f_t.mean(axis=0)
        empirical = centered_s.T @ centered_t / (n_draws - 1)
        # standard error of a Gaussian product-moment estimate
        var_s = np.diag(0.8**2 * k_test)
        var_t = np.diag(1.0**2 * k_test)
        se = np.sqrt((np.outer(var_s, var_t) + expected**2) / n_draws)
        assert np.all(np.abs(empirical - expected) < 3.5 * se)

    def test_noise_variance_recovered(self):
        # Pooled variance of y - f approaches the configured source noise.
        devs = []
        for i in range(2000):
            s = sample_icm(make_config(n_train=8, n_test=1, source_noise=0.6, seed=5000 + i))
            devs.append(s.source.outputs - s.source_truth_train)
        pooled = float(np.var(np.concatenate(devs)))
        assert pooled == pytest.approx(0.6, rel=0.05)
