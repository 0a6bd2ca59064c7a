"""Parameter vectors, likelihood objectives, and the quasi-Newton optimizer."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from gpbtl.hyperlearn import (
    ParamVector,
    finite_difference_gradient,
    joint_init,
    kernel_from_params,
    nll_joint,
    nll_single,
    nll_transfer,
    optimize,
    single_task_init,
    transfer_init,
)
from gpbtl.kernels import CoregionalizationSpec, KernelSpec, coreg_gram
from gpbtl.regression import TaskData, log_marginal_likelihood, predict_outputs
from gpbtl.synthesis import SynthesisConfig, sample_icm


def make_data(rng, n=6, noise=0.4):
    return TaskData(rng.uniform(-2, 2, (n, 1)), rng.standard_normal(n), noise)


class TestParamVector:
    def test_round_trip_exact(self):
        items = {
            "signal_variance": 2.3,
            "length_scale_sq": 0.41,
            "alpha": 1.7,
            "noise_variance": 0.09,
            "source_weight": -0.8,
            "target_weight": 1.1,
        }
        pv = ParamVector.from_natural(items)
        back = pv.natural()
        for name, value in items.items():
            assert abs(back[name] - value) <= 1e-14 * max(1.0, abs(value))

    def test_signed_parameters_not_logged(self):
        pv = ParamVector.from_natural({"source_weight": -0.5})
        assert pv.values[0] == -0.5

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            ParamVector(("a", "a"), np.zeros(2))

    def test_kernel_assembly_with_ard(self):
        natural = {
            "signal_variance": 1.5,
            "length_scale_sq_0": 0.3,
            "length_scale_sq_1": 2.0,
            "alpha": 1.1,
        }
        k = kernel_from_params("RationalQuadratic", natural, ard_dims=2)
        np.testing.assert_allclose(np.asarray(k.length_scale_sq), [0.3, 2.0])
        assert k.alpha == 1.1


class TestSingleObjective:
    def test_finite_at_generic_point(self, rng):
        data = make_data(rng)
        value = nll_single(single_task_init("SquaredExponential"), data, "SquaredExponential")
        assert np.isfinite(value)

    def test_matches_negative_lml(self, rng):
        data = make_data(rng)
        pv = ParamVector.from_natural(
            {"signal_variance": 1.4, "length_scale_sq": 0.7, "noise_variance": 0.25}
        )
        k = KernelSpec("SquaredExponential", signal_variance=1.4, length_scale_sq=0.7)
        ref = -log_marginal_likelihood(TaskData(data.inputs, data.outputs, 0.25), k)
        assert nll_single(pv, data, "SquaredExponential") == pytest.approx(ref, rel=1e-12)

    def test_scalar_case(self):
        data = TaskData(np.array([[0.0]]), np.array([0.7]), 0.5)
        pv = ParamVector.from_natural({"signal_variance": 1.0, "length_scale_sq": 1.0, "noise_variance": 0.5})
        total = 1.5
        expected = 0.5 * (0.7**2 / total + np.log(total) + np.log(2 * np.pi))
        assert nll_single(pv, data, "SquaredExponential") == pytest.approx(expected, rel=1e-12)

    def test_finite_difference_consistency(self, rng):
        # Two central-difference step sizes must agree on a smooth objective.
        data = make_data(rng, n=8)
        pv = single_task_init("SquaredExponential")
        fun = lambda v: nll_single(pv.with_values(v), data, "SquaredExponential")
        g_small = finite_difference_gradient(fun, pv.values, step=1e-6)
        g_large = finite_difference_gradient(fun, pv.values, step=1e-5)
        np.testing.assert_allclose(g_small, g_large, rtol=1e-2, atol=1e-8)


class TestJointObjective:
    def test_decoupling_identity(self, rng):
        source = make_data(rng, n=5, noise=0.3)
        target = make_data(rng, n=4, noise=0.7)
        pv = ParamVector.from_natural(
            {
                "signal_variance": 1.2,
                "length_scale_sq": 0.5,
                "source_weight": 0.0,
                "target_weight": 0.9,
                "source_noise": 0.3,
                "target_noise": 0.7,
            }
        )
        joint = nll_joint(pv, source, target, "SquaredExponential")
        tiny = np.finfo(float).tiny
        pv_s = ParamVector.from_natural(
            {"signal_variance": tiny, "length_scale_sq": 0.5, "noise_variance": 0.3}
        )
        pv_t = ParamVector.from_natural(
            {"signal_variance": 1.2 * 0.9**2, "length_scale_sq": 0.5, "noise_variance": 0.7}
        )
        split = nll_single(pv_s, source, "SquaredExponential") + nll_single(
            pv_t, target, "SquaredExponential"
        )
        assert joint == pytest.approx(split, rel=1e-10)

    def test_sign_flip_symmetry(self, rng):
        source = make_data(rng, n=5)
        target = make_data(rng, n=4)
        base = {
            "signal_variance": 1.0,
            "length_scale_sq": 0.6,
            "source_weight": 0.7,
            "target_weight": -1.2,
            "source_noise": 0.4,
            "target_noise": 0.5,
        }
        flipped = dict(base, source_weight=-0.7, target_weight=1.2)
        a = nll_joint(ParamVector.from_natural(base), source, target, "Matern32")
        b = nll_joint(ParamVector.from_natural(flipped), source, target, "Matern32")
        assert a == pytest.approx(b, rel=1e-12)

    def test_matches_stacked_density_oracle(self, rng):
        source = make_data(rng, n=5, noise=0.3)
        target = make_data(rng, n=4, noise=0.7)
        natural = {
            "signal_variance": 1.3,
            "length_scale_sq": 0.8,
            "source_weight": 0.9,
            "target_weight": 1.1,
            "source_noise": 0.3,
            "target_noise": 0.7,
        }
        pv = ParamVector.from_natural(natural)
        k = KernelSpec("SquaredExponential", signal_variance=1.3, length_scale_sq=0.8)
        blocks = coreg_gram(CoregionalizationSpec(0.9, 1.1), k, source.inputs, target.inputs)
        cov = blocks.assembled()
        cov[: source.n, : source.n] += 0.3 * np.eye(source.n)
        cov[source.n :, source.n :] += 0.7 * np.eye(target.n)
        y = np.concatenate([source.outputs, target.outputs])
        ref = -multivariate_normal(mean=np.zeros(y.shape[0]), cov=cov).logpdf(y)
        assert nll_joint(pv, source, target, "SquaredExponential") == pytest.approx(ref, rel=1e-10)


class TestTransferObjective:
    def test_matches_pseudo_observation_density(self, rng):
        source = make_data(rng, n=5, noise=0.3)
        target = make_data(rng, n=4, noise=0.7)
        k_source = KernelSpec("SquaredExponential", signal_variance=0.9, length_scale_sq=0.6)
        sp = predict_outputs(source, k_source, source.inputs)
        natural = {
            "signal_variance": 1.3,
            "length_scale_sq": 0.8,
            "source_weight": 0.9,
            "target_weight": 1.1,
            "target_noise": 0.7,
        }
        pv = ParamVector.from_natural(natural)
        k = KernelSpec("SquaredExponential", signal_variance=1.3, length_scale_sq=0.8)
        blocks = coreg_gram(CoregionalizationSpec(0.9, 1.1), k, sp.predictive_inputs, target.inputs)
        cov = blocks.assembled()
        cov[: sp.n_sites, : sp.n_sites] += sp.cov
        cov[sp.n_sites :, sp.n_sites :] += 0.7 * np.eye(target.n)
        y = np.concatenate([sp.mean, target.outputs])
        ref = -multivariate_normal(mean=np.zeros(y.shape[0]), cov=cov).logpdf(y)
        assert nll_transfer(pv, sp, target, "SquaredExponential") == pytest.approx(ref, rel=1e-10)


class TestOptimize:
    def test_quadratic_converges(self):
        init = ParamVector(("source_weight",), np.array([10.0]))
        result = optimize(lambda pv: (pv.values[0] - 3.0) ** 2, init, max_iters=500)
        assert result.converged
        assert result.params.values[0] == pytest.approx(3.0, abs=1e-6)

    def test_optimal_init_returned_unchanged(self):
        init = ParamVector(("source_weight", "target_weight"), np.array([1.0, -2.0]))
        objective = lambda pv: float(np.sum((pv.values - np.array([1.0, -2.0])) ** 2))
        result = optimize(objective, init, max_iters=100)
        assert result.converged
        np.testing.assert_allclose(result.params.values, init.values, atol=1e-12)
        assert result.value <= objective(init)

    def test_never_increases_objective(self, rng):
        data = make_data(rng, n=10)
        init = single_task_init("SquaredExponential")
        objective = lambda pv: nll_single(pv, data, "SquaredExponential")
        result = optimize(objective, init, max_iters=300)
        assert result.value <= objective(init) + 1e-12
        assert result.value == pytest.approx(objective(result.params), rel=1e-12)

    def test_budget_exhaustion_flagged(self, rng):
        data = make_data(rng, n=10)
        init = single_task_init("SquaredExponential")
        result = optimize(lambda pv: nll_single(pv, data, "SquaredExponential"), init, max_iters=2)
        assert not result.converged
        assert result.n_iters == 2

    def test_infinite_init_rejected(self):
        init = ParamVector(("source_weight",), np.array([0.0]))
        with pytest.raises(ValueError):
            optimize(lambda pv: np.inf, init)

    def test_length_scale_recovery(self):
        # Data generated with a known squared length-scale; the fitted value
        # should land within a factor of 1.5 in the median over 20 trials.
        recovered = []
        for trial in range(20):
            cfg = SynthesisConfig(
                source_noise=0.05,
                target_noise=0.05,
                source_weight=1.0,
                target_weight=1.0,
                latent_kernel=KernelSpec("SquaredExponential", signal_variance=1.0, length_scale_sq=0.4),
                n_train=32,
                input_range=(-3.5, 3.5),
                n_test=1,
                test_range=(-5.0, 5.0),
                seed=900 + trial,
            )
            sample = sample_icm(cfg)
            init = single_task_init("SquaredExponential")
            result = optimize(
                lambda pv: nll_single(pv, sample.source, "SquaredExponential"),
                init,
                max_iters=500,
            )
            recovered.append(result.params.natural()["length_scale_sq"])
        median = float(np.median(recovered))
        assert 0.4 / 1.5 <= median <= 0.4 * 1.5
