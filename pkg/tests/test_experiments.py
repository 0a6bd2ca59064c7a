"""Benchmark harness: metric, aggregation, sweeps, and the kernel grid."""

import numpy as np
import pytest

from gpbtl.experiments import GridResult, SweepResult, aggregate, mae, run_kernel_grid, run_sweep
from gpbtl.kernels import KernelSpec, scale_signal_variance
from gpbtl.regression import predict_marginals
from gpbtl.synthesis import SynthesisConfig, sample_icm


def make_template(**overrides):
    defaults = dict(
        source_noise=1.0,
        target_noise=1.0,
        source_weight=0.8,
        target_weight=1.0,
        latent_kernel=KernelSpec("SquaredExponential", signal_variance=2.0, length_scale_sq=0.4),
        n_train=12,
        input_range=(-3.5, 3.5),
        n_test=16,
        test_range=(-5.0, 5.0),
        seed=42,
    )
    defaults.update(overrides)
    return SynthesisConfig(**defaults)


class TestMae:
    def test_identity(self, rng):
        v = rng.standard_normal(10)
        assert mae(v, v) == 0.0

    def test_hand_computed(self):
        assert mae([0.0, 0.0], [1.0, -1.0]) == 1.0

    def test_matches_elementwise_recomputation(self, rng):
        truth = rng.standard_normal(50)
        estimate = rng.standard_normal(50)
        direct = sum(abs(a - b) for a, b in zip(truth, estimate)) / 50
        assert mae(truth, estimate) == pytest.approx(direct, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mae([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            mae([], [])


class TestAggregate:
    def test_three_values(self):
        assert aggregate([1.0, 2.0, 3.0]) == (2.0, 1.5, 2.5)

    def test_degenerate(self):
        assert aggregate([4.0] * 7) == (4.0, 4.0, 4.0)

    def test_matches_sort_and_index_oracle(self, rng):
        values = rng.standard_normal(101)
        ordered = np.sort(values)

        def quantile(p):
            h = (len(ordered) - 1) * p
            lo = int(np.floor(h))
            hi = int(np.ceil(h))
            return ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo])

        median, q25, q75 = aggregate(values)
        assert median == pytest.approx(quantile(0.5), rel=1e-12)
        assert q25 == pytest.approx(quantile(0.25), rel=1e-12)
        assert q75 == pytest.approx(quantile(0.75), rel=1e-12)
        assert q25 <= median <= q75

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestRunSweep:
    def test_single_cell_equals_direct_composition(self):
        template = make_template()
        result = run_sweep(template, "source_noise", [0.5], algorithms=("TNT",), trials=1)
        sample = sample_icm(
            SynthesisConfig(**{**template.__dict__, "source_noise": 0.5, "seed": template.seed})
        )
        k_target = scale_signal_variance(template.latent_kernel, template.target_weight**2)
        mean, _ = predict_marginals(sample.target, k_target, sample.test_inputs)
        expected = mae(sample.target_truth_test, mean)
        assert result.maes["TNT"][0, 0] == expected

    def test_baseline_invariant_to_source_settings(self):
        # The no-transfer baseline shares trial seeds across the swept axis,
        # so its errors repeat exactly at every source-noise value.
        result = run_sweep(
            make_template(), "source_noise", [0.01, 1.0, 100.0], algorithms=("TNT",), trials=4
        )
        table = result.maes["TNT"]
        np.testing.assert_array_equal(table[0], table[1])
        np.testing.assert_array_equal(table[1], table[2])

    def test_deterministic_across_runs(self):
        args = dict(
            template=make_template(),
            sweep_name="source_weight",
            values=[-1.0, 0.5],
            algorithms=("SNT", "TNT", "ICM", "FPDa"),
            trials=3,
        )
        a = run_sweep(args["template"], args["sweep_name"], args["values"], args["algorithms"], args["trials"])
        b = run_sweep(args["template"], args["sweep_name"], args["values"], args["algorithms"], args["trials"])
        for alg in args["algorithms"]:
            np.testing.assert_array_equal(a.maes[alg], b.maes[alg])

    def test_threaded_matches_serial(self):
        template = make_template()
        serial = run_sweep(template, "source_noise", [0.1, 10.0], trials=3, threads=1)
        threaded = run_sweep(template, "source_noise", [0.1, 10.0], trials=3, threads=4)
        for alg in serial.algorithms:
            np.testing.assert_array_equal(serial.maes[alg], threaded.maes[alg])

    def test_aggregates_ordered(self):
        result = run_sweep(make_template(), "source_noise", [1.0], trials=9)
        for rows in result.aggregates().values():
            median, q25, q75 = rows[0]
            assert q25 <= median <= q75

    def test_zero_source_weight_cell_runs(self):
        # The decoupled point on the weight grid must not crash any algorithm.
        result = run_sweep(make_template(), "source_weight", [0.0], trials=2)
        assert result.maes["SNT"][0, 0] < 1e-300  # truth and posterior mean both vanish
        assert np.isfinite(result.maes["FPDa"][0, 0])

    def test_precise_source_gives_strict_positive_transfer(self):
        # With unit task weights and a near-noiseless source, the transfer
        # posterior must beat the no-transfer baseline in the median.
        template = make_template(
            source_weight=1.0, target_weight=1.0, n_train=64, n_test=200, seed=31
        )
        result = run_sweep(
            template, "source_noise", [0.001], algorithms=("TNT", "FPDa"), trials=200, threads=4
        )
        agg = result.aggregates()
        assert agg["FPDa"][0, 0] < agg["TNT"][0, 0]

    def test_validation(self):
        with pytest.raises(ValueError):
            run_sweep(make_template(), "target_noise", [1.0])
        with pytest.raises(ValueError):
            run_sweep(make_template(), "source_noise", [1.0], trials=0)
        with pytest.raises(ValueError):
            run_sweep(make_template(), "source_noise", [1.0], algorithms=("XYZ",))


class TestRunKernelGrid:
    def test_single_cell_reproducible(self):
        template = make_template(target_weight=1.0, source_weight=1.0)
        kernel_params = KernelSpec("Constant", signal_variance=1.0)
        a = run_kernel_grid(
            template,
            kernel_params=kernel_params,
            synthesis_families=("Constant",),
            analysis_families=("Constant",),
            trials=1,
        )
        b = run_kernel_grid(
            template,
            kernel_params=kernel_params,
            synthesis_families=("Constant",),
            analysis_families=("Constant",),
            trials=1,
        )
        np.testing.assert_array_equal(a.maes["FPDa"], b.maes["FPDa"])
        np.testing.assert_array_equal(a.snt, b.snt)

    def test_small_grid_shapes(self):
        result = run_kernel_grid(
            make_template(source_weight=1.0),
            synthesis_families=("SquaredExponential", "Matern32"),
            analysis_families=("SquaredExponential", "Matern32"),
            trials=2,
        )
        assert result.snt.shape == (2, 2)
        for alg in ("TNT", "ICM", "FPDa"):
            assert result.maes[alg].shape == (2, 2, 2)
        assert result.differential_median("ICM").shape == (2, 2)

    def test_rows_iterate_all_cells(self):
        result = run_kernel_grid(
            make_template(source_weight=1.0),
            synthesis_families=("SquaredExponential",),
            analysis_families=("SquaredExponential", "Cosine"),
            trials=2,
        )
        trial_rows = list(result.iter_trial_rows())
        # SNT occupies one column: n_syn * trials rows; others n_syn * n_ana * trials.
        assert len(trial_rows) == 1 * 2 + 3 * (1 * 2 * 2)
        agg_rows = list(result.iter_aggregate_rows())
        assert len(agg_rows) == 1 + 3 * 2
