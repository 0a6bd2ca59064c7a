"""Shared fixtures and independent oracle implementations.

The oracles here deliberately avoid the library's solve paths: dense
joints are assembled entry-by-entry and conditioned through the generic
block-Gaussian operation, and reference statistics come from Monte Carlo
or explicit precision-matrix inversion.
"""

from __future__ import annotations

import numpy as np
import pytest

from gpbtl.gaussian import BlockGaussian, MultivariateGaussian, condition
from gpbtl.kernels import CoregionalizationSpec, KernelSpec, coreg_matrix, gram


def random_spd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """A well-conditioned random symmetric positive-definite matrix."""
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def random_gaussian(rng: np.random.Generator, n: int) -> MultivariateGaussian:
    return MultivariateGaussian(rng.standard_normal(n), random_spd(rng, n))


def random_distance_kernel(rng: np.random.Generator) -> KernelSpec:
    family = rng.choice(["SquaredExponential", "RationalQuadratic", "Matern32"])
    return KernelSpec(
        family=str(family),
        signal_variance=float(rng.uniform(0.5, 2.0)),
        length_scale_sq=float(rng.uniform(0.3, 1.5)),
        alpha=float(rng.uniform(0.5, 2.0)),
    )


def dense_coupled_posterior(
    coreg: CoregionalizationSpec,
    kernel: KernelSpec,
    source_sites: np.ndarray,
    source_obs: np.ndarray,
    source_obs_cov: np.ndarray,
    target_inputs: np.ndarray,
    target_outputs: np.ndarray,
    target_noise: float,
    test: np.ndarray,
) -> MultivariateGaussian:
    """Reference posterior over (f_source(test), f_target(test)).

    Builds the explicit joint Gaussian over (f_source(test), f_target(test),
    source pseudo-observations, target outputs) block by block, then
    conditions on the observed blocks. Covers both the raw-data multitask
    update (isotropic source_obs_cov) and the transferred-predictor update.
    """
    b = coreg_matrix(coreg)
    k = lambda p, q: gram(kernel, p, q)
    xs, xt, te = source_sites, target_inputs, test
    n_s, n_t, m = xs.shape[0], xt.shape[0], te.shape[0]
    cov = np.block(
        [
            [b[0, 0] * k(te, te), b[0, 1] * k(te, te), b[0, 0] * k(te, xs), b[0, 1] * k(te, xt)],
            [b[1, 0] * k(te, te), b[1, 1] * k(te, te), b[1, 0] * k(te, xs), b[1, 1] * k(te, xt)],
            [b[0, 0] * k(xs, te), b[0, 1] * k(xs, te), b[0, 0] * k(xs, xs) + source_obs_cov, b[0, 1] * k(xs, xt)],
            [b[1, 0] * k(xt, te), b[1, 1] * k(xt, te), b[1, 0] * k(xt, xs), b[1, 1] * k(xt, xt) + target_noise * np.eye(n_t)],
        ]
    )
    joint = BlockGaussian(
        MultivariateGaussian(np.zeros(2 * m + n_s + n_t), 0.5 * (cov + cov.T)),
        (m, m, n_s, n_t),
    )
    return condition(joint, [2, 3], np.concatenate([source_obs, target_outputs]))


def precision_conditional(
    mean: np.ndarray, cov: np.ndarray, keep: np.ndarray, obs: np.ndarray, value: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force conditional moments via full precision-matrix inversion."""
    precision = np.linalg.inv(cov)
    p_kk = precision[np.ix_(keep, keep)]
    p_ko = precision[np.ix_(keep, obs)]
    cond_cov = np.linalg.inv(p_kk)
    cond_mean = mean[keep] - cond_cov @ p_ko @ (value - mean[obs])
    return cond_mean, 0.5 * (cond_cov + cond_cov.T)


def max_rel_err(actual: np.ndarray, reference: np.ndarray) -> float:
    """Max absolute deviation, normalized by the reference scale (floored at 1)."""
    ref_scale = max(1.0, float(np.max(np.abs(reference))))
    return float(np.max(np.abs(np.asarray(actual) - np.asarray(reference)))) / ref_scale


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260808)
