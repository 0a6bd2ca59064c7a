"""Single-task Gaussian-process regression with a zero prior mean.

Posterior over function values, the output-data predictor that a source
task hands to a target, and the log marginal likelihood used for
hyperparameter learning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .gaussian import MultivariateGaussian, jittered_cholesky, symmetrize
from .kernels import KernelSpec, gram, gram_diag

__all__ = [
    "TaskData",
    "SourcePredictor",
    "posterior_at",
    "predict_outputs",
    "predict_marginals",
    "log_marginal_likelihood",
]

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class TaskData:
    """Training inputs, outputs, and output-noise variance for one task."""

    inputs: np.ndarray
    outputs: np.ndarray
    noise_variance: float

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(self.outputs, dtype=float).reshape(-1)
        if x.ndim != 2:
            raise ValueError(f"inputs must be an (n, n_x) matrix, got shape {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} input rows but {y.shape[0]} outputs")
        # Zero noise is admitted for noiseless synthetic data; downstream solves
        # then rely on the jitter policy alone.
        if self.noise_variance < 0.0:
            raise ValueError(f"noise_variance must be nonnegative, got {self.noise_variance}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("inputs and outputs must be finite")
        x = x.copy()
        y = y.copy()
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class SourcePredictor:
    """Predictive mean and covariance of unobserved outputs at known sites.

    This is the only object that crosses the source-to-target boundary: the
    sufficient statistics of the source's output-data predictor, evaluated
    at `predictive_inputs`.
    """

    predictive_inputs: np.ndarray
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.predictive_inputs, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        m = np.asarray(self.mean, dtype=float).reshape(-1)
        r = np.asarray(self.cov, dtype=float)
        if x.shape[0] != m.shape[0]:
            raise ValueError(f"{x.shape[0]} predictive sites but mean has dimension {m.shape[0]}")
        if r.shape != (m.shape[0], m.shape[0]):
            raise ValueError(f"cov has shape {r.shape}, expected ({m.shape[0]}, {m.shape[0]})")
        scale = max(1.0, float(np.max(np.abs(r))) if r.size else 1.0)
        if float(np.max(np.abs(r - r.T))) > 1e-12 * scale:
            raise ValueError("predictive covariance is not symmetric")
        x = x.copy()
        m = m.copy()
        r = r.copy()
        for arr in (x, m, r):
            arr.flags.writeable = False
        object.__setattr__(self, "predictive_inputs", x)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", r)

    @property
    def n_sites(self) -> int:
        return self.mean.shape[0]


def _train_factor(data: TaskData, k: KernelSpec) -> np.ndarray:
    c = gram(k, data.inputs, data.inputs) + data.noise_variance * np.eye(data.n)
    return jittered_cholesky(symmetrize(c))


def posterior_at(data: TaskData, k: KernelSpec, test) -> MultivariateGaussian:
    """Posterior over latent function values at the test inputs.

    mean = K(test, x) (K(x, x) + s^2 I)^{-1} y
    cov  = K(test, test) - K(test, x) (K(x, x) + s^2 I)^{-1} K(x, test)
    """
    test = np.asarray(test, dtype=float)
    if test.ndim == 1:
        test = test.reshape(-1, 1)
    if test.shape[0] == 0:
        raise ValueError("test inputs must be nonempty")
    factor = _train_factor(data, k)
    k_test_train = gram(k, test, data.inputs)
    alpha = cho_solve((factor, True), data.outputs)
    mean = k_test_train @ alpha
    half = solve_triangular(factor, k_test_train.T, lower=True)
    cov = symmetrize(gram(k, test, test) - half.T @ half)
    return MultivariateGaussian(mean, cov)


def predict_outputs(data: TaskData, k: KernelSpec, test) -> SourcePredictor:
    """Output-data predictor at the test sites: posterior plus output noise.

    The posterior covariance is mathematically PSD but can come out
    indefinite at machine precision when hyperparameters are extreme; the
    predictor is the object everything downstream conditions on, so its
    covariance is clipped back onto the PSD cone here.
    """
    post = posterior_at(data, k, test)
    eigvals, eigvecs = np.linalg.eigh(post.cov)
    clipped = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
    cov = symmetrize(clipped) + data.noise_variance * np.eye(post.dim)
    return SourcePredictor(np.asarray(test, dtype=float), post.mean, cov)


def predict_marginals(data: TaskData, k: KernelSpec, test) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and pointwise variance, without the full test covariance."""
    test = np.asarray(test, dtype=float)
    if test.ndim == 1:
        test = test.reshape(-1, 1)
    factor = _train_factor(data, k)
    k_test_train = gram(k, test, data.inputs)
    mean = k_test_train @ cho_solve((factor, True), data.outputs)
    half = solve_triangular(factor, k_test_train.T, lower=True)
    var = gram_diag(k, test) - np.sum(half**2, axis=0)
    return mean, np.clip(var, 0.0, None)


def log_marginal_likelihood(data: TaskData, k: KernelSpec) -> float:
    """log p(y | x, k, noise) = -0.5 [y^T C^{-1} y + ln det C + n ln 2 pi]."""
    factor = _train_factor(data, k)
    alpha = cho_solve((factor, True), data.outputs)
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor))))
    return -0.5 * (float(data.outputs @ alpha) + logdet + data.n * _LOG_2PI)
