"""Exact multivariate-Gaussian algebra on dense matrices.

Joint construction, block conditioning, marginalization, KL divergence,
PSD solves, and seeded sampling. Containers are immutable and every
operation is a pure function of its inputs, so concurrent callers never
share mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

__all__ = [
    "FactorizationError",
    "MultivariateGaussian",
    "BlockGaussian",
    "jittered_cholesky",
    "psd_solve",
    "join_prior_noise",
    "condition",
    "marginalize",
    "kl_divergence",
    "sample",
    "sample_rng",
]

# Escalating diagonal jitter, relative to the mean diagonal scale tr(A)/d.
JITTER_INITIAL = 1e-10
JITTER_MAX = 1e-6

_SYMMETRY_RTOL = 1e-12


class FactorizationError(LinAlgError):
    """A matrix could not be factorized even at maximum jitter."""


def _as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    return v


def _as_square_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def _check_symmetric(a: np.ndarray, what: str = "covariance") -> None:
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > _SYMMETRY_RTOL * scale:
        raise ValueError(f"{what} is not symmetric (max asymmetry {asym:.3e})")


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Average a matrix with its transpose, removing round-off asymmetry."""
    return 0.5 * (a + a.T)


def jittered_cholesky(a) -> np.ndarray:
    """Lower Cholesky factor of a PSD matrix, with escalating diagonal jitter.

    A clean factorization is attempted first; on failure, eps * (tr(a)/d)
    is added to the diagonal with eps escalating tenfold from 1e-10 up to
    1e-6. An unconditional initial jitter would scale with the largest
    block of a heterogeneous matrix and visibly perturb the smaller ones,
    so jitter is a fallback, not a default.

    Raises
    ------
    FactorizationError
        If the matrix is still not positive definite at maximum jitter.
    """
    m = _as_square_matrix(a)
    d = m.shape[0]
    try:
        return cholesky(m, lower=True)
    except LinAlgError:
        pass
    scale = float(np.trace(m)) / d
    eye = np.eye(d)
    eps = JITTER_INITIAL
    while eps <= JITTER_MAX * (1.0 + 1e-12):
        try:
            return cholesky(m + (eps * scale) * eye, lower=True)
        except LinAlgError:
            eps *= 10.0
    raise FactorizationError(
        f"matrix of dimension {d} not factorizable at jitter {JITTER_MAX:g} * tr/d"
    )


def psd_solve(a, b) -> np.ndarray:
    """Solve a @ x = b for symmetric PSD a via a jittered Cholesky factorization."""
    m = _as_square_matrix(a)
    rhs = np.asarray(b, dtype=float)
    if rhs.shape[0] != m.shape[0]:
        raise ValueError(f"right-hand side has {rhs.shape[0]} rows, matrix is {m.shape[0]}x{m.shape[0]}")
    factor = jittered_cholesky(m)
    return cho_solve((factor, True), rhs)


@dataclass(frozen=True)
class MultivariateGaussian:
    """Gaussian distribution N(mean, cov) with a symmetric PSD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_vector(self.mean)
        cov = _as_square_matrix(self.cov)
        if cov.shape[0] != mean.shape[0]:
            raise ValueError(
                f"mean has dimension {mean.shape[0]} but covariance is {cov.shape[0]}x{cov.shape[0]}"
            )
        _check_symmetric(cov)
        mean = mean.copy()
        cov = cov.copy()
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def require_psd(self) -> None:
        """Raise FactorizationError unless cov is PSD under the jitter policy."""
        jittered_cholesky(self.cov)


@dataclass(frozen=True)
class BlockGaussian:
    """A Gaussian together with an ordered partition of its index range."""

    gaussian: MultivariateGaussian
    block_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        if not sizes or any(s <= 0 for s in sizes):
            raise ValueError(f"block sizes must be positive, got {sizes}")
        if sum(sizes) != self.gaussian.dim:
            raise ValueError(
                f"block sizes {sizes} sum to {sum(sizes)}, Gaussian dimension is {self.gaussian.dim}"
            )
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def n_blocks(self) -> int:
        return len(self.block_sizes)

    def block_slice(self, i: int) -> slice:
        if not 0 <= i < self.n_blocks:
            raise IndexError(f"block index {i} out of range for {self.n_blocks} blocks")
        start = sum(self.block_sizes[:i])
        return slice(start, start + self.block_sizes[i])

    def block_indices(self, blocks: Sequence[int]) -> np.ndarray:
        parts = [np.arange(self.block_slice(i).start, self.block_slice(i).stop) for i in blocks]
        return np.concatenate(parts)


def join_prior_noise(prior: MultivariateGaussian, noise_cov) -> BlockGaussian:
    """Join a Gaussian prior over f with additive noise y = f + e, e ~ N(0, noise_cov).

    Returns the 2d-dimensional joint over (f, y) with mean (m, m) and
    covariance [[K, K], [K, K + noise_cov]].
    """
    noise = _as_square_matrix(noise_cov)
    d = prior.dim
    if noise.shape[0] != d:
        raise ValueError(f"noise covariance is {noise.shape[0]}x{noise.shape[0]}, prior dimension is {d}")
    _check_symmetric(noise, "noise covariance")
    scale = max(1.0, float(np.trace(noise)) / d)
    min_eig = float(np.min(np.linalg.eigvalsh(symmetrize(noise)))) if d else 0.0
    if min_eig < -1e-10 * scale:
        raise ValueError(f"noise covariance is not PSD (min eigenvalue {min_eig:.3e})")
    k = prior.cov
    m = prior.mean
    joint_mean = np.concatenate([m, m])
    joint_cov = np.block([[k, k], [k, k + noise]])
    return BlockGaussian(MultivariateGaussian(joint_mean, symmetrize(joint_cov)), (d, d))


def _split_indices(joint: BlockGaussian, observed_blocks: Sequence[int]):
    obs = list(observed_blocks)
    if len(set(obs)) != len(obs):
        raise ValueError(f"duplicate observed block in {obs}")
    for i in obs:
        if not 0 <= i < joint.n_blocks:
            raise IndexError(f"block index {i} out of range for {joint.n_blocks} blocks")
    keep = [i for i in range(joint.n_blocks) if i not in obs]
    if not keep:
        raise ValueError("conditioning on every block leaves nothing to infer")
    return joint.block_indices(keep), joint.block_indices(obs)


def condition(joint: BlockGaussian, observed_block: int | Sequence[int], observed_value) -> MultivariateGaussian:
    """Condition a block Gaussian on observed values of one or more blocks.

    The remaining blocks are returned, in their original order, with
    mean  m_keep + C_ko C_oo^{-1} (y - m_obs)  and covariance
    C_kk - C_ko C_oo^{-1} C_ok.
    """
    obs_blocks = [observed_block] if isinstance(observed_block, (int, np.integer)) else list(observed_block)
    keep_idx, obs_idx = _split_indices(joint, obs_blocks)
    y = _as_vector(observed_value)
    if y.shape[0] != obs_idx.shape[0]:
        raise ValueError(f"observed value has dimension {y.shape[0]}, observed blocks have {obs_idx.shape[0]}")
    mean = joint.gaussian.mean
    cov = joint.gaussian.cov
    c_oo = cov[np.ix_(obs_idx, obs_idx)]
    c_ko = cov[np.ix_(keep_idx, obs_idx)]
    c_kk = cov[np.ix_(keep_idx, keep_idx)]
    factor = jittered_cholesky(symmetrize(c_oo))
    innovation = cho_solve((factor, True), y - mean[obs_idx])
    gain_t = cho_solve((factor, True), c_ko.T)
    cond_mean = mean[keep_idx] + c_ko @ innovation
    cond_cov = symmetrize(c_kk - c_ko @ gain_t)
    return MultivariateGaussian(cond_mean, cond_cov)


def marginalize(joint: BlockGaussian, keep_blocks: Sequence[int]) -> MultivariateGaussian:
    """Marginal of the kept blocks, concatenated in ascending block order."""
    keep = sorted(set(int(i) for i in keep_blocks))
    if not keep:
        raise ValueError("keep_blocks must be non-empty")
    for i in keep:
        if not 0 <= i < joint.n_blocks:
            raise IndexError(f"block index {i} out of range for {joint.n_blocks} blocks")
    idx = joint.block_indices(keep)
    return MultivariateGaussian(joint.gaussian.mean[idx], joint.gaussian.cov[np.ix_(idx, idx)])


def kl_divergence(p: MultivariateGaussian, q: MultivariateGaussian) -> float:
    """KL divergence D(p || q) between two Gaussians of equal dimension.

    0.5 * [tr(Sq^{-1} Sp) + (mq - mp)^T Sq^{-1} (mq - mp) - d + ln det Sq - ln det Sp]
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: p has {p.dim}, q has {q.dim}")
    d = p.dim
    factor_q = jittered_cholesky(q.cov)
    factor_p = jittered_cholesky(p.cov)
    logdet_q = 2.0 * float(np.sum(np.log(np.diag(factor_q))))
    logdet_p = 2.0 * float(np.sum(np.log(np.diag(factor_p))))
    # tr(Sq^{-1} Sp) = ||Lq^{-1} Lp||_F^2
    half = solve_triangular(factor_q, factor_p, lower=True)
    trace_term = float(np.sum(half**2))
    z = solve_triangular(factor_q, q.mean - p.mean, lower=True)
    maha = float(z @ z)
    return 0.5 * (trace_term + maha - d + logdet_q - logdet_p)


def sample_rng(g: MultivariateGaussian, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw `count` samples using an existing generator. See `sample`."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    # Eigendecomposition tolerates PSD rank deficiency (zero covariance included).
    eigvals, eigvecs = np.linalg.eigh(symmetrize(np.asarray(g.cov)))
    transform = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    z = rng.standard_normal((count, g.dim))
    return g.mean + z @ transform.T


def sample(g: MultivariateGaussian, seed: int, count: int) -> np.ndarray:
    """Draw a (count x d) matrix of samples from g, deterministic in the seed."""
    return sample_rng(g, np.random.default_rng(seed), count)
