"""Covariance functions and the rank-1 coregionalized block covariance.

Seven stationary and non-stationary kernel families over R^{n_x} inputs,
with optional per-dimension (ARD) squared length-scales for the
distance-based families, plus the 2x2 coregionalization structure that
couples a source and a target task through one shared latent kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "FAMILIES",
    "KernelSpec",
    "CoregionalizationSpec",
    "gram",
    "gram_diag",
    "coreg_matrix",
    "coreg_gram",
    "scale_signal_variance",
    "CoregGram",
]

FAMILIES = (
    "Constant",
    "Linear",
    "Polynomial",
    "Cosine",
    "SquaredExponential",
    "RationalQuadratic",
    "Matern32",
)

# Families whose formula depends on inputs only through (scaled) coordinate
# differences; ARD length-scales apply to these and are ignored elsewhere.
_DISTANCE_FAMILIES = ("Cosine", "SquaredExponential", "RationalQuadratic", "Matern32")

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class KernelSpec:
    """One kernel family with its hyperparameters in natural units.

    `length_scale_sq` is the squared length-scale l^2, either a scalar or a
    per-input-dimension vector (ARD). `alpha` is the rational-quadratic
    fluctuation parameter; `offset` and `degree` belong to the polynomial
    family. Parameters irrelevant to the family are ignored.
    """

    family: str
    signal_variance: float = 1.0
    length_scale_sq: float | np.ndarray = 1.0
    alpha: float = 1.0
    offset: float = 1.0
    degree: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if not self.signal_variance > 0.0:
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")
        ls = np.asarray(self.length_scale_sq, dtype=float)
        if self.family in _DISTANCE_FAMILIES:
            if np.any(ls <= 0.0):
                raise ValueError(f"length_scale_sq must be positive, got {self.length_scale_sq}")
            if ls.ndim > 1:
                raise ValueError("length_scale_sq must be a scalar or 1-D vector")
        if self.family == "RationalQuadratic" and not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.family == "Polynomial":
            if int(self.degree) < 1 or int(self.degree) != self.degree:
                raise ValueError(f"degree must be a positive integer, got {self.degree}")
            object.__setattr__(self, "degree", int(self.degree))
        if ls.ndim == 1:
            ls = ls.copy()
            ls.flags.writeable = False
            object.__setattr__(self, "length_scale_sq", ls)
        else:
            object.__setattr__(self, "length_scale_sq", float(ls))

    @property
    def is_ard(self) -> bool:
        return np.ndim(self.length_scale_sq) == 1


def _as_inputs(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"inputs must be an (n, n_x) matrix, got shape {a.shape}")
    return a


def _length_scales(k: KernelSpec, n_dims: int) -> np.ndarray:
    ls = np.asarray(k.length_scale_sq, dtype=float)
    if ls.ndim == 0:
        return np.full(n_dims, float(ls))
    if ls.shape[0] != n_dims:
        raise ValueError(f"ARD length_scale_sq has {ls.shape[0]} entries, inputs have {n_dims} columns")
    return ls


def gram(k: KernelSpec, x1, x2) -> np.ndarray:
    """Kernel matrix with entry (i, j) = k(x1_i, x2_j).

    For distance-based families the squared distance is
    r^2 = sum_d (x_d - x'_d)^2 / l^2_d; the cosine family instead divides
    the signed coordinate-difference sum by l^2.
    """
    a = _as_inputs(x1)
    b = _as_inputs(x2)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"input column counts differ: {a.shape[1]} vs {b.shape[1]}")
    sv = k.signal_variance
    family = k.family

    if family == "Constant":
        return np.full((a.shape[0], b.shape[0]), sv)
    if family == "Linear":
        return sv * (a @ b.T)
    if family == "Polynomial":
        return (sv * (a @ b.T) + k.offset) ** k.degree
    if family == "Cosine":
        ls = _length_scales(k, a.shape[1])
        sa = (a / ls).sum(axis=1)
        sb = (b / ls).sum(axis=1)
        return sv * np.cos(2.0 * np.pi * (sa[:, None] - sb[None, :]))

    ls = _length_scales(k, a.shape[1])
    root = np.sqrt(ls)
    r2 = cdist(a / root, b / root, metric="sqeuclidean")
    np.clip(r2, 0.0, None, out=r2)
    if family == "SquaredExponential":
        return sv * np.exp(-0.5 * r2)
    if family == "RationalQuadratic":
        return sv * (1.0 + r2 / (2.0 * k.alpha)) ** (-k.alpha)
    # Matern32
    t = _SQRT3 * np.sqrt(r2)
    return sv * (1.0 + t) * np.exp(-t)


def gram_diag(k: KernelSpec, x) -> np.ndarray:
    """Diagonal k(x_i, x_i) without forming the full matrix."""
    a = _as_inputs(x)
    sv = k.signal_variance
    if k.family == "Linear":
        return sv * np.sum(a * a, axis=1)
    if k.family == "Polynomial":
        return (sv * np.sum(a * a, axis=1) + k.offset) ** k.degree
    # Constant, Cosine, SE, RQ, Matern32 all evaluate to sv at zero separation.
    return np.full(a.shape[0], sv)


def scale_signal_variance(k: KernelSpec, factor: float) -> KernelSpec:
    """Kernel scaled by a nonnegative factor, folded into signal_variance.

    A zero factor is floored at the smallest positive float so the result
    stays a valid spec while its Gram entries underflow to zero. The
    polynomial family does not scale multiplicatively and is rejected for
    factor != 1.
    """
    if factor < 0.0:
        raise ValueError(f"scale factor must be nonnegative, got {factor}")
    if factor == 1.0:
        return k
    if k.family == "Polynomial":
        raise ValueError("a polynomial kernel cannot absorb an output scale into its parameters")
    return replace(k, signal_variance=max(factor * k.signal_variance, np.finfo(float).tiny))


@dataclass(frozen=True)
class CoregionalizationSpec:
    """Rank-1 task coupling: B = (w_S, w_T)(w_S, w_T)^T."""

    source_weight: float
    target_weight: float


def coreg_matrix(c: CoregionalizationSpec) -> np.ndarray:
    """The 2x2 coregionalization matrix B."""
    w = np.array([c.source_weight, c.target_weight], dtype=float)
    return np.outer(w, w)


class CoregGram(NamedTuple):
    """The four task-block kernel matrices of the coupled prior."""

    ss: np.ndarray
    st: np.ndarray
    ts: np.ndarray
    tt: np.ndarray

    def assembled(self) -> np.ndarray:
        return np.block([[self.ss, self.st], [self.ts, self.tt]])


def coreg_gram(c: CoregionalizationSpec, k_u: KernelSpec, x_source, x_target) -> CoregGram:
    """Blocks K_qp = B_qp * gram(k_u, x_q, x_p) for tasks q, p in (source, target)."""
    b = coreg_matrix(c)
    xs = _as_inputs(x_source)
    xt = _as_inputs(x_target)
    if xs.shape[1] != xt.shape[1]:
        raise ValueError(f"source and target input column counts differ: {xs.shape[1]} vs {xt.shape[1]}")
    k_st = b[0, 1] * gram(k_u, xs, xt)
    return CoregGram(
        ss=b[0, 0] * gram(k_u, xs, xs),
        st=k_st,
        ts=k_st.T.copy(),
        tt=b[1, 1] * gram(k_u, xt, xt),
    )
