"""Maximum-likelihood hyperparameter learning.

Named parameter vectors live in a transformed space: positive quantities
(variances, squared length-scales, fluctuation) are stored as logarithms
so the optimizer is unconstrained, while signed quantities (task weights,
polynomial offset) are stored as-is. The optimizer is a dense quasi-Newton
(BFGS) iteration with central finite-difference gradients and a
backtracking line search; it never increases the objective along its
accepted trajectory.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.linalg import cho_solve

from .gaussian import FactorizationError, jittered_cholesky, symmetrize
from .kernels import CoregionalizationSpec, KernelSpec, gram
from .regression import SourcePredictor, TaskData, log_marginal_likelihood

__all__ = [
    "ParamVector",
    "OptimizeResult",
    "kernel_from_params",
    "single_task_init",
    "joint_init",
    "transfer_init",
    "nll_single",
    "nll_joint",
    "nll_transfer",
    "optimize",
]

_LOG_2PI = np.log(2.0 * np.pi)

# Parameter names holding signed quantities; everything else is positive
# and stored in log-space.
_SIGNED_NAMES = ("source_weight", "target_weight", "offset")

FD_STEP = 1e-6
REL_TOL = 1e-9
STALL_WINDOW = 10


def _is_signed(name: str) -> bool:
    return name in _SIGNED_NAMES


@dataclass(frozen=True)
class ParamVector:
    """Named scalars in the optimizer's transformed space."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if len(self.names) != v.shape[0]:
            raise ValueError(f"{len(self.names)} names but {v.shape[0]} values")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate parameter names in {self.names}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", v)

    @classmethod
    def from_natural(cls, items: Mapping[str, float] | Sequence[tuple[str, float]]) -> "ParamVector":
        pairs = list(items.items()) if isinstance(items, Mapping) else list(items)
        names = tuple(name for name, _ in pairs)
        values = [v if _is_signed(name) else math.log(v) for name, v in pairs]
        return cls(names, np.array(values, dtype=float))

    def natural(self) -> dict[str, float]:
        return {
            name: (v if _is_signed(name) else math.exp(v))
            for name, v in zip(self.names, self.values)
        }

    def with_values(self, values) -> "ParamVector":
        return ParamVector(self.names, np.asarray(values, dtype=float))


def kernel_from_params(family: str, natural: Mapping[str, float], ard_dims: int | None = None) -> KernelSpec:
    """Assemble a kernel spec from named natural-space parameters.

    With `ard_dims`, per-dimension squared length-scales are read from
    `length_scale_sq_0 .. length_scale_sq_{d-1}`; otherwise a scalar
    `length_scale_sq` is used when present.
    """
    kwargs: dict = {"family": family, "signal_variance": natural["signal_variance"]}
    if ard_dims is not None:
        kwargs["length_scale_sq"] = np.array(
            [natural[f"length_scale_sq_{i}"] for i in range(ard_dims)]
        )
    elif "length_scale_sq" in natural:
        kwargs["length_scale_sq"] = natural["length_scale_sq"]
    if "alpha" in natural:
        kwargs["alpha"] = natural["alpha"]
    if "offset" in natural:
        kwargs["offset"] = natural["offset"]
    if "degree" in natural:
        kwargs["degree"] = int(natural["degree"])
    return KernelSpec(**kwargs)


def _kernel_items(family: str, ard_dims: int | None) -> list[tuple[str, float]]:
    items = [("signal_variance", 1.0)]
    if ard_dims is None:
        items.append(("length_scale_sq", 1.0))
    else:
        items.extend((f"length_scale_sq_{i}", 1.0) for i in range(ard_dims))
    if family == "RationalQuadratic":
        items.append(("alpha", 1.0))
    return items


def single_task_init(family: str, ard_dims: int | None = None, noise: float = 1.0) -> ParamVector:
    """Unit initialization for a single-task fit: kernel parameters plus noise."""
    return ParamVector.from_natural(_kernel_items(family, ard_dims) + [("noise_variance", noise)])


def joint_init(
    family: str,
    ard_dims: int | None = None,
    source_weight: float = 0.1,
    target_weight: float = 0.1,
) -> ParamVector:
    """Initialization for the stacked two-task fit: kernel, weights, both noises."""
    items = _kernel_items(family, ard_dims) + [
        ("source_weight", source_weight),
        ("target_weight", target_weight),
        ("source_noise", 1.0),
        ("target_noise", 1.0),
    ]
    return ParamVector.from_natural(items)


def transfer_init(
    family: str,
    ard_dims: int | None = None,
    source_weight: float = 0.1,
    target_weight: float = 0.1,
) -> ParamVector:
    """Initialization for the transfer fit; source noise lives inside the predictor."""
    items = _kernel_items(family, ard_dims) + [
        ("source_weight", source_weight),
        ("target_weight", target_weight),
        ("target_noise", 1.0),
    ]
    return ParamVector.from_natural(items)


def _ard_dims_for(params: ParamVector) -> int | None:
    dims = sum(1 for n in params.names if n.startswith("length_scale_sq_"))
    return dims if dims > 0 else None


def nll_single(params: ParamVector, data: TaskData, family: str) -> float:
    """Negative log marginal likelihood of one task; +inf on solve failure."""
    try:
        # Exploratory parameter values can overflow the kernel evaluation;
        # any such point is simply infeasible for the optimizer.
        with np.errstate(over="ignore", invalid="ignore"):
            natural = params.natural()
            k = kernel_from_params(family, natural, _ard_dims_for(params))
            fit_data = replace(data, noise_variance=natural["noise_variance"])
            return -log_marginal_likelihood(fit_data, k)
    except (FactorizationError, ValueError, FloatingPointError, OverflowError):
        return np.inf


def _zero_mean_nll(y: np.ndarray, cov: np.ndarray) -> float:
    factor = jittered_cholesky(symmetrize(cov))
    alpha = cho_solve((factor, True), y)
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor))))
    return 0.5 * (float(y @ alpha) + logdet + y.shape[0] * _LOG_2PI)


def _coupled_obs_cov(
    natural: Mapping[str, float],
    family: str,
    ard_dims: int | None,
    x_source: np.ndarray,
    x_target: np.ndarray,
    source_noise_cov: np.ndarray,
    target_noise: float,
) -> np.ndarray:
    k = kernel_from_params(family, natural, ard_dims)
    coreg = CoregionalizationSpec(natural["source_weight"], natural["target_weight"])
    b = np.outer(
        [coreg.source_weight, coreg.target_weight], [coreg.source_weight, coreg.target_weight]
    )
    n_s = x_source.shape[0]
    n_t = x_target.shape[0]
    c = np.empty((n_s + n_t, n_s + n_t))
    c[:n_s, :n_s] = b[0, 0] * gram(k, x_source, x_source) + source_noise_cov
    c[:n_s, n_s:] = b[0, 1] * gram(k, x_source, x_target)
    c[n_s:, :n_s] = c[:n_s, n_s:].T
    c[n_s:, n_s:] = b[1, 1] * gram(k, x_target, x_target) + target_noise * np.eye(n_t)
    return c


def nll_joint(params: ParamVector, source: TaskData, target: TaskData, family: str) -> float:
    """Negative log density of both raw datasets under the coupled prior."""
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            natural = params.natural()
            cov = _coupled_obs_cov(
                natural,
                family,
                _ard_dims_for(params),
                source.inputs,
                target.inputs,
                natural["source_noise"] * np.eye(source.n),
                natural["target_noise"],
            )
            y = np.concatenate([source.outputs, target.outputs])
            return _zero_mean_nll(y, cov)
    except (FactorizationError, ValueError, FloatingPointError, OverflowError):
        return np.inf


def nll_transfer(params: ParamVector, sp: SourcePredictor, target: TaskData, family: str) -> float:
    """Negative log density of the transferred mean and target data jointly.

    The transferred predictive mean enters as a pseudo-observation of the
    source block with the transferred covariance as its noise; this is the
    evidence the transfer posterior normalizes against, and the natural
    fitting objective when raw source data is unavailable.
    """
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            natural = params.natural()
            cov = _coupled_obs_cov(
                natural,
                family,
                _ard_dims_for(params),
                sp.predictive_inputs,
                target.inputs,
                sp.cov,
                natural["target_noise"],
            )
            y = np.concatenate([sp.mean, target.outputs])
            return _zero_mean_nll(y, cov)
    except (FactorizationError, ValueError, FloatingPointError, OverflowError):
        return np.inf


@dataclass(frozen=True)
class OptimizeResult:
    params: ParamVector
    value: float
    converged: bool
    n_iters: int
    n_evals: int


def finite_difference_gradient(
    fun: Callable[[np.ndarray], float], x: np.ndarray, step: float = FD_STEP
) -> np.ndarray:
    """Central finite differences in the transformed space.

    Falls back to a one-sided difference when a perturbed evaluation is not
    finite, and to zero when neither side is usable.
    """
    grad = np.zeros_like(x)
    f_center: float | None = None
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        f_plus = fun(x + e)
        f_minus = fun(x - e)
        if np.isfinite(f_plus) and np.isfinite(f_minus):
            grad[i] = (f_plus - f_minus) / (2.0 * step)
        else:
            if f_center is None:
                f_center = fun(x)
            if np.isfinite(f_plus):
                grad[i] = (f_plus - f_center) / step
            elif np.isfinite(f_minus):
                grad[i] = (f_center - f_minus) / step
            else:
                grad[i] = 0.0
    return grad


def optimize(
    objective: Callable[[ParamVector], float],
    init: ParamVector,
    max_iters: int = 20000,
    rel_tol: float = REL_TOL,
    fd_step: float = FD_STEP,
) -> OptimizeResult:
    """Minimize the objective from `init`; returns the best parameters seen.

    Stops when the relative objective decrease over a 10-iteration window
    drops below `rel_tol`, when no descent step can be found, or when the
    iteration budget is exhausted (then `converged` is False).
    """
    n_evals = 0

    def fun(values: np.ndarray) -> float:
        nonlocal n_evals
        n_evals += 1
        v = objective(init.with_values(values))
        return float(v) if np.isfinite(v) else np.inf

    x = init.values.copy()
    f = fun(x)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the initial parameters")

    dim = x.shape[0]
    h_inv = np.eye(dim)
    grad = finite_difference_gradient(fun, x, fd_step)
    best_x, best_f = x.copy(), f
    window: deque[float] = deque([f], maxlen=STALL_WINDOW + 1)
    converged = False
    n_iters = 0

    for n_iters in range(1, max_iters + 1):
        direction = -h_inv @ grad
        slope = float(grad @ direction)
        if slope >= 0.0:
            h_inv = np.eye(dim)
            direction = -grad
            slope = float(grad @ direction)
        if slope == 0.0:
            converged = True
            break

        step = 1.0
        f_new = np.inf
        accepted = False
        for _ in range(50):
            f_new = fun(x + step * direction)
            if f_new <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # No descent at any step length: at a numerical optimum.
            converged = True
            break

        x_new = x + step * direction
        grad_new = finite_difference_gradient(fun, x_new, fd_step)
        s = x_new - x
        y_vec = grad_new - grad
        sy = float(s @ y_vec)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y_vec)):
            rho = 1.0 / sy
            i_mat = np.eye(dim)
            left = i_mat - rho * np.outer(s, y_vec)
            h_inv = left @ h_inv @ left.T + rho * np.outer(s, s)
        x, f, grad = x_new, f_new, grad_new
        if f < best_f:
            best_x, best_f = x.copy(), f

        window.append(f)
        if len(window) == STALL_WINDOW + 1:
            decrease = window[0] - window[-1]
            if decrease <= rel_tol * max(1.0, abs(window[0])):
                converged = True
                break

    return OptimizeResult(
        params=init.with_values(best_x),
        value=best_f,
        converged=converged,
        n_iters=n_iters,
        n_evals=n_evals,
    )
