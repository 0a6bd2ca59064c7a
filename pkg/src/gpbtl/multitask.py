"""Fully modelled multitask baseline: one global GP over both raw datasets.

A single coregionalized prior is conditioned on the stacked source and
target outputs with independent per-task noise. Structurally this is the
same update as the transfer posterior with the source pseudo-observation
block replaced by raw data and isotropic noise.
"""

from __future__ import annotations

import numpy as np

from .kernels import CoregionalizationSpec, KernelSpec
from .regression import TaskData
from .transfer import JointPosterior, _blockwise_posterior

__all__ = ["icm_posterior"]


def icm_posterior(
    coreg: CoregionalizationSpec,
    latent_kernel: KernelSpec,
    source: TaskData,
    target: TaskData,
    test,
) -> JointPosterior:
    """Condition the coupled prior on both raw datasets jointly."""
    if source.n_inputs != target.n_inputs:
        raise ValueError(f"source has {source.n_inputs} input columns, target has {target.n_inputs}")
    return _blockwise_posterior(
        coreg,
        latent_kernel,
        source.inputs,
        source.outputs,
        source.noise_variance * np.eye(source.n),
        target,
        target.noise_variance,
        test,
    )
