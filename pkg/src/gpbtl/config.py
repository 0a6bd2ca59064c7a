"""Experiment configuration files: strict schema, defaults, provenance hash.

Configurations are JSON objects validated completely before any
computation starts; unknown keys are errors, as are physically invalid
parameters. The resolved configuration has a canonical serialization whose
SHA-256 hash is recorded in every output file.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import FAMILIES, KernelSpec
from .synthesis import SynthesisConfig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "kernel_to_config",
    "kernel_from_config",
    "load_config",
    "parse_config",
]

KINDS = ("sweep-sigma", "sweep-a", "kernel-grid", "jura")

# Desk-scale defaults; sweep grids are configurable via the "sweep" section.
_DEFAULT_SIGMA_VALUES = tuple(float(v) for v in np.logspace(-2.0, 2.0, 9))
_DEFAULT_WEIGHT_VALUES = tuple(float(v) for v in np.linspace(-2.0, 2.0, 9))


class ConfigError(ValueError):
    """A configuration file failed validation."""


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _get_number(section: dict, key: str, where: str, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key {key!r} in {where}")
        return default
    value = section[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ConfigError(f"{where}.{key} must be a finite number, got {value!r}")
    return float(value)


def kernel_to_config(k: KernelSpec) -> dict:
    """Serialize a kernel spec to the configuration dictionary format."""
    out: dict = {"family": k.family, "signal_variance": k.signal_variance}
    if k.is_ard:
        out["length_scale_sq"] = [float(v) for v in np.asarray(k.length_scale_sq)]
    else:
        out["length_scale_sq"] = float(k.length_scale_sq)
    if k.family == "RationalQuadratic":
        out["alpha"] = k.alpha
    if k.family == "Polynomial":
        out["offset"] = k.offset
        out["degree"] = k.degree
    return out


def kernel_from_config(section: dict, where: str = "kernel") -> KernelSpec:
    """Parse and validate a kernel spec from its configuration dictionary."""
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    _require_keys(section, {"family", "signal_variance", "length_scale_sq", "alpha", "offset", "degree"}, where)
    family = section.get("family")
    if family not in FAMILIES:
        raise ConfigError(f"{where}.family must be one of {FAMILIES}, got {family!r}")
    kwargs: dict = {"family": family}
    if "signal_variance" in section:
        kwargs["signal_variance"] = _get_number(section, "signal_variance", where)
    if "length_scale_sq" in section:
        ls = section["length_scale_sq"]
        if isinstance(ls, list):
            kwargs["length_scale_sq"] = np.array([_get_number({"v": v}, "v", where) for v in ls])
        else:
            kwargs["length_scale_sq"] = _get_number(section, "length_scale_sq", where)
    if "alpha" in section:
        kwargs["alpha"] = _get_number(section, "alpha", where)
    if "offset" in section:
        kwargs["offset"] = _get_number(section, "offset", where)
    if "degree" in section:
        degree = section["degree"]
        if not isinstance(degree, int) or isinstance(degree, bool):
            raise ConfigError(f"{where}.degree must be an integer, got {degree!r}")
        kwargs["degree"] = degree
    try:
        return KernelSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


_SYNTHESIS_KEYS = {
    "source_noise",
    "target_noise",
    "source_weight",
    "target_weight",
    "latent_kernel",
    "n_train",
    "input_range",
    "n_test",
    "test_range",
}


def _parse_range(section: dict, key: str, where: str, default: tuple[float, float]) -> tuple[float, float]:
    if key not in section:
        return default
    raw = section[key]
    if not (isinstance(raw, list) and len(raw) == 2):
        raise ConfigError(f"{where}.{key} must be a two-element list")
    lo = _get_number({"v": raw[0]}, "v", where)
    hi = _get_number({"v": raw[1]}, "v", where)
    if not hi > lo:
        raise ConfigError(f"{where}.{key} must be increasing, got {raw}")
    return (lo, hi)


def _parse_synthesis(section: dict, seed: int) -> SynthesisConfig:
    where = "synthesis"
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    _require_keys(section, _SYNTHESIS_KEYS, where)
    source_noise = _get_number(section, "source_noise", where, default=1.0)
    target_noise = _get_number(section, "target_noise", where, default=1.0)
    if source_noise < 0.0 or target_noise < 0.0:
        raise ConfigError("noise variances must be nonnegative")
    n_train = section.get("n_train", 64)
    n_test = section.get("n_test", 200)
    for name, value in (("n_train", n_train), ("n_test", n_test)):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ConfigError(f"{where}.{name} must be a positive integer, got {value!r}")
    kernel = kernel_from_config(
        section.get("latent_kernel", {"family": "SquaredExponential", "signal_variance": 2.0, "length_scale_sq": 0.4}),
        f"{where}.latent_kernel",
    )
    return SynthesisConfig(
        source_noise=source_noise,
        target_noise=target_noise,
        source_weight=_get_number(section, "source_weight", where, default=0.8),
        target_weight=_get_number(section, "target_weight", where, default=1.0),
        latent_kernel=kernel,
        n_train=n_train,
        input_range=_parse_range(section, "input_range", where, (-3.5, 3.5)),
        n_test=n_test,
        test_range=_parse_range(section, "test_range", where, (-5.0, 5.0)),
        seed=seed,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated experiment description."""

    kind: str
    seed: int
    trials: int
    output_dir: str
    threads: int
    synthesis: SynthesisConfig
    sweep_values: tuple[float, ...] = ()
    grid_kernel: KernelSpec | None = None
    grid_families: tuple[str, ...] = ()
    jura_train_path: str = ""
    jura_holdout_path: str = ""
    jura_restarts: int = 10
    resolved: dict = field(default_factory=dict, compare=False)

    def config_hash(self) -> str:
        """SHA-256 of the canonical resolved configuration.

        The output directory and thread cap identify the run environment,
        not the experiment, and are excluded so reruns into different
        directories hash identically.
        """
        hashed = {k: v for k, v in self.resolved.items() if k not in ("output_dir", "threads")}
        canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    @property
    def sweep_variable(self) -> str:
        if self.kind == "sweep-sigma":
            return "source_noise"
        if self.kind == "sweep-a":
            return "source_weight"
        raise ConfigError(f"config of kind {self.kind!r} has no sweep variable")


def parse_config(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate a configuration dictionary, applying CLI overrides first."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be an object")
    allowed = {"kind", "seed", "trials", "output_dir", "threads", "synthesis", "sweep", "grid", "jura"}
    _require_keys(raw, allowed, "config")
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    kind = merged.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    seed = merged.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    trials = merged.get("trials", 200)
    if not isinstance(trials, int) or isinstance(trials, bool) or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}")
    threads = merged.get("threads", 1)
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        raise ConfigError(f"threads must be a positive integer, got {threads!r}")
    output_dir = merged.get("output_dir", "results")
    if not isinstance(output_dir, str):
        raise ConfigError(f"output_dir must be a string, got {output_dir!r}")

    synthesis = _parse_synthesis(merged.get("synthesis", {}), seed)

    sweep_values: tuple[float, ...] = ()
    if kind in ("sweep-sigma", "sweep-a"):
        section = merged.get("sweep", {})
        if not isinstance(section, dict):
            raise ConfigError("sweep must be an object")
        _require_keys(section, {"values"}, "sweep")
        if "values" in section:
            values = section["values"]
            if not isinstance(values, list) or not values:
                raise ConfigError("sweep.values must be a non-empty list")
            sweep_values = tuple(_get_number({"v": v}, "v", "sweep.values") for v in values)
        else:
            sweep_values = _DEFAULT_SIGMA_VALUES if kind == "sweep-sigma" else _DEFAULT_WEIGHT_VALUES
        if kind == "sweep-sigma" and any(v < 0.0 for v in sweep_values):
            raise ConfigError("sweep.values for a noise-variance sweep must be nonnegative")
    elif "sweep" in merged:
        raise ConfigError(f"sweep section is not valid for kind {kind!r}")

    grid_kernel = None
    grid_families: tuple[str, ...] = ()
    if kind == "kernel-grid":
        section = merged.get("grid", {})
        if not isinstance(section, dict):
            raise ConfigError("grid must be an object")
        _require_keys(section, {"kernel_params", "families"}, "grid")
        grid_kernel = kernel_from_config(
            section.get(
                "kernel_params",
                {"family": "SquaredExponential", "signal_variance": 1.0, "length_scale_sq": 0.2,
                 "alpha": 1.0},
            ),
            "grid.kernel_params",
        )
        families = section.get("families", list(FAMILIES))
        if not isinstance(families, list) or not families:
            raise ConfigError("grid.families must be a non-empty list")
        for fam in families:
            if fam not in FAMILIES:
                raise ConfigError(f"grid.families entry {fam!r} is not one of {FAMILIES}")
        grid_families = tuple(families)
    elif "grid" in merged:
        raise ConfigError(f"grid section is not valid for kind {kind!r}")

    jura_train = jura_holdout = ""
    jura_restarts = 10
    if kind == "jura":
        section = merged.get("jura", {})
        if not isinstance(section, dict):
            raise ConfigError("jura must be an object")
        _require_keys(section, {"train_path", "holdout_path", "restarts"}, "jura")
        jura_train = section.get("train_path", "")
        jura_holdout = section.get("holdout_path", "")
        if not jura_train or not jura_holdout:
            raise ConfigError("jura.train_path and jura.holdout_path are required")
        jura_restarts = section.get("restarts", 10)
        if not isinstance(jura_restarts, int) or isinstance(jura_restarts, bool) or jura_restarts < 1:
            raise ConfigError(f"jura.restarts must be a positive integer, got {jura_restarts!r}")
    elif "jura" in merged:
        raise ConfigError(f"jura section is not valid for kind {kind!r}")

    resolved = {
        "kind": kind,
        "seed": seed,
        "trials": trials,
        "threads": threads,
        "output_dir": output_dir,
        "synthesis": {
            "source_noise": synthesis.source_noise,
            "target_noise": synthesis.target_noise,
            "source_weight": synthesis.source_weight,
            "target_weight": synthesis.target_weight,
            "latent_kernel": kernel_to_config(synthesis.latent_kernel),
            "n_train": synthesis.n_train,
            "input_range": list(synthesis.input_range),
            "n_test": synthesis.n_test,
            "test_range": list(synthesis.test_range),
        },
    }
    if sweep_values:
        resolved["sweep"] = {"values": list(sweep_values)}
    if grid_kernel is not None:
        resolved["grid"] = {"kernel_params": kernel_to_config(grid_kernel), "families": list(grid_families)}
    if kind == "jura":
        resolved["jura"] = {
            "train_path": jura_train,
            "holdout_path": jura_holdout,
            "restarts": jura_restarts,
        }

    return ExperimentConfig(
        kind=kind,
        seed=seed,
        trials=trials,
        output_dir=output_dir,
        threads=threads,
        synthesis=synthesis,
        sweep_values=sweep_values,
        grid_kernel=grid_kernel,
        grid_families=grid_families,
        jura_train_path=jura_train,
        jura_holdout_path=jura_holdout,
        jura_restarts=jura_restarts,
        resolved=resolved,
    )


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read, parse, and validate a configuration file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"configuration file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration file {p} is not valid JSON: {exc}") from exc
    return parse_config(raw, overrides)
