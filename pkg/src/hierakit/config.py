"""Experiment configuration: JSON schema, per-command defaults, validation.

A configuration file is a JSON object with the blocks below; every block and
every key is optional and falls back to the command's defaults.  Unknown keys
are rejected.

.. code-block:: json

    {
      "model": {"n": 4, "L": 6.283185307179586, "N": 3, "kappa": 1, "beta": 0.5, "K": 3},
      "flow": {"dt": 0.001, "T": 0.5, "method": "rk4", "record_every": 10},
      "suite": ["antisymmetry", "jacobi"],
      "seed": 1234,
      "instances": 10,
      "output": "results",
      "tolerances": {"diagram": 1e-6}
    }

``model.n`` and ``model.N`` may be lists for commands that sweep over grid
sizes or particle numbers.  For ``verify-algebra`` and ``converge-bracket``,
``model.n`` is the dimension of the abstract one-particle space and ``model.K``
the largest observable support.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

__all__ = [
    "COMMANDS",
    "DEFAULT_TOLERANCES",
    "SUITE_GROUPS",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_tolerance",
]

COMMANDS = (
    "verify-algebra",
    "converge-bracket",
    "flow-equivalence",
    "morphism",
    "commuting-diagram",
    "nls-gp",
)

DEFAULT_TOLERANCES: dict[str, float] = {
    "coefficients": 1e-15,
    "algebra": 1e-10,
    "homomorphism": 1e-10,
    "leibniz": 1e-10,
    "casimir": 1e-10,
    "gradient": 1e-6,
    "slope_min": -1.1,
    "slope_max": -0.9,
    "flow_equivalence": 1e-10,
    "morphism": 1e-8,
    "pullback": 1e-12,
    "unitarity": 1e-10,
    "diagram": 1e-6,
    "rk4_order": 4.0,
    "order_band": 0.2,
    "hermitization": 1e-9,
    "mass": 1e-10,
    "energy_order": 2.0,
    "gp_order": 2.0,
}

SUITE_GROUPS: dict[str, tuple[str, ...]] = {
    "verify-algebra": ("coefficients", "antisymmetry", "jacobi", "homomorphism", "leibniz", "casimir", "gradient"),
    "converge-bracket": ("convergence",),
    "flow-equivalence": ("coefficients", "bbgky", "gp", "delta-limit", "zero"),
    "morphism": ("density-matrix", "reduced-density", "factorization", "pullback", "zero"),
    "commuting-diagram": ("unitarity", "diagram", "order"),
    "nls-gp": ("mass", "energy", "gp-residual"),
}

_MODEL_KEYS = {"n", "L", "N", "kappa", "beta", "K"}
_FLOW_KEYS = {"dt", "T", "method", "record_every"}
_TOP_KEYS = {"model", "flow", "suite", "seed", "instances", "output", "tolerances"}

_TWO_PI = 2 * math.pi

COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "verify-algebra": {
        "model": {"n": 2, "L": 2.0, "N": [2, 3, 4, 5, 6], "kappa": 1, "beta": 0.5, "K": 2},
        "flow": {"dt": 0.01, "T": 0.1, "method": "rk4", "record_every": 1},
        "instances": 3,
    },
    "converge-bracket": {
        "model": {"n": 2, "L": 2.0, "N": [8, 16, 32, 64], "kappa": 1, "beta": 0.5, "K": 2},
        "flow": {"dt": 0.01, "T": 0.1, "method": "rk4", "record_every": 1},
        "instances": 3,
    },
    "flow-equivalence": {
        "model": {"n": [4, 6], "L": _TWO_PI, "N": [2, 3], "kappa": 1, "beta": 0.5, "K": 3},
        "flow": {"dt": 0.01, "T": 0.1, "method": "rk4", "record_every": 1},
        "instances": 10,
    },
    "morphism": {
        "model": {"n": 6, "L": _TWO_PI, "N": 3, "kappa": 1, "beta": 0.5, "K": 2},
        "flow": {"dt": 0.01, "T": 0.1, "method": "rk4", "record_every": 1},
        "instances": 10,
    },
    "commuting-diagram": {
        "model": {"n": 4, "L": _TWO_PI, "N": 3, "kappa": 1, "beta": 0.5, "K": 3},
        "flow": {"dt": 1e-3, "T": 0.5, "method": "rk4", "record_every": 10},
        "instances": 1,
    },
    "nls-gp": {
        "model": {"n": 16, "L": _TWO_PI, "N": 2, "kappa": 1, "beta": 0.5, "K": 1},
        "flow": {"dt": 0.01, "T": 0.5, "method": "strang-split", "record_every": 1},
        "instances": 1,
    },
}

DEFAULT_SEED = 20240607


class ConfigError(ValueError):
    """Invalid configuration (unknown key, wrong type, out-of-range value)."""


def _as_int_list(value: Any, name: str) -> list[int]:
    items = value if isinstance(value, list) else [value]
    out = []
    for v in items:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{name} must be an integer or a list of integers, got {v!r}")
        out.append(v)
    if not out:
        raise ConfigError(f"{name} must not be empty")
    return out


def _as_float(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _reject_unknown(block: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


@dataclass(frozen=True)
class ModelBlock:
    n: tuple[int, ...]
    L: float
    N: tuple[int, ...]
    kappa: float
    beta: float
    K: int

    @property
    def n0(self) -> int:
        return self.n[0]

    @property
    def N0(self) -> int:
        return self.N[0]


@dataclass(frozen=True)
class FlowBlock:
    dt: float
    T: float
    method: str
    record_every: int


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration of one command run."""

    command: str
    model: ModelBlock
    flow: FlowBlock
    suite: tuple[str, ...]
    seed: int
    instances: int
    output: str | None
    tolerances: dict[str, float] = field(default_factory=dict)

    def tol(self, name: str) -> float:
        return self.tolerances[name]

    def wants(self, group: str) -> bool:
        return group in self.suite

    def as_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "model": {
                "n": list(self.model.n),
                "L": self.model.L,
                "N": list(self.model.N),
                "kappa": self.model.kappa,
                "beta": self.model.beta,
                "K": self.model.K,
            },
            "flow": {
                "dt": self.flow.dt,
                "T": self.flow.T,
                "method": self.flow.method,
                "record_every": self.flow.record_every,
            },
            "suite": list(self.suite),
            "seed": self.seed,
            "instances": self.instances,
            "output": self.output,
            "tolerances": dict(sorted(self.tolerances.items())),
        }


def parse_tolerance(text: str) -> tuple[str, float]:
    """Parse a ``name=value`` override."""
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise ConfigError(f"tolerance override must look like name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError as exc:
        raise ConfigError(f"tolerance {name!r} needs a numeric value, got {value!r}") from exc


def load_config(
    command: str,
    source: str | Path | Mapping[str, Any] | None = None,
    *,
    seed: int | None = None,
    output: str | None = None,
    tolerances: Mapping[str, float] | None = None,
    suite: list[str] | None = None,
) -> ExperimentConfig:
    """Merge command defaults, a JSON file or mapping, and explicit overrides."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    if source is None:
        raw: dict[str, Any] = {}
    elif isinstance(source, Mapping):
        raw = copy.deepcopy(dict(source))
    else:
        try:
            raw = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "configuration")

    defaults = COMMAND_DEFAULTS[command]
    model_raw = raw.get("model", {})
    flow_raw = raw.get("flow", {})
    if not isinstance(model_raw, dict) or not isinstance(flow_raw, dict):
        raise ConfigError("model and flow blocks must be JSON objects")
    _reject_unknown(model_raw, _MODEL_KEYS, "model")
    _reject_unknown(flow_raw, _FLOW_KEYS, "flow")
    m = {**defaults["model"], **model_raw}
    f = {**defaults["flow"], **flow_raw}

    n = _as_int_list(m["n"], "model.n")
    N = _as_int_list(m["N"], "model.N")
    if any(v < 1 for v in n) or any(v < 1 for v in N):
        raise ConfigError("model.n and model.N must be positive")
    kappa = _as_float(m["kappa"], "model.kappa")
    if kappa not in (1.0, -1.0):
        raise ConfigError("model.kappa must be +1 or -1")
    beta = _as_float(m["beta"], "model.beta")
    if not 0 <= beta < 1:
        raise ConfigError("model.beta must lie in [0, 1)")
    L = _as_float(m["L"], "model.L")
    if L <= 0:
        raise ConfigError("model.L must be positive")
    K = _as_int_list(m["K"], "model.K")
    if len(K) != 1 or K[0] < 1:
        raise ConfigError("model.K must be a single positive integer")
    model = ModelBlock(tuple(n), L, tuple(N), kappa, beta, K[0])

    dt, T = _as_float(f["dt"], "flow.dt"), _as_float(f["T"], "flow.T")
    if dt <= 0 or T < dt:
        raise ConfigError("flow needs dt > 0 and T >= dt")
    if f["method"] not in ("rk4", "exact-exponential", "strang-split"):
        raise ConfigError(f"flow.method {f['method']!r} not recognised")
    record = _as_int_list(f["record_every"], "flow.record_every")
    if len(record) != 1 or record[0] < 1:
        raise ConfigError("flow.record_every must be a positive integer")
    flow = FlowBlock(dt, T, str(f["method"]), record[0])

    groups = SUITE_GROUPS[command]
    chosen = suite if suite is not None else raw.get("suite")
    if chosen is None:
        chosen = list(groups)
    if not isinstance(chosen, list) or not all(isinstance(s, str) for s in chosen):
        raise ConfigError("suite must be a list of group names")
    bad = sorted(set(chosen) - set(groups))
    if bad:
        raise ConfigError(f"unknown suite group(s) for {command}: {', '.join(bad)}; available: {', '.join(groups)}")

    seed_value = seed if seed is not None else raw.get("seed", DEFAULT_SEED)
    if isinstance(seed_value, bool) or not isinstance(seed_value, int) or seed_value < 0:
        raise ConfigError("seed must be a non-negative integer")

    instances = raw.get("instances", defaults["instances"])
    if isinstance(instances, bool) or not isinstance(instances, int) or instances < 1:
        raise ConfigError("instances must be a positive integer")

    out = output if output is not None else raw.get("output")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output must be a path string")

    tol = dict(DEFAULT_TOLERANCES)
    tol_raw = raw.get("tolerances", {})
    if not isinstance(tol_raw, dict):
        raise ConfigError("tolerances must be a JSON object")
    for source_tol in (tol_raw, tolerances or {}):
        for name, value in source_tol.items():
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {name!r}; known: {', '.join(sorted(DEFAULT_TOLERANCES))}")
            tol[name] = _as_float(value, f"tolerances.{name}")

    return ExperimentConfig(command, model, flow, tuple(chosen), seed_value, instances, out, tol)
