from __future__ import annotations

import json
import os
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .catalog import CHANNEL_ALIASES, CHANNELS, PURE_STATES, STATES, CatalogError

MODES = ("twirl-check", "decouple", "rate-region", "ent-gen", "entropy")
CONFIG_DIR_ENV = "DECOUPLER_CONFIG_DIR"
OUT_DIR_ENV = "DECOUPLER_OUT_DIR"
DEFAULT_OUT_DIR = ".decoupler/out"

_REQUIRED = {
    "twirl-check": (),
    "decouple": ("channel", "state"),
    "rate-region": ("channel",),
    "ent-gen": ("channel", "epsilon"),
    "entropy": ("state",),
}
_ALLOWED = {
    "twirl-check": {"mode", "channel", "k", "dims", "samples", "seed"},
    "decouple": {"mode", "channel", "state", "delta", "samples", "seed", "include_residual"},
    "rate-region": {
        "mode", "channel", "delta", "e_a", "e_b", "omega_in", "delta_in",
        "psi", "phi", "samples", "seed",
    },
    "ent-gen": {"mode", "channel", "delta", "epsilon", "omega_in", "delta_in"},
    "entropy": {"mode", "state", "dims", "cond", "delta"},
}
_DEFAULT_SAMPLES = {"twirl-check": 10000, "decouple": 1000, "rate-region": 1000}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    channel: Any = None
    state: Any = None
    delta: float = 0.0
    epsilon: float | None = None
    samples: int = 1000
    seed: int = 0
    k: int | None = None
    dims: tuple[int, ...] = ()
    e_a: float = 0.0
    e_b: float = 0.0
    cond: tuple[str, ...] = ("R",)
    omega_in: Any = "max-entangled"
    delta_in: Any = "max-entangled"
    psi: Any = None
    phi: Any = None
    include_residual: bool = False
    out_dir: Path = field(default_factory=lambda: Path(DEFAULT_OUT_DIR))

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        samples: int | None = None,
        out_dir: str | Path | None = None,
    ) -> "ExperimentConfig":
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = _integer({"seed": seed}, "seed", 0, default=0)
        if samples is not None:
            changes["samples"] = _integer({"samples": samples}, "samples", 2, default=2)
        if out_dir is not None:
            changes["out_dir"] = Path(out_dir)
        return replace(self, **changes)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _integer(raw: Mapping[str, Any], key: str, minimum: int, *, default: int | None) -> int | None:
    value = raw.get(key, default)
    if value is None:
        return None
    if not _is_int(value) or value < minimum:
        raise ConfigError(f"Config field {key!r} must be an integer >= {minimum}, got {value!r}")
    return value


def _real(
    raw: Mapping[str, Any],
    key: str,
    *,
    default: float | None,
    low: float,
    high: float,
    high_open: bool = False,
    low_open: bool = False,
) -> float | None:
    value = raw.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Config field {key!r} must be a number, got {value!r}")
    too_low = value <= low if low_open else value < low
    too_high = value >= high if high_open else value > high
    if too_low or too_high:
        left = "(" if low_open else "["
        right = ")" if high_open else "]"
        raise ConfigError(
            f"Config field {key!r} must lie in {left}{low}, {high}{right}, got {value!r}"
        )
    return float(value)


def _check_builtin(raw: Mapping[str, Any], key: str, known: Mapping[str, Any] | tuple[str, ...]) -> None:
    spec = raw.get(key)
    if spec is None:
        return
    if isinstance(spec, Mapping):
        if key == "channel" and "kraus" in spec:
            return
        if key == "state" and "matrix" in spec:
            return
        if key in {"omega_in", "delta_in", "psi", "phi"} and "amplitudes" in spec:
            return
        name = spec.get("name")
    else:
        name = spec
    if not isinstance(name, str):
        raise ConfigError(f"Config field {key!r} must be a builtin name or an object")
    if name not in known:
        kind = "channel" if key == "channel" else "state"
        raise ConfigError(f"Config field {key!r}: {CatalogError(kind, name, list(known))}")


def parse_config(raw: Any, *, environ: Mapping[str, str] | None = None) -> ExperimentConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("Experiment config must be a JSON object")
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"Config field 'mode' must be one of {', '.join(MODES)}, got {mode!r}")
    unknown = sorted(set(raw).difference(_ALLOWED[mode]))
    if unknown:
        raise ConfigError(f"Config fields {unknown} are not used by mode {mode!r}")
    for key in _REQUIRED[mode]:
        if raw.get(key) is None:
            raise ConfigError(f"Config field {key!r} is required for mode {mode!r}")

    _check_builtin(raw, "channel", {**CHANNELS, **CHANNEL_ALIASES})
    _check_builtin(raw, "state", STATES)
    for key in ("omega_in", "delta_in", "psi", "phi"):
        _check_builtin(raw, key, PURE_STATES)

    dims = raw.get("dims", [])
    if not isinstance(dims, list) or not all(_is_int(dim) and dim >= 1 for dim in dims):
        raise ConfigError(f"Config field 'dims' must be a list of positive integers, got {dims!r}")
    k = _integer(raw, "k", 1, default=None)
    if mode == "twirl-check":
        if raw.get("channel") is None and not dims and k is not None:
            dims = [2] * k
        if raw.get("channel") is None and not dims:
            raise ConfigError("Config field 'dims' is required for mode 'twirl-check' without a channel")
        if k is not None and dims and k != len(dims):
            raise ConfigError(f"Config field 'k' is {k} but 'dims' lists {len(dims)} senders")

    cond = raw.get("cond", ["R"])
    if not isinstance(cond, list) or not all(isinstance(name, str) and name for name in cond):
        raise ConfigError(f"Config field 'cond' must be a list of system names, got {cond!r}")

    include_residual = raw.get("include_residual", False)
    if not isinstance(include_residual, bool):
        raise ConfigError("Config field 'include_residual' must be true or false")

    environ = os.environ if environ is None else environ
    return ExperimentConfig(
        mode=mode,
        channel=raw.get("channel"),
        state=raw.get("state"),
        delta=_real(raw, "delta", default=0.0, low=0.0, high=1.0, high_open=True),
        epsilon=_real(raw, "epsilon", default=None, low=0.0, high=1.0, low_open=True),
        samples=_integer(raw, "samples", 2, default=_DEFAULT_SAMPLES.get(mode, 1000)),
        seed=_integer(raw, "seed", 0, default=0),
        k=k,
        dims=tuple(dims),
        e_a=_real(raw, "e_a", default=0.0, low=0.0, high=float("inf")),
        e_b=_real(raw, "e_b", default=0.0, low=0.0, high=float("inf")),
        cond=tuple(cond),
        omega_in=raw.get("omega_in", "max-entangled"),
        delta_in=raw.get("delta_in", "max-entangled"),
        psi=raw.get("psi"),
        phi=raw.get("phi"),
        include_residual=include_residual,
        out_dir=Path(environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR),
    )


def resolve_config_path(path: str | Path, environ: Mapping[str, str] | None = None) -> Path:
    """Relative paths that do not exist are looked up under ``DECOUPLER_CONFIG_DIR``."""
    candidate = Path(path)
    environ = os.environ if environ is None else environ
    base = environ.get(CONFIG_DIR_ENV)
    if not candidate.is_absolute() and not candidate.exists() and base:
        return Path(base) / candidate
    return candidate


def load_config(
    path: str | Path,
    environ: Mapping[str, str] | None = None,
    *,
    mode: str | None = None,
) -> ExperimentConfig:
    """Read a JSON config; ``mode`` fills a missing mode field and must match a present one."""
    resolved = resolve_config_path(path, environ)
    try:
        payload = json.loads(resolved.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file {str(resolved)!r} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {str(resolved)!r} is not valid JSON: {exc}") from exc
    if mode is not None and isinstance(payload, dict):
        declared = payload.setdefault("mode", mode)
        if declared != mode:
            raise ConfigError(f"Config field 'mode' is {declared!r} but the command is {mode!r}")
    return parse_config(payload, environ=environ)
