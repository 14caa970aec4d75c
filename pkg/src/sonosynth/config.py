"""Run configuration: flat dotted keys over the module config dataclasses.

A config file is plain text, one ``key = value`` per line (``#`` comments),
with keys like ``transducer.center_frequency_hz`` mirroring the config
dataclasses. Command-line ``--set key=value`` overrides win over file
values, which win over defaults. Unknown keys are rejected, never ignored.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .phantoms import GenerationConfig, RegionExtent
from .rf import TransducerConfig


class UsageError(Exception):
    """Bad invocation: unknown key, unparsable value, invalid flag."""


@dataclass(frozen=True)
class PipelineConfig:
    """Image-chain knobs not owned by the transducer."""

    dynamic_range_db: float = 50.0

    def __post_init__(self):
        if self.dynamic_range_db <= 0:
            raise ValueError("dynamic_range_db must be > 0")


@dataclass(frozen=True)
class RunConfig:
    """Everything a simulation run derives its outputs from (besides n/seed)."""

    phantom: GenerationConfig = dataclasses.field(default_factory=GenerationConfig)
    transducer: TransducerConfig = dataclasses.field(default_factory=TransducerConfig)
    pipeline: PipelineConfig = dataclasses.field(default_factory=PipelineConfig)


def _flatten(prefix: str, obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        key = f"{prefix}.{f.name}"
        if dataclasses.is_dataclass(value):
            out.update(_flatten(key, value))
        else:
            out[key] = value
    return out


def flatten_config(config: RunConfig) -> dict:
    """Full parameter echo as a flat {dotted key: value} mapping."""
    out = {}
    for section in ("phantom", "transducer", "pipeline"):
        out.update(_flatten(section, getattr(config, section)))
    return out


def documented_keys() -> dict:
    """Every valid dotted key with its default value."""
    return flatten_config(RunConfig())


def _parse_value(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise UsageError(
            f"cannot parse value {raw!r} for {key} (expected {type(default).__name__})"
        ) from None


# Dataclass-valued fields, keyed by field name (annotations are strings
# under `from __future__ import annotations`, so we map them explicitly).
_NESTED = {"extent": RegionExtent}


def _build_section(cls, prefix: str, values: dict):
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = f"{prefix}.{f.name}"
        if f.name in _NESTED:
            if any(k.startswith(key + ".") for k in values):
                kwargs[f.name] = _build_section(_NESTED[f.name], key, values)
        elif key in values:
            kwargs[f.name] = values[key]
    return cls(**kwargs)


def _unflatten(values: dict) -> RunConfig:
    return RunConfig(
        phantom=_build_section(GenerationConfig, "phantom", values),
        transducer=_build_section(TransducerConfig, "transducer", values),
        pipeline=_build_section(PipelineConfig, "pipeline", values),
    )


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines into a raw {key: str} mapping."""
    raw = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def load_run_config(config_file=None, overrides: list[str] | None = None) -> RunConfig:
    """Assemble the run config from defaults, an optional file, and overrides.

    ``overrides`` are ``key=value`` strings as passed to ``--set``; they take
    precedence over file values.
    """
    known = documented_keys()
    raw: dict[str, str] = {}
    if config_file is not None:
        raw.update(parse_config_file(config_file))
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"override {item!r} must have the form key=value")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()

    values = {}
    for key, text in raw.items():
        if key not in known:
            close = [k for k in known if k.split(".")[-1] == key.split(".")[-1]]
            hint = f" (did you mean {close[0]}?)" if close else ""
            raise UsageError(f"unknown config key {key!r}{hint}")
        values[key] = _parse_value(key, text, known[key])

    try:
        return _unflatten(values)
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
