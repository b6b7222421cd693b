"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Model parameters use the keys
``n``, ``alpha``, ``pi_plus``, ``pi_minus`` and ``link`` (``mean`` or
``harmonic``); the CLI accepts any :class:`RunConfig` field.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import get_type_hints

from .errors import IoFailure, ValidationError
from .model import Link, ModelParams, validate_params


class ConfigError(ValidationError):
    code = "ConfigError"


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def read_kv(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror or exc}") from exc
    return parse_kv(text, str(path))


def params_to_text(params: ModelParams) -> str:
    return "".join(f"{k} = {_render(v)}\n" for k, v in params.to_dict().items())


def params_from_text(text: str) -> ModelParams:
    data = parse_kv(text)
    return validate_params({k: data.get(k) for k in ("n", "alpha", "pi_plus", "pi_minus", "link")})


def _render(value) -> str:
    if isinstance(value, Link):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    return str(value)


@dataclass
class RunConfig:
    command: str | None = None
    n: int | None = None
    alpha: float | None = None
    alpha_high: float | None = None
    pi_plus: float | None = None
    pi_minus: float | None = None
    link: str = "mean"
    link_high: str | None = None
    k: int = 10_000
    l: int = 100
    burn_in: int | None = None
    p0: float = 0.5
    seed: int = 0
    workers: int = 1
    tol: float = 1e-6
    grid_step: float = 0.02
    out: str | None = None
    out_dir: str | None = None
    dump_chain: str | None = None
    diagnostics: bool = False
    csv: bool = False
    inputs: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None or (f.name == "inputs" and not value):
                continue
            lines.append(f"{f.name} = {_render(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        hints = get_type_hints(cls)
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            kwargs[key] = _coerce(hints[key], value, key)
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_mapping(parse_kv(text))

    def merged(self, overrides: dict) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def model_params(self, alpha: float | None = None, link: str | None = None) -> ModelParams:
        return validate_params(n=self.n, alpha=self.alpha if alpha is None else alpha,
                               pi_plus=self.pi_plus, pi_minus=self.pi_minus,
                               link=self.link if link is None else link)


def _coerce(hint, value, key):
    if not isinstance(value, str):
        return value
    text = value.strip()
    if hint is bool:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if getattr(hint, "__origin__", None) is list:
        return [part.strip() for part in text.split(",") if part.strip()]
    args = getattr(hint, "__args__", ())
    base = next((a for a in args if a is not type(None)), hint)
    try:
        if base is int:
            if text.lstrip("+-").isdigit():
                return int(text)
            as_float = float(text)
            if not as_float.is_integer():
                raise ValueError(text)
            return int(as_float)
        if base is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return text
