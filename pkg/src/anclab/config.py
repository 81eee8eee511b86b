"""Flat ``section.key = value`` configuration files shared by all commands.

Blank lines and lines starting with ``#`` or ``;`` are ignored. Values keep
their line number so validation errors can point back into the file::

    scenario.duration = 10
    filter.mu = 0.01
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

_MISSING = object()


@dataclass
class Config:
    values: dict[str, str] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "Config":
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            if "=" not in line:
                raise ConfigError("expected 'key = value'", line=lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            if not key or any(c.isspace() for c in key):
                raise ConfigError("invalid key", line=lineno)
            if key in cfg.values:
                raise ConfigError("duplicate key", key=key, line=lineno)
            cfg.values[key] = value.split(" #")[0].strip()
            cfg.lines[key] = lineno
        return cfg

    @classmethod
    def load(cls, path) -> "Config":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def __contains__(self, key):
        return key in self.values

    def _convert(self, key, default, conv, kind):
        if key not in self.values:
            if default is _MISSING:
                raise ConfigError("missing required key", key=key)
            return default
        try:
            return conv(self.values[key])
        except ValueError:
            raise ConfigError(
                f"expected {kind}, got {self.values[key]!r}", key=key, line=self.lines[key]
            ) from None

    def get_str(self, key, default=_MISSING) -> str:
        return self._convert(key, default, str, "a string")

    def get_int(self, key, default=_MISSING) -> int:
        return self._convert(key, default, int, "an integer")

    def get_float(self, key, default=_MISSING) -> float:
        return self._convert(key, default, _parse_float, "a number")

    def check(self, key, ok: bool, message: str) -> None:
        """Raise a line-anchored :class:`ConfigError` unless ``ok``."""
        if not ok:
            raise ConfigError(message, key=key, line=self.lines.get(key))

    def section(self, prefix: str) -> dict[str, str]:
        p = prefix.rstrip(".") + "."
        return {k[len(p):]: v for k, v in self.values.items() if k.startswith(p)}

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.values.items()))


def _parse_float(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    value = float(t)
    if math.isnan(value):
        raise ValueError("nan")
    return value
