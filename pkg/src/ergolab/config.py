"""INI-style experiment configs with typed accessors.

A config is a two-level mapping section -> key -> string. Values stay
strings until a handler asks for a type, so error messages can always name
the offending key. Command-line flags override by writing into the mapping
before handlers read from it.
"""

import configparser
import os

from .errors import ConfigError
from .maps import MapModel, make_map
from .potentials import Potential, make_potential

_MISSING = object()


class ExperimentConfig:
    def __init__(self, sections=None):
        self._sections: dict[str, dict[str, str]] = {}
        for name, kv in (sections or {}).items():
            self._sections[name] = {k: str(v) for k, v in kv.items()}

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keep key case
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"config file {path} does not parse: {exc}") from exc
        return cls({s: dict(parser[s]) for s in parser.sections()})

    def override(self, section: str, key: str, value) -> None:
        self._sections.setdefault(section, {})[key] = str(value)

    def drop(self, section: str, key: str) -> None:
        self._sections.get(section, {}).pop(key, None)

    def has(self, section: str, key: str) -> bool:
        return key in self._sections.get(section, {})

    def section(self, name: str) -> dict:
        return dict(self._sections.get(name, {}))

    def get(self, section: str, key: str, default=_MISSING) -> str:
        sec = self._sections.get(section, {})
        if key in sec:
            return sec[key]
        if default is _MISSING:
            raise ConfigError(f"missing config key {section}.{key}")
        return default

    def _typed(self, section, key, default, convert, what):
        raw = self.get(section, key, default)
        if not isinstance(raw, str):
            return raw
        try:
            return convert(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(
                f"config key {section}.{key} must be {what}, got {raw!r}"
            ) from exc

    def get_int(self, section, key, default=_MISSING) -> int:
        return self._typed(section, key, default, lambda s: int(s, 0), "an integer")

    def get_float(self, section, key, default=_MISSING) -> float:
        return self._typed(section, key, default, float, "a number")

    def get_bool(self, section, key, default=_MISSING) -> bool:
        def conv(s):
            low = s.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(low)

        return self._typed(section, key, default, conv, "a boolean")

    def get_floats(self, section, key, default=_MISSING) -> tuple:
        def conv(s):
            return tuple(float(tok) for tok in s.split(",") if tok.strip())

        return self._typed(section, key, default, conv, "a comma-separated list of numbers")

    def get_ints(self, section, key, default=_MISSING) -> tuple:
        def conv(s):
            return tuple(int(tok.strip(), 0) for tok in s.split(",") if tok.strip())

        return self._typed(section, key, default, conv, "a comma-separated list of integers")

    def as_dict(self) -> dict:
        """Sorted snapshot of the effective config, for report embedding."""
        return {
            s: {k: self._sections[s][k] for k in sorted(self._sections[s])}
            for s in sorted(self._sections)
        }


def build_map(cfg: ExperimentConfig) -> MapModel:
    """[map] family = <name>, every other key in the section is a parameter."""
    family = cfg.get("map", "family", "doubling")
    params = {}
    for key, raw in cfg.section("map").items():
        if key == "family":
            continue
        try:
            params[key] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"config key map.{key} must be a number, got {raw!r}") from exc
    return make_map(family, **params)


def build_potential(cfg: ExperimentConfig, map_model: MapModel) -> Potential:
    """[potential] name = <name>, remaining keys are parameters."""
    name = cfg.get("potential", "name", "zero")
    params = {}
    for key, raw in cfg.section("potential").items():
        if key == "name":
            continue
        try:
            params[key] = float(raw)
        except ValueError as exc:
            raise ConfigError(
                f"config key potential.{key} must be a number, got {raw!r}"
            ) from exc
    return make_potential(name, map_model, **params)
