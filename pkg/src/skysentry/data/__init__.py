"""Bundled scenario and config files, addressable as builtin:<name>."""

from importlib import resources
from pathlib import Path

from ..errors import ConfigError


def _bundled(kind: str, name: str) -> Path:
    root = resources.files(__package__)
    candidate = root / kind / f"{name}.json"
    try:
        with resources.as_file(candidate) as path:
            if not path.exists():
                raise FileNotFoundError
            return Path(path)
    except FileNotFoundError:
        available = sorted(p.name[:-5] for p in (root / kind).iterdir() if p.name.endswith(".json"))
        raise ConfigError(f"no builtin {kind[:-1]} named {name!r}; available: {available}") from None


def builtin_scenario(name: str) -> Path:
    return _bundled("scenarios", name)


def builtin_config(name: str) -> Path:
    return _bundled("configs", name)
