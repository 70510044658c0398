"""Flat ``key = value`` configuration files.

Keys are CLI flag names without the leading dashes (``p-max`` and ``p_max``
are the same key). Blank lines and lines starting with ``#`` are ignored.
"""

from pathlib import Path


class ConfigError(ValueError):
    pass


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def parse_config(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config(path) -> dict:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def merge(defaults: dict, config: dict, cli: dict) -> dict:
    """Layer settings: defaults, then config file, then explicit CLI flags."""
    unknown = set(config) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    merged = dict(defaults)
    merged.update(config)
    merged.update({k: v for k, v in cli.items() if v is not None})
    return merged
