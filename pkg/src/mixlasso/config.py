"""Flat key = value configuration with command-line overrides.

Config files are plain text, one ``key = value`` per line, ``#`` comments
allowed; the same format is what run manifests are written in, so a
manifest is itself a valid config.  Resolution order: built-in defaults,
then the config file, then explicit flags.
"""

from __future__ import annotations

from pathlib import Path

from .errors import UsageError

# keys that appear in manifests but carry no configuration
_MANIFEST_ONLY = ("command", "version")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise UsageError(f"{source}:{lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), source=str(path))


def resolve(defaults: dict[str, str], file_cfg: dict[str, str],
            flag_cfg: dict[str, str], known: set[str]) -> dict[str, str]:
    """Merge the three layers; unknown file keys warn via the return value.

    Returns the resolved mapping restricted to known keys.  Manifest
    bookkeeping keys (command, version, digest_*) pass through silently.
    """
    unknown = [k for k in file_cfg
               if k not in known and k not in _MANIFEST_ONLY
               and not k.startswith("digest_")]
    merged = dict(defaults)
    merged.update({k: v for k, v in file_cfg.items() if k in known})
    merged.update({k: v for k, v in flag_cfg.items() if v is not None})
    merged["_unknown_keys"] = ",".join(unknown)
    return merged


def as_int(cfg: dict[str, str], key: str) -> int:
    try:
        return int(cfg[key])
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{key} must be an integer, got {cfg.get(key)!r}") from exc


def as_float(cfg: dict[str, str], key: str) -> float:
    try:
        return float(cfg[key])
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{key} must be a number, got {cfg.get(key)!r}") from exc


def as_float_list(cfg: dict[str, str], key: str) -> list[float] | None:
    raw = cfg.get(key, "").strip()
    if not raw:
        return None
    try:
        return [float(tok) for tok in raw.split(",")]
    except ValueError as exc:
        raise UsageError(f"{key} must be comma-separated numbers") from exc
