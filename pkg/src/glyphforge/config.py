"""Run configuration: TOML or JSON file, GLYPHFORGE_CONFIG env var.

Every CLI flag has a config-file equivalent; precedence is
CLI > config > built-in default.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError

ENV_VAR = "GLYPHFORGE_CONFIG"

DEFAULTS: dict[str, dict[str, Any]] = {
    "segment": {
        "min_gap": 2,
        "band_top": 0.15,
        "band_bottom": 0.85,
        "bridge_exception": True,
        "min_glyph_width": 2,
        "binarize": "otsu",
        "invert": False,
    },
    "classify": {"tau": 0.90, "side": 32, "mirror_detect": False},
    "build": {"seed": 0, "template": None, "descriptions": None, "columns": 8, "cell_px": 64, "label_px": 12},
    "eval": {"backend": "mock", "concurrency": 1, "retries": 3, "backoff": 0.25, "timeout": 60.0, "seed": 0},
    "review": {"bind": "127.0.0.1:8000"},
    "backends": {"mock": {"type": "mock", "mode": "oracle"}},
}


def load_config(path: str | Path | None = None) -> dict:
    """Load the config file named explicitly or via GLYPHFORGE_CONFIG."""
    if path is None:
        env = os.environ.get(ENV_VAR)
        if not env:
            return {}
        path = env
    path = Path(path)
    if not path.is_file():
        raise ValidationError("config-not-found", f"config file {path} does not exist")
    if path.suffix == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    raise ValidationError("bad-config", f"config must be .toml or .json, got {path.name}")


def resolve(config: dict, section: str, key: str, cli_value: Any = None) -> Any:
    """CLI beats config beats default; None marks an unset CLI flag."""
    if cli_value is not None:
        return cli_value
    if section in config and key in config[section]:
        return config[section][key]
    return DEFAULTS.get(section, {}).get(key)
