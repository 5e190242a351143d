# -*- coding: utf-8 -*-
"""
utils.py

Small helpers shared across the package: logging setup, seeded random
generators, deterministic JSON output and overwrite protection for CLI outputs.
"""

import json
import logging
import sys
from pathlib import Path

import numpy as np

from fovregress.utils.exceptions import InputError

LOG_FORMAT = '%(asctime)s %(levelname)s %(message)s'


def setup_logging(level="INFO"):
    """
    Configure the root logger once for command-line use.

    Args:
        level (str | int): Logging level name or number.
    """
    if isinstance(level, str):
        level = getattr(logging, level.upper(), None)
        if not isinstance(level, int):
            raise InputError(f"Unknown log level: {level}")
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stdout, force=True)


def make_rng(seed, *keys):
    """
    Build an independent numpy Generator from a seed and optional integer keys.

    The same (seed, keys) always yields the same stream, and different keys give
    statistically independent streams, so callers never share a global RNG.

    Args:
        seed (int): Base seed.
        *keys (int): Extra entropy words (bucket index, epoch, ...).

    Returns:
        numpy.random.Generator
    """
    return np.random.default_rng([int(seed), *(int(k) for k in keys)])


def dumps_json(obj):
    """Serialize to JSON with sorted keys so equal inputs give equal bytes."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj, force=True):
    """
    Write `obj` as deterministic JSON.

    Args:
        path (str | Path): Output file.
        obj: JSON-serializable object.
        force (bool): Overwrite an existing file.
    """
    path = Path(path)
    check_writable(path, force)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_json(obj))
    logging.debug(f"Wrote {path}")


def read_json(path):
    """Read a JSON document, turning I/O and syntax problems into InputError."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"File not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"Invalid JSON in {path}: line {e.lineno}: {e.msg}") from e


def check_writable(path, force):
    """Refuse to overwrite an existing output unless `force` is set."""
    path = Path(path)
    if path.exists() and not force:
        raise InputError(f"Output '{path}' already exists (use --force to overwrite).")
