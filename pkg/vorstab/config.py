"""Helpers shared by the configuration dataclasses."""

from __future__ import annotations

import json
import os
from dataclasses import fields
from pathlib import Path
from typing import Any, TypeVar

import numpy as np

from vorstab.errors import ConfigError

T = TypeVar("T")

THREADS_ENV = "VORSTAB_THREADS"


def load_json(path: str | Path) -> dict[str, Any]:
    """Read a JSON object from ``path``. Missing files raise ``FileNotFoundError``."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"expected a JSON object in {path}")
    return data


def from_mapping(cls: type[T], data: dict[str, Any]) -> T:
    """Build dataclass ``cls`` from ``data``, rejecting unknown keys."""
    known = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {unknown}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def worker_count() -> int:
    """Worker threads allowed for independent jobs, from ``VORSTAB_THREADS``."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value}")
    return value


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the documented algorithm for reproducible perturbations."""
    return np.random.Generator(np.random.PCG64(seed))
