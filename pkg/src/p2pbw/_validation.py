"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import math
from numbers import Real

import numpy as np

from .exceptions import InvalidArgument


def check_finite_scalar(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (Real, np.floating, np.integer)):
        raise InvalidArgument(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgument(f"{name} must be finite, got {value}")
    return value


def check_positive(value, name: str) -> float:
    value = check_finite_scalar(value, name)
    if value <= 0:
        raise InvalidArgument(f"{name} must be > 0, got {value}")
    return value


def check_nonnegative(value, name: str) -> float:
    value = check_finite_scalar(value, name)
    if value < 0:
        raise InvalidArgument(f"{name} must be >= 0, got {value}")
    return value


def check_count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise InvalidArgument(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidArgument(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_series(values, name: str = "values", min_length: int = 1) -> np.ndarray:
    """Return ``values`` as a finite 1-D float array of at least ``min_length``."""
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidArgument(f"{name} must be numeric: {exc}") from None
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise InvalidArgument(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise InvalidArgument(f"{name} needs at least {min_length} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} contains non-finite values")
    return arr


def check_random_state(seed) -> np.random.Generator:
    """Turn ``seed`` (None, int, SeedSequence or Generator) into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (int, np.integer, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise InvalidArgument(f"cannot build a random stream from {seed!r}")


def spawn_seeds(seed, count: int) -> list[np.random.SeedSequence]:
    """Derive ``count`` independent child seeds deterministically from ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        # spawn() mutates its receiver; work on a copy so the call stays pure
        root = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    elif isinstance(seed, np.random.Generator):
        root = np.random.SeedSequence(seed.integers(0, 2**63))
    else:
        root = np.random.SeedSequence(seed)
    return root.spawn(count)
