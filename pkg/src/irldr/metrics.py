"""Evaluation arithmetic over normalized DR-provision series."""

from __future__ import annotations

import numpy as np


class MetricsError(ValueError):
    pass


class LengthMismatchError(MetricsError):
    pass


class ConstantSeriesError(MetricsError):
    """Pearson correlation is undefined for a constant series; callers that
    build report tables render this as an explicit blank, never as 0."""


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatchError(f"series shapes differ: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise MetricsError("series must have at least 2 values")
    return a, b


def mae(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def pearson(a, b) -> float:
    a, b = _pair(a, b)
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(np.sum(da * da))
    nb = np.sqrt(np.sum(db * db))
    if na == 0.0 or nb == 0.0:
        raise ConstantSeriesError("pearson correlation undefined for a constant series")
    return float(np.sum(da * db) / (na * nb))


def pearson_or_none(a, b) -> float | None:
    try:
        return pearson(a, b)
    except ConstantSeriesError:
        return None


def aggregate(values) -> dict[str, float]:
    """Average / minimum / maximum / median; midpoint median for even counts."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise MetricsError("cannot aggregate an empty collection")
    return {
        "average": float(arr.mean()),
        "minimum": float(arr.min()),
        "maximum": float(arr.max()),
        "median": float(np.median(arr)),
    }
