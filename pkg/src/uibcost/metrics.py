"""Multi-hardware latency aggregation and (latency, accuracy) Pareto analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple


class DimensionMismatch(ValueError):
    pass


class NonPositiveLatency(ValueError):
    pass


def _check_positive(values: Sequence[float], what: str = "latency") -> None:
    for v in values:
        if not v > 0 or math.isinf(v):
            raise NonPositiveLatency(f"{what} values must be finite and > 0, got {v!r}")


def arith_mean_normalized(latencies: Sequence[float], norms: Sequence[float]) -> float:
    """Mean of per-target latencies, each divided by the reference latency on that target."""
    if len(latencies) != len(norms):
        raise DimensionMismatch(f"{len(latencies)} latencies vs {len(norms)} normalization factors")
    if not latencies:
        raise DimensionMismatch("empty latency vector")
    _check_positive(latencies)
    _check_positive(norms, "normalization")
    return sum(l / c for l, c in zip(latencies, norms)) / len(latencies)


def geo_mean(latencies: Sequence[float]) -> float:
    if not latencies:
        raise DimensionMismatch("empty latency vector")
    _check_positive(latencies)
    # log-sum keeps long vectors of small/large values from under/overflowing
    return math.exp(math.fsum(math.log(v) for v in latencies) / len(latencies))


def geo_mean_normalized(latencies: Sequence[float], norms: Sequence[float]) -> float:
    if len(latencies) != len(norms):
        raise DimensionMismatch(f"{len(latencies)} latencies vs {len(norms)} normalization factors")
    return geo_mean([l / c for l, c in zip(latencies, norms)])


@dataclass(frozen=True)
class ParetoPoint:
    latency: float
    accuracy: float
    name: str = ""


def dominates(a: Tuple[float, float], b: Tuple[float, float]) -> bool:
    """True iff `a` = (latency, accuracy) is no slower, no less accurate, and strictly better in one."""
    la, aa = a[0], a[1]
    lb, ab = b[0], b[1]
    return la <= lb and aa >= ab and (la < lb or aa > ab)


def pareto_front(points: Iterable) -> List:
    """Non-dominated subset, sorted by latency ascending (ties by accuracy descending).

    Accepts ``ParetoPoint`` or ``(latency, accuracy, name)`` tuples and returns
    the same objects. Exact duplicates do not dominate each other and are all kept.
    """
    pts = list(points)
    if not pts:
        raise ValueError("pareto_front needs at least one point")
    key = lambda p: (p[0], p[1]) if isinstance(p, tuple) else (p.latency, p.accuracy)
    ordered = sorted(pts, key=lambda p: (key(p)[0], -key(p)[1]))
    front = []
    best_acc = -math.inf
    prev = None
    for p in ordered:
        lat, acc = key(p)
        if acc > best_acc:
            front.append(p)
            best_acc = acc
            prev = (lat, acc)
        elif prev is not None and (lat, acc) == prev:
            front.append(p)
    return front


def aggregate(latency_vectors: dict, method: str = "geo", norms: Optional[Sequence[float]] = None) -> dict:
    """Aggregate ``{model: [latency per target]}`` with ``geo`` or ``arith`` (normalized) mean."""
    if method == "geo":
        if norms is None:
            return {m: geo_mean(v) for m, v in latency_vectors.items()}
        return {m: geo_mean_normalized(v, norms) for m, v in latency_vectors.items()}
    if method == "arith":
        if norms is None:
            raise ValueError("arithmetic aggregation needs normalization factors")
        return {m: arith_mean_normalized(v, norms) for m, v in latency_vectors.items()}
    raise ValueError(f"unknown aggregation {method!r}")
