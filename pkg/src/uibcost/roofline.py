"""Roofline latency prediction, ridge-point sweeps and empirical ridge-point fitting.

A target is described by its ridge point (MACs/byte) and peak MAC rate. Each
block costs ``max(macs, bytes * ridge_point) / peak`` seconds and the network
latency is the sum over blocks.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .cost import INT8, CostReport, DtypeWidths

DEFAULT_SWEEP = (0.0, 1.0, 5.0, 10.0, 50.0, 100.0, 500.0)
FIT_RANGE = (0.0, 500.0)
FIT_STEP = 0.1


class InsufficientData(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class HardwareTarget:
    name: str
    ridge_point: float
    peak_macs_per_sec: float = 1.0
    dtype_widths: DtypeWidths = INT8

    def __post_init__(self):
        if not self.ridge_point >= 0 or math.isinf(self.ridge_point):
            raise ValueError(f"ridge point must be finite and >= 0, got {self.ridge_point}")
        if not self.peak_macs_per_sec > 0:
            raise ValueError(f"peak rate must be > 0, got {self.peak_macs_per_sec}")


# Reference ridge points for common mobile targets. Peak rates are unit
# placeholders: only rankings are meaningful.
REFERENCE_TARGETS = {
    "Pixel 6 CPU": HardwareTarget("Pixel 6 CPU", 31.2),
    "Samsung S23 CPU": HardwareTarget("Samsung S23 CPU", 39.7),
    "Pixel 4 DSP": HardwareTarget("Pixel 4 DSP", 347.3),
    "Pixel 8 EdgeTPU": HardwareTarget("Pixel 8 EdgeTPU", 433.8),
}


@dataclass(frozen=True)
class LatencyPrediction:
    per_block: Tuple[float, ...]

    @property
    def total(self) -> float:
        return sum(self.per_block)


def block_time(macs: float, nbytes: float, target: HardwareTarget) -> float:
    return max(macs, nbytes * target.ridge_point) / target.peak_macs_per_sec


def predict_latency(report: CostReport, target: HardwareTarget) -> LatencyPrediction:
    """Per-block and total roofline latency in seconds."""
    return LatencyPrediction(tuple(block_time(b.macs, b.bytes, target) for b in report.per_block))


def _block_arrays(report: CostReport):
    macs = np.array([b.macs for b in report.per_block], dtype=float)
    nbytes = np.array([b.bytes for b in report.per_block], dtype=float)
    return macs, nbytes


def mac_equivalents(reports: Sequence[CostReport], rps: Sequence[float]) -> np.ndarray:
    """Roofline cost in MAC-equivalents (latency at unit peak), shape (len(rps), len(reports))."""
    rps = np.asarray(rps, dtype=float)
    out = np.empty((len(rps), len(reports)))
    for j, r in enumerate(reports):
        macs, nbytes = _block_arrays(r)
        out[:, j] = np.maximum(macs[None, :], nbytes[None, :] * rps[:, None]).sum(axis=1)
    return out


@dataclass
class SweepTable:
    models: List[str]
    ridge_points: List[float]
    latency_s: np.ndarray  # (len(ridge_points), len(models))
    peak_macs_per_sec: float = 1.0

    def column(self, model: str) -> List[float]:
        return list(self.latency_s[:, self.models.index(model)])

    def ranking(self, rp: float) -> List[str]:
        row = self.latency_s[self.ridge_points.index(rp)]
        return [self.models[i] for i in np.argsort(row, kind="stable")]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model"] + [f"rp_{rp:g}" for rp in self.ridge_points])
        for j, m in enumerate(self.models):
            w.writerow([m] + [f"{v:.6g}" for v in self.latency_s[:, j]])
        return buf.getvalue()


def sweep_ridge_points(
    reports: Sequence[CostReport], rps: Sequence[float] = DEFAULT_SWEEP, peak_macs_per_sec: float = 1.0
) -> SweepTable:
    if not len(rps):
        raise ValueError("need at least one ridge point")
    if any(rp < 0 for rp in rps):
        raise ValueError("ridge points must be >= 0")
    lat = mac_equivalents(reports, rps) / peak_macs_per_sec
    return SweepTable([r.name for r in reports], [float(x) for x in rps], lat, peak_macs_per_sec)


def rankdata(xs: Sequence[float]) -> List[float]:
    """1-based ranks; tied values share the average of their ranks."""
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rank correlation (Pearson correlation of average ranks)."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"lengths differ: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise LengthMismatch("need at least two observations")
    rx, ry = rankdata(list(xs)), rankdata(list(ys))
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    dx = [r - mx for r in rx]
    dy = [r - my for r in ry]
    sxx = sum(d * d for d in dx)
    syy = sum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise DegenerateInput("rank correlation undefined for constant input")
    rho = sum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


@dataclass
class FitResult:
    ridge_point: float
    peak_macs_per_sec: float
    spearman: float
    spearman_macs: float
    models: List[str] = field(default_factory=list)

    def target(self, name: str = "fitted") -> HardwareTarget:
        return HardwareTarget(name, self.ridge_point, self.peak_macs_per_sec)


def fit_ridge_point(
    reports: Sequence[CostReport],
    measured_ms: Sequence[float],
    rp_range: Tuple[float, float] = FIT_RANGE,
    step: float = FIT_STEP,
) -> FitResult:
    """Ridge point maximising rank correlation between roofline predictions and measurements.

    Every grid point in `rp_range` at `step` spacing is evaluated. Rank
    correlation is flat over whole intervals of ridge points, so ties are
    broken by the residual of the log-space peak fit and then toward the
    smallest ridge point. The peak rate is the least-squares fit in log space
    at the chosen ridge point.
    """
    if len(reports) != len(measured_ms):
        raise LengthMismatch(f"{len(reports)} reports vs {len(measured_ms)} measurements")
    if len(reports) < 3:
        raise InsufficientData(f"need >= 3 measured models, got {len(reports)}")
    lo, hi = rp_range
    n = int(round((hi - lo) / step))
    grid = lo + step * np.arange(n + 1)
    preds = mac_equivalents(reports, grid)
    log_sec = np.log(np.asarray(measured_ms, dtype=float) / 1e3)

    rhos = np.array([spearman(list(row), measured_ms) for row in preds])
    tied = np.flatnonzero(rhos >= rhos.max() - 1e-12)
    log_gap = np.log(preds[tied]) - log_sec[None, :]
    resid = ((log_gap - log_gap.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    # smallest residual, then smallest ridge point (tied is ascending)
    pick = tied[int(np.flatnonzero(resid <= resid.min() * (1 + 1e-9) + 1e-15)[0])]
    best_rp = round(float(grid[pick]), 10)

    unit = mac_equivalents(reports, [best_rp])[0]
    log_peak = float(np.mean(np.log(unit) - log_sec))
    rho_macs = spearman([r.total_macs for r in reports], measured_ms)
    return FitResult(best_rp, math.exp(log_peak), float(rhos[pick]), rho_macs, [r.name for r in reports])
