"""Latency tables: models x execution targets, plus optional top-1 accuracy.

CSV format (long form)::

    model,target,latency_ms,top1

Blank, ``-`` and ``Failed`` latency cells are recorded as missing. Repeated
(model, target) rows are treated as per-repeat means and collapsed with the
median, i.e. the table stores the median of means.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

MISSING_TOKENS = {"", "-", "failed", "n/a", "na"}
HEADER = ["model", "target", "latency_ms", "top1"]


class CSVFormatError(ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


@dataclass
class LatencyMatrix:
    models: List[str]
    targets: List[str]
    latency_ms: List[List[Optional[float]]]
    accuracy: Dict[str, float] = field(default_factory=dict)

    def get(self, model: str, target: str) -> Optional[float]:
        return self.latency_ms[self.models.index(model)][self.targets.index(target)]

    def column(self, target: str) -> Dict[str, float]:
        """Present latencies for one target, keyed by model, in model order."""
        j = self.targets.index(target)
        return {m: row[j] for m, row in zip(self.models, self.latency_ms) if row[j] is not None}

    def vector(self, model: str, targets: Sequence[str]) -> Optional[List[float]]:
        """Latencies of `model` on `targets`; None if any is missing (never imputed)."""
        row = self.latency_ms[self.models.index(model)]
        vals = [row[self.targets.index(t)] for t in targets]
        return None if any(v is None for v in vals) else vals

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for m, row in zip(self.models, self.latency_ms):
            top1 = self.accuracy.get(m)
            for t, v in zip(self.targets, row):
                w.writerow([m, t, "-" if v is None else repr(v), "" if top1 is None else top1])
        return buf.getvalue()


def _parse_float(text: str, line: int, what: str) -> Optional[float]:
    if text.strip().lower() in MISSING_TOKENS:
        return None
    try:
        v = float(text)
    except ValueError:
        raise CSVFormatError(line, f"{what} is not a number: {text!r}") from None
    return v


def parse_latency_csv(text: str) -> LatencyMatrix:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CSVFormatError(1, "empty file") from None
    if header[:4] != HEADER:
        raise CSVFormatError(1, f"expected header {','.join(HEADER)}, got {','.join(header)}")

    samples: Dict[tuple, List[float]] = {}
    models: List[str] = []
    targets: List[str] = []
    accuracy: Dict[str, float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 3:
            raise CSVFormatError(lineno, f"expected at least 3 fields, got {len(row)}")
        model, target = row[0].strip(), row[1].strip()
        if not model or not target:
            raise CSVFormatError(lineno, "model and target must be non-empty")
        lat = _parse_float(row[2], lineno, "latency_ms")
        if lat is not None and lat <= 0:
            raise CSVFormatError(lineno, f"latency must be positive, got {lat}")
        if len(row) > 3:
            top1 = _parse_float(row[3], lineno, "top1")
            if top1 is not None:
                accuracy[model] = top1
        if model not in models:
            models.append(model)
        if target not in targets:
            targets.append(target)
        if lat is not None:
            samples.setdefault((model, target), []).append(lat)

    matrix = [
        [statistics.median(samples[(m, t)]) if (m, t) in samples else None for t in targets]
        for m in models
    ]
    return LatencyMatrix(models, targets, matrix, accuracy)


def read_latency_csv(path: Union[str, Path]) -> LatencyMatrix:
    return parse_latency_csv(Path(path).read_text())


def bundled_latencies() -> LatencyMatrix:
    """Reference ImageNet-1k latencies and top-1 accuracies for the model zoo."""
    text = resources.files("uibcost").joinpath("data/reference_latencies.csv").read_text()
    return parse_latency_csv(text)

