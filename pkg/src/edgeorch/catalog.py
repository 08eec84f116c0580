"""MobileNet model zoo, accuracy arithmetic and accuracy constraint levels."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence


class Precision(str, Enum):
    FP32 = "FP32"
    INT8 = "Int8"

    @property
    def bytes_per_weight(self) -> int:
        return 4 if self is Precision.FP32 else 1


@dataclass(frozen=True)
class InferenceModel:
    id: str
    macs: int  # millions of multiply-accumulates
    precision: Precision
    accuracy: float  # percent
    mem_footprint: int = field(default=0)

    def __post_init__(self):
        if not 0.0 < self.accuracy <= 100.0:
            raise ValueError(f"{self.id}: accuracy {self.accuracy} outside (0, 100]")
        if self.macs <= 0:
            raise ValueError(f"{self.id}: macs must be positive")
        if self.mem_footprint == 0:
            object.__setattr__(self, "mem_footprint", self.macs * self.precision.bytes_per_weight)

    @property
    def index(self) -> int:
        return int(self.id[1:])

    @property
    def accuracy_hundredths(self) -> int:
        # exact two-decimal representation used for every accuracy comparison
        return round(self.accuracy * 100)


_DEFAULT_ROWS = [
    ("d0", 569, Precision.FP32, 89.9),
    ("d1", 317, Precision.FP32, 88.2),
    ("d2", 150, Precision.FP32, 84.9),
    ("d3", 41, Precision.FP32, 74.2),
    ("d4", 569, Precision.INT8, 88.9),
    ("d5", 317, Precision.INT8, 87.0),
    ("d6", 150, Precision.INT8, 83.2),
    ("d7", 41, Precision.INT8, 72.8),
]


def load_default_catalog() -> list[InferenceModel]:
    """The eight MobileNetV1-224 variants, d0 (1.0 FP32) through d7 (0.25 Int8)."""
    return [InferenceModel(i, m, p, a) for i, m, p, a in _DEFAULT_ROWS]


def load_catalog(path: str | Path) -> list[InferenceModel]:
    """Read a catalog from CSV with columns id, macs, precision, accuracy[, mem_footprint]."""
    models = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            models.append(
                InferenceModel(
                    id=row["id"].strip(),
                    macs=int(row["macs"]),
                    precision=Precision(row["precision"].strip()),
                    accuracy=float(row["accuracy"]),
                    mem_footprint=int(row.get("mem_footprint") or 0),
                )
            )
    ids = [m.id for m in models]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate model ids in catalog")
    if ids != [f"d{i}" for i in range(len(ids))]:
        raise ValueError("catalog ids must be d0..d{l-1} in order")
    return models


def average_accuracy(selection: Sequence[InferenceModel]) -> float:
    if not selection:
        raise ValueError("empty selection")
    total = sum(m.accuracy_hundredths for m in selection)
    return total / len(selection) / 100.0


def feasible_models(threshold: float, catalog: Iterable[InferenceModel] | None = None) -> list[InferenceModel]:
    """Models individually meeting ``threshold``, most accurate first.

    Only a pruning aid: the binding constraint is on the average across devices.
    """
    if not 0.0 <= threshold <= 100.0:
        raise ValueError(f"threshold {threshold} outside [0, 100]")
    catalog = load_default_catalog() if catalog is None else list(catalog)
    limit = round(threshold * 100)
    keep = [m for m in catalog if m.accuracy_hundredths >= limit]
    return sorted(keep, key=lambda m: (-m.accuracy_hundredths, m.index))


class AccuracyConstraint(Enum):
    MIN = ("Min", 0.0)
    P80 = ("80%", 80.0)
    P85 = ("85%", 85.0)
    P89 = ("89%", 89.0)
    MAX = ("Max", 89.9)

    def __init__(self, label: str, threshold: float):
        self.label = label
        self.threshold = threshold

    @property
    def threshold_hundredths(self) -> int:
        return round(self.threshold * 100)

    def satisfied_by(self, models: Sequence[InferenceModel]) -> bool:
        # sum(acc) >= n * threshold, in integer hundredths so 89.10 >= 89.0 is exact
        return sum(m.accuracy_hundredths for m in models) >= len(models) * self.threshold_hundredths

    @classmethod
    def parse(cls, text: str) -> "AccuracyConstraint":
        key = text.strip().upper().rstrip("%")
        aliases = {"MIN": cls.MIN, "MAX": cls.MAX, "80": cls.P80, "85": cls.P85, "89": cls.P89,
                   "P80": cls.P80, "P85": cls.P85, "P89": cls.P89}
        if key not in aliases:
            raise ValueError(f"unknown accuracy constraint {text!r}")
        return aliases[key]


CONSTRAINTS: tuple[AccuracyConstraint, ...] = tuple(AccuracyConstraint)
