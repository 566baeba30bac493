"""Learned detector sets and their on-disk format.

File layout (UTF-8 text)::

    # arofraud-detectors v1
    # algorithm=aro
    # k=17
    # cut_point=0.175
    # max=<k comma-separated numbers>
    # min=<k comma-separated numbers>
    f1,...,fk
    <one detector per line>

Numbers are written with 17 significant digits so a reload is bit-exact.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .fitness import FeatureBounds, SortedColumns

__all__ = ["DetectorSet", "save_detectors", "load_detectors", "dump_detectors", "DETECTOR_FORMAT"]

DETECTOR_FORMAT = "arofraud-detectors v1"


@dataclass(frozen=True, eq=False)
class DetectorSet:
    """Learned normal-transaction prototypes plus the bounds used to train them."""

    detectors: np.ndarray
    bounds: FeatureBounds
    cut_point: float
    algorithm: str = "aro"
    train_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        D = np.array(self.detectors, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] == 0:
            raise ValueError("a detector set needs at least one detector")
        if D.shape[1] != self.bounds.feature_count:
            raise ValueError("detector width does not match bounds")
        D.flags.writeable = False
        object.__setattr__(self, "detectors", D)

    @property
    def feature_count(self) -> int:
        return self.detectors.shape[1]

    def __len__(self) -> int:
        return self.detectors.shape[0]

    @cached_property
    def index(self) -> SortedColumns:
        return SortedColumns(self.detectors, self.bounds)

    def same_model(self, other: "DetectorSet") -> bool:
        """Equal detectors, bounds, cut point and algorithm (train stats ignored)."""
        return (
            self.algorithm == other.algorithm
            and (self.cut_point == other.cut_point or (np.isnan(self.cut_point) and np.isnan(other.cut_point)))
            and self.bounds == other.bounds
            and np.array_equal(self.detectors, other.detectors)
        )


def _exact(x: float) -> str:
    # 17 significant digits round-trip every double
    return format(float(x), ".17g")


def dump_detectors(ds: DetectorSet) -> str:
    out = io.StringIO()
    fmt = lambda v: ",".join(_exact(x) for x in v)  # noqa: E731
    out.write(f"# {DETECTOR_FORMAT}\n")
    out.write(f"# algorithm={ds.algorithm}\n")
    out.write(f"# k={ds.feature_count}\n")
    out.write(f"# cut_point={_exact(ds.cut_point)}\n")
    out.write(f"# max={fmt(ds.bounds.max)}\n")
    out.write(f"# min={fmt(ds.bounds.min)}\n")
    out.write(",".join(f"f{i + 1}" for i in range(ds.feature_count)) + "\n")
    for row in ds.detectors:
        out.write(fmt(row) + "\n")
    return out.getvalue()


def save_detectors(ds: DetectorSet, path) -> None:
    Path(path).write_text(dump_detectors(ds), encoding="utf-8")


def load_detectors(path) -> DetectorSet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != f"# {DETECTOR_FORMAT}":
        raise ValueError(f"{path}: not a detector file (expected header '# {DETECTOR_FORMAT}')")
    meta = {}
    body_start = 1
    for i, line in enumerate(lines[1:], start=1):
        if not line.startswith("#"):
            body_start = i
            break
        key, _, value = line[1:].strip().partition("=")
        meta[key] = value
    try:
        k = int(meta["k"])
        cut = float(meta["cut_point"])
        hi = [float(x) for x in meta["max"].split(",")]
        lo = [float(x) for x in meta["min"].split(",")]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed detector header ({exc})") from None
    rows = []
    for lineno, line in enumerate(lines[body_start + 1 :], start=body_start + 2):
        if not line.strip():
            continue
        vals = [float(x) for x in line.split(",")]
        if len(vals) != k:
            raise ValueError(f"{path}: line {lineno} has {len(vals)} values, expected {k}")
        rows.append(vals)
    return DetectorSet(np.array(rows).reshape(-1, k), FeatureBounds(hi, lo), cut, meta.get("algorithm", "aro"))
