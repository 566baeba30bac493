"""Transaction data: containers, CSV ingestion and a synthetic split generator.

Records are held column-wise in numpy arrays. A :class:`Dataset` is
immutable once built; its arrays are flagged read-only.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Label",
    "TransactionRecord",
    "Dataset",
    "SplitPair",
    "GeneratorConfig",
    "CsvSchema",
    "DataFormatError",
    "REFERENCE_SPLIT_COUNTS",
    "load_csv",
    "save_csv",
    "format_number",
    "generate_splits",
    "class_partition",
]

SIGNIFICANT_DIGITS = 9

# (train_legit, train_fraud, test_legit, test_fraud) for the nine reference splits
REFERENCE_SPLIT_COUNTS: dict[int, tuple[int, int, int, int]] = {
    1: (27904, 1084, 12184, 475),
    2: (28012, 1092, 12076, 467),
    3: (28061, 1088, 12027, 471),
    4: (28145, 1075, 11943, 484),
    5: (28045, 1081, 12043, 478),
    6: (27973, 1116, 12115, 443),
    7: (28113, 1099, 11975, 460),
    8: (27884, 1106, 12204, 453),
    9: (28188, 1100, 11960, 459),
}


class DataFormatError(ValueError):
    """Raised for malformed CSV input. ``row`` is the 1-based file line."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class Label(enum.IntEnum):
    LEGITIMATE = 0
    FRAUDULENT = 1


@dataclass(frozen=True)
class TransactionRecord:
    features: tuple[float, ...]
    label: Label


def format_number(x: float) -> str:
    return format(float(x), f".{SIGNIFICANT_DIGITS}g")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class Dataset:
    """Labelled feature matrix.

    Parameters
    ----------
    features : array_like, shape (n, k)
        Finite real feature values.
    labels : array_like, shape (n,)
        0 for legitimate, 1 for fraudulent.
    """

    def __init__(self, features, labels):
        X = np.array(features, dtype=np.float64, copy=True)
        y = np.array(labels, dtype=np.int8, copy=True)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        n, k = X.shape
        if k < 1:
            raise ValueError("feature_count must be at least 1")
        if n < 1:
            raise ValueError("a dataset needs at least one record")
        if y.shape != (n,):
            raise ValueError(f"labels shape {y.shape} does not match {n} records")
        if not np.all(np.isfinite(X)):
            raise ValueError("feature values must be finite")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 (legitimate) or 1 (fraudulent)")
        if not np.any(y == 0):
            raise ValueError("a dataset needs at least one legitimate record")
        self.features = _frozen(X)
        self.labels = _frozen(y)

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    @property
    def n_legit(self) -> int:
        return int(np.count_nonzero(self.labels == 0))

    @property
    def n_fraud(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    def __len__(self) -> int:
        return self.features.shape[0]

    def __iter__(self) -> Iterator[TransactionRecord]:
        for row, lab in zip(self.features, self.labels):
            yield TransactionRecord(tuple(float(v) for v in row), Label(int(lab)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self) -> str:
        return f"Dataset(n={len(self)}, k={self.feature_count}, legit={self.n_legit}, fraud={self.n_fraud})"

    @classmethod
    def from_records(cls, records: Sequence[TransactionRecord]) -> "Dataset":
        return cls([r.features for r in records], [int(r.label) for r in records])


def class_partition(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Split a dataset into its legitimate and fraudulent feature matrices.

    Row order inside each matrix follows the dataset order.
    """
    legit = dataset.features[dataset.labels == 0]
    fraud = dataset.features[dataset.labels == 1]
    return legit, fraud


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    split_id: int

    @property
    def train_fraction(self) -> float:
        return len(self.train) / (len(self.train) + len(self.test))


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for :func:`load_csv`.

    ``feature_columns=None`` takes every column except the label, in file order.
    """

    label_column: str = "label"
    feature_columns: tuple[str, ...] | None = None
    label_values: Mapping[str, Label] = field(
        default_factory=lambda: {"0": Label.LEGITIMATE, "1": Label.FRAUDULENT}
    )


def load_csv(path, schema: CsvSchema | None = None) -> Dataset:
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError("empty file (no header)", row=1) from None
        if schema.label_column not in header:
            raise DataFormatError(f"label column {schema.label_column!r} missing from header", row=1)
        label_idx = header.index(schema.label_column)
        if schema.feature_columns is None:
            feat_idx = [i for i, h in enumerate(header) if i != label_idx]
        else:
            missing = [c for c in schema.feature_columns if c not in header]
            if missing:
                raise DataFormatError(f"feature columns missing from header: {missing}", row=1)
            feat_idx = [header.index(c) for c in schema.feature_columns]
        if not feat_idx:
            raise DataFormatError("schema names no feature columns", row=1)

        rows: list[list[float]] = []
        labels: list[int] = []
        width = len(header)
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != width:
                raise DataFormatError(f"expected {width} columns, found {len(cells)}", row=lineno)
            try:
                rows.append([float(cells[i]) for i in feat_idx])
            except ValueError:
                bad = next(cells[i] for i in feat_idx if not _is_float(cells[i]))
                raise DataFormatError(f"non-numeric feature value {bad!r}", row=lineno) from None
            if not all(math.isfinite(v) for v in rows[-1]):
                raise DataFormatError("non-finite feature value", row=lineno)
            raw_label = cells[label_idx].strip()
            if raw_label not in schema.label_values:
                raise DataFormatError(f"unknown label value {raw_label!r}", row=lineno)
            labels.append(int(schema.label_values[raw_label]))
    if not rows:
        raise DataFormatError("file has no data rows", row=2)
    return Dataset(np.array(rows), np.array(labels))


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_csv(dataset: Dataset, fh) -> None:
    k = dataset.feature_count
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([f"f{i + 1}" for i in range(k)] + ["label"])
    for row, lab in zip(dataset.features.tolist(), dataset.labels.tolist()):
        writer.writerow([format_number(v) for v in row] + [lab])


def save_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` as ``f1,...,fk,label`` CSV.

    Values are written with 9 significant digits, so ``load_csv`` recovers
    them exactly only when they already carry at most that precision
    (true for everything :func:`generate_splits` produces).
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_csv(dataset, fh)


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters for the two-centre synthetic transaction generator.

    Defaults reproduce the class counts of the first reference split.
    """

    feature_count: int = 17
    train_legit: int = 27904
    train_fraud: int = 1084
    test_legit: int = 12184
    test_fraud: int = 475
    class_separation: float = 2.0
    noise_scale: float = 1.0
    seed: int = 0
    train_fraction: float = 0.70

    def __post_init__(self):
        if self.feature_count < 1:
            raise ValueError("feature_count must be >= 1")
        for name in ("train_legit", "train_fraud", "test_legit", "test_fraud"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.class_separation >= 0:
            raise ValueError("class_separation must be >= 0")
        if not self.noise_scale > 0:
            raise ValueError("noise_scale must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        frac = self.n_train / (self.n_train + self.n_test)
        if abs(frac - self.train_fraction) > 0.005:
            raise ValueError(
                f"train share {frac:.4f} is more than 0.5 points from train_fraction {self.train_fraction}"
            )

    @property
    def n_train(self) -> int:
        return self.train_legit + self.train_fraud

    @property
    def n_test(self) -> int:
        return self.test_legit + self.test_fraud

    @property
    def fraud_fraction(self) -> float:
        return (self.train_fraud + self.test_fraud) / (self.n_train + self.n_test)

    @classmethod
    def for_reference_split(cls, split_id: int, **kwargs) -> "GeneratorConfig":
        tl, tf, sl, sf = REFERENCE_SPLIT_COUNTS[split_id]
        return cls(train_legit=tl, train_fraud=tf, test_legit=sl, test_fraud=sf, **kwargs)

    def scaled(self, factor: float) -> "GeneratorConfig":
        """Same proportions with every class count multiplied by ``factor``."""
        counts = {
            name: max(1, round(getattr(self, name) * factor))
            for name in ("train_legit", "train_fraud", "test_legit", "test_fraud")
        }
        return replace(self, **counts)


def _quantize(X: np.ndarray) -> np.ndarray:
    # Round to a fixed number of decimals so every value has at most
    # SIGNIFICANT_DIGITS digits; m / 10**d is the double nearest the decimal.
    max_abs = float(np.max(np.abs(X))) if X.size else 0.0
    int_digits = max(1, int(math.floor(math.log10(max_abs))) + 1) if max_abs >= 1 else 1
    decimals = max(0, SIGNIFICANT_DIGITS - int_digits)
    scale = 10.0**decimals
    return np.round(X * scale) / scale


def _draw(rng: np.random.Generator, n_legit: int, n_fraud: int, cfg: GeneratorConfig) -> Dataset:
    k = cfg.feature_count
    centre_fraud = np.full(k, cfg.class_separation)
    legit = rng.normal(0.0, cfg.noise_scale, size=(n_legit, k))
    fraud = centre_fraud + rng.normal(0.0, cfg.noise_scale, size=(n_fraud, k))
    X = np.vstack([legit, fraud])
    y = np.concatenate([np.zeros(n_legit, np.int8), np.ones(n_fraud, np.int8)])
    order = rng.permutation(len(y))
    return Dataset(_quantize(X[order]), y[order])


def generate_splits(config: GeneratorConfig, num_splits: int = 9, reference_counts: bool = False) -> list[SplitPair]:
    """Draw ``num_splits`` independent train/test splits.

    Split ``i`` (1-based) uses its own stream seeded by ``(config.seed, i)``.
    Legitimate records are centred at the origin, fraudulent ones at
    ``class_separation`` on every feature; both get isotropic Gaussian noise
    of standard deviation ``noise_scale``. With ``reference_counts`` split ``i``
    takes its class counts from ``REFERENCE_SPLIT_COUNTS[i]`` (at most 9 splits)
    instead of from ``config``.
    """
    if num_splits < 1:
        raise ValueError("num_splits must be >= 1")
    if reference_counts and num_splits > len(REFERENCE_SPLIT_COUNTS):
        raise ValueError(f"only {len(REFERENCE_SPLIT_COUNTS)} reference splits exist")
    splits = []
    for split_id in range(1, num_splits + 1):
        cfg = config
        if reference_counts:
            tl, tf, sl, sf = REFERENCE_SPLIT_COUNTS[split_id]
            cfg = replace(config, train_legit=tl, train_fraud=tf, test_legit=sl, test_fraud=sf)
        rng = np.random.default_rng([config.seed, split_id])
        train = _draw(rng, cfg.train_legit, cfg.train_fraud, cfg)
        test = _draw(rng, cfg.test_legit, cfg.test_fraud, cfg)
        splits.append(SplitPair(train, test, split_id))
    return splits
