"""Range-normalised L1 distances between a record and a set of reference rows.

For a record ``r`` and reference rows ``x_j`` (``j = 1..n``) the distance is

    sum_i sum_j |r_i - x_ji| / (max_i - min_i)  /  (k * n)

i.e. the mean absolute deviation per feature, each feature scaled by its
range. The fitness of a candidate detector is its distance to the fraud rows
minus its distance to the legitimate rows; larger means "more normal".

Evaluation goes through :class:`SortedColumns`, which sorts every feature
column once and answers a query in ``O(k log n)`` using prefix sums, so that
per-iteration cost does not grow with the size of the training split.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "FeatureBounds",
    "FitnessContext",
    "SortedColumns",
    "compute_bounds",
    "normal_distance",
    "fraud_distance",
    "fitness",
]

DIRECT_MAX_ROWS = 32


@dataclass(frozen=True)
class FeatureBounds:
    """Per-feature ``max`` and ``min``. Features with ``max == min`` are degenerate."""

    max: np.ndarray
    min: np.ndarray

    def __post_init__(self):
        hi = np.array(self.max, dtype=np.float64)
        lo = np.array(self.min, dtype=np.float64)
        if hi.ndim != 1 or hi.shape != lo.shape or hi.size < 1:
            raise ValueError("bounds must be two equal-length 1-D vectors")
        if np.any(hi < lo):
            raise ValueError("max must be >= min for every feature")
        hi.flags.writeable = False
        lo.flags.writeable = False
        object.__setattr__(self, "max", hi)
        object.__setattr__(self, "min", lo)

    @property
    def feature_count(self) -> int:
        return self.max.size

    @property
    def span(self) -> np.ndarray:
        return self.max - self.min

    @property
    def degenerate(self) -> np.ndarray:
        return self.max == self.min

    def normalize(self, X) -> np.ndarray:
        """Map values to range units, ``(x - min) / (max - min)``; degenerate features map to 0."""
        X = np.asarray(X, dtype=np.float64)
        span = self.span
        safe = np.where(span > 0, span, 1.0)
        U = (X - self.min) / safe
        return np.where(span > 0, U, 0.0)

    def __eq__(self, other):
        if not isinstance(other, FeatureBounds):
            return NotImplemented
        return np.array_equal(self.max, other.max) and np.array_equal(self.min, other.min)

    __hash__ = None


def compute_bounds(records) -> FeatureBounds:
    X = np.asarray(records, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise ValueError("cannot compute bounds of an empty record set")
    return FeatureBounds(X.max(axis=0), X.min(axis=0))


class SortedColumns:
    """Answers mean normalised L1 distance queries against a fixed row set.

    Every column is normalised by ``bounds``, sorted and prefix-summed, so a
    query costs one binary search per feature. Reference sets of at most
    ``DIRECT_MAX_ROWS`` rows are summed directly instead.

    Parameters
    ----------
    rows : array_like, shape (n, k)
    bounds : FeatureBounds
    """

    def __init__(self, rows, bounds: FeatureBounds):
        R = np.asarray(rows, dtype=np.float64)
        if R.ndim != 2 or R.shape[0] == 0:
            raise ValueError("reference matrix must be non-empty and 2-D")
        n, k = R.shape
        if k != bounds.feature_count:
            raise ValueError(f"reference rows have {k} features, bounds have {bounds.feature_count}")
        self.n = n
        self.k = k
        self.bounds = bounds
        span = bounds.span
        self._live = span > 0
        self._safe_span = np.where(self._live, span, 1.0)
        self._raw = R
        U = np.sort(bounds.normalize(R), axis=0)  # (n, k)
        self._cols = np.ascontiguousarray(U.T)  # (k, n), each row sorted
        cs = np.zeros((k, n + 1))
        np.cumsum(self._cols, axis=1, out=cs[:, 1:])
        self._cumsum = cs
        self._total = cs[:, -1]

    def mean_distance(self, queries) -> np.ndarray:
        """Distance of each query row to all reference rows.

        Parameters
        ----------
        queries : array_like, shape (m, k) or (k,)

        Returns
        -------
        ndarray, shape (m,) or scalar
        """
        Q = np.asarray(queries, dtype=np.float64)
        single = Q.ndim == 1
        Q = np.atleast_2d(Q)
        if Q.shape[1] != self.k:
            raise ValueError(f"query has {Q.shape[1]} features, expected {self.k}")
        if self.n <= DIRECT_MAX_ROWS:
            # differences in raw units first: no cancellation for tiny reference sets
            dev = np.abs(Q[:, None, :] - self._raw[None, :, :]).sum(axis=1)
            per_feature = np.where(self._live, dev / self._safe_span, 0.0)
        else:
            V = self.bounds.normalize(Q)
            below = np.empty(V.shape, dtype=np.intp)  # rows strictly below the query
            for i in range(self.k):
                below[:, i] = np.searchsorted(self._cols[i], V[:, i], side="left")
            s_below = np.take_along_axis(self._cumsum, below.T, axis=1).T
            above = self.n - below
            per_feature = (V * below - s_below) + ((self._total - s_below) - V * above)
        d = per_feature.sum(axis=1) / (self.k * self.n)
        return d[0] if single else d


class FitnessContext:
    """Legitimate and fraudulent reference matrices with shared bounds.

    Parameters
    ----------
    normal_matrix : array_like, shape (N, k)
    fraud_matrix : array_like, shape (F, k)
        May be empty (``F = 0``); only :meth:`fitness` needs it.
    bounds : FeatureBounds, optional
        Defaults to the bounds of both matrices together.
    """

    def __init__(self, normal_matrix, fraud_matrix, bounds: FeatureBounds | None = None):
        nt = np.asarray(normal_matrix, dtype=np.float64)
        ft = np.asarray(fraud_matrix, dtype=np.float64)
        if nt.ndim != 2 or nt.shape[0] < 1:
            raise ValueError("normal matrix must contain at least one row")
        k = nt.shape[1]
        if ft.size == 0:
            ft = ft.reshape(0, k)
        if ft.ndim != 2 or ft.shape[1] != k:
            raise ValueError("fraud matrix must have the same feature count as the normal matrix")
        if bounds is None:
            bounds = compute_bounds(np.vstack([nt, ft]))
        if bounds.feature_count != k:
            raise ValueError("bounds feature count does not match the matrices")
        self.normal_matrix = nt
        self.fraud_matrix = ft
        self.bounds = bounds
        self.feature_count = k

    @classmethod
    def from_dataset(cls, dataset) -> "FitnessContext":
        """Context for a training split; bounds span both classes."""
        from .dataset import class_partition

        legit, fraud = class_partition(dataset)
        return cls(legit, fraud, compute_bounds(dataset.features))

    @property
    def N(self) -> int:
        return self.normal_matrix.shape[0]

    @property
    def F(self) -> int:
        return self.fraud_matrix.shape[0]

    @cached_property
    def _normal_index(self) -> SortedColumns:
        return SortedColumns(self.normal_matrix, self.bounds)

    @cached_property
    def _fraud_index(self) -> SortedColumns:
        if self.F == 0:
            raise ValueError("fraud matrix is empty")
        return SortedColumns(self.fraud_matrix, self.bounds)

    def normal_distance(self, records):
        return self._normal_index.mean_distance(records)

    def fraud_distance(self, records):
        return self._fraud_index.mean_distance(records)

    def fitness(self, records):
        return self.fraud_distance(records) - self.normal_distance(records)


def normal_distance(record, ctx: FitnessContext) -> float:
    return float(ctx.normal_distance(np.asarray(record, dtype=np.float64)))


def fraud_distance(record, ctx: FitnessContext) -> float:
    return float(ctx.fraud_distance(np.asarray(record, dtype=np.float64)))


def fitness(record, ctx: FitnessContext) -> float:
    """Fraud distance minus normal distance; positive means closer to the legitimate rows."""
    return float(ctx.fitness(np.asarray(record, dtype=np.float64)))
