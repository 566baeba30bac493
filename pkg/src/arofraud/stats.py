"""Wilcoxon signed-rank and Kruskal-Wallis tests, plus the chi-square tail."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaincc
from scipy.stats import norm, rankdata

__all__ = ["TestResult", "wilcoxon_signed_rank", "kruskal_wallis", "chi_square_sf"]

EXACT_MAX_N = 20


@dataclass
class TestResult:
    statistic: float
    p_value: float
    df: int | None = None
    direction: dict = field(default_factory=dict)
    exact_p: float | None = None
    notes: list[str] = field(default_factory=list)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        return asdict(self)


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail probability of a chi-square variable, ``Q(df/2, x/2)``."""
    if x < 0:
        raise ValueError("x must be >= 0")
    if df < 1:
        raise ValueError("df must be a positive integer")
    return float(gammaincc(df / 2.0, x / 2.0))


def _signed_rank_null(ranks) -> tuple[np.ndarray, np.ndarray]:
    # Null distribution of W+ over all 2**n sign assignments, as (support, pmf).
    # Mid-ranks are multiples of 1/2, so counting runs over doubled ranks.
    r2 = np.rint(2 * np.asarray(ranks, dtype=np.float64)).astype(int)
    total = int(r2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in r2:
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    support = np.arange(total + 1) / 2.0
    return support, counts / counts.sum()


def wilcoxon_signed_rank(a, b=None) -> TestResult:
    """Paired signed-rank test of ``a - b``.

    Zero differences are dropped and ``|d|`` ranked with mid-ranks. The
    two-sided p comes from the normal approximation with
    ``W = min(W+, W-)``, no continuity or tie correction. For at most 20
    non-zero differences the exact two-sided p over all sign assignments is
    also returned in ``exact_p``.
    """
    d = np.asarray(a, dtype=np.float64)
    if b is not None:
        bb = np.asarray(b, dtype=np.float64)
        if bb.shape != d.shape:
            raise ValueError("paired samples must have equal length")
        d = d - bb
    if d.size < 1:
        raise ValueError("need at least one pair")
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise ValueError("all differences are zero")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    mean = n * (n + 1) / 4.0
    sd = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0)
    z = (w - mean) / sd
    p = min(1.0, 2.0 * float(norm.cdf(z)))

    exact = None
    if n <= EXACT_MAX_N:
        support, pmf = _signed_rank_null(ranks)
        dev = abs(w_plus - mean)
        # tolerance absorbs rounding in the half-integer support
        exact = min(1.0, float(pmf[np.abs(support - mean) >= dev - 1e-9].sum()))
    return TestResult(
        statistic=w,
        p_value=p,
        direction={"w_plus": w_plus, "w_minus": w_minus, "n": n, "z": z},
        exact_p=exact,
        notes=["normal approximation without continuity correction"],
    )


def kruskal_wallis(groups) -> TestResult:
    """Kruskal-Wallis H with tie correction; p from the chi-square tail, ``df = g - 1``.

    All-identical observations give ``H = 0, p = 1``. Groups of a single
    observation are accepted but produce a warning: with one value per group
    H is fixed by the group count alone.
    """
    groups = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(g.size == 0 for g in groups):
        raise ValueError("empty group")
    sizes = np.array([g.size for g in groups])
    N = int(sizes.sum())
    if N < 2:
        raise ValueError("need at least two observations")
    df = len(groups) - 1
    notes = []
    if np.all(sizes == 1):
        msg = "every group holds one observation; H depends only on the number of groups"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    pooled = np.concatenate(groups)
    ranks = rankdata(pooled)
    _, ties = np.unique(pooled, return_counts=True)
    correction = 1.0 - float(np.sum(ties**3 - ties)) / (N**3 - N)
    if correction == 0:
        return TestResult(0.0, 1.0, df, notes=notes + ["all observations identical"])
    bounds = np.r_[0, np.cumsum(sizes)]
    mean_ranks = np.array([ranks[bounds[i] : bounds[i + 1]].mean() for i in range(len(groups))])
    # 12/(N(N+1)) sum R_g^2/n_g - 3(N+1), written around the grand mean rank
    # so that equal mean ranks give exactly zero
    ss = float(np.sum(sizes * (mean_ranks - (N + 1) / 2.0) ** 2))
    h = 12.0 * ss / (N * (N + 1)) / correction
    return TestResult(h, chi_square_sf(h, df), df, direction={"mean_ranks": mean_ranks.tolist()}, notes=notes)
