"""Clonal-selection AIS baseline producing a pool of memory-cell detectors.

Each iteration samples ``n_pop`` legitimate training records, keeps the
``n_c`` with the highest affinity, clones them (more clones for better
ranks), mutates the clones, and lets the ``n_m`` best mutants replace the
``n_m`` worst memory cells.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, class_partition
from .detectors import DetectorSet
from .fitness import FitnessContext, compute_bounds

__all__ = ["AisParams", "MemoryCellPool", "affinity", "clone_counts", "ais_train"]


@dataclass(frozen=True)
class AisParams:
    """AIS knobs.

    ``faithful=True`` replaces the worst memory cells unconditionally; the
    default only installs a mutant that beats the cell it displaces.
    ``negative_selection=True`` drops sampled records with negative affinity
    before selection.
    """

    n_pop: int = 25
    n_c: int = 7
    n_m: int = 5
    iterations: int = 150
    clone_factor: float = 1.0
    mutation_rate: float = 0.1
    seed: int = 0
    faithful: bool = False
    negative_selection: bool = False

    def __post_init__(self):
        if not 1 <= self.n_m <= self.n_c <= self.n_pop:
            raise ValueError("need 1 <= n_m <= n_c <= n_pop")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.clone_factor > 0:
            raise ValueError("clone_factor must be > 0")
        if not 0 <= self.mutation_rate <= 1:
            raise ValueError("mutation_rate must lie in [0, 1]")


class MemoryCellPool:
    """Detectors kept sorted by affinity, best first."""

    def __init__(self, cells, affinities, capacity: int):
        order = np.argsort(-np.asarray(affinities), kind="stable")
        self.cells = np.asarray(cells, dtype=np.float64)[order][:capacity].copy()
        self.affinities = np.asarray(affinities, dtype=np.float64)[order][:capacity].copy()
        self.capacity = capacity

    def __len__(self) -> int:
        return len(self.affinities)

    @property
    def worst(self) -> float:
        return float(self.affinities[-1])

    def replace_worst(self, candidates, cand_aff, guarded: bool = True) -> int:
        """Swap the worst cells for ``candidates``; returns how many were installed.

        Candidates are paired best-to-worst: the best candidate faces the
        worst cell. With ``guarded`` a pair swaps only if the candidate wins.
        """
        order = np.argsort(-np.asarray(cand_aff), kind="stable")
        installed = 0
        for j, c in enumerate(order[: len(self)]):
            slot = len(self) - 1 - j
            if not guarded or cand_aff[c] > self.affinities[slot]:
                self.cells[slot] = candidates[c]
                self.affinities[slot] = cand_aff[c]
                installed += 1
        resort = np.argsort(-self.affinities, kind="stable")
        self.cells = self.cells[resort]
        self.affinities = self.affinities[resort]
        return installed


def affinity(record, ctx: FitnessContext) -> float:
    """Detector affinity; identical to :func:`arofraud.fitness.fitness`."""
    from .fitness import fitness

    return fitness(record, ctx)


def clone_counts(n_c: int, clone_factor: float = 1.0) -> np.ndarray:
    """Clones per rank ``rho = 1..n_c``: ``round(clone_factor * n_c / rho)``, at least one."""
    rho = np.arange(1, n_c + 1)
    return np.maximum(1, np.round(clone_factor * n_c / rho)).astype(int)


def ais_train(train_split: Dataset, params: AisParams = AisParams()) -> DetectorSet:
    """Run clonal selection and return the memory cells as detectors.

    ``train_stats["worst_affinity"]`` holds the worst memory-cell affinity
    before the first iteration and after each one.
    """
    t0 = time.perf_counter()
    legit, fraud = class_partition(train_split)
    if len(fraud) == 0:
        raise ValueError("training split has no fraudulent records; affinity needs both classes")
    if len(legit) < params.n_pop:
        raise ValueError(f"need at least n_pop={params.n_pop} legitimate records, got {len(legit)}")
    ctx = FitnessContext(legit, fraud, compute_bounds(train_split.features))
    legal = compute_bounds(legit)
    lo, span = legal.min, legal.span
    rng = np.random.default_rng(params.seed)
    counts = clone_counts(params.n_c, params.clone_factor)

    first = legit[rng.choice(len(legit), params.n_pop, replace=False)]
    pool = MemoryCellPool(first, ctx.fitness(first), params.n_pop)
    worst_trace = [pool.worst]
    installed = 0
    for _ in range(params.iterations):
        sample = legit[rng.choice(len(legit), params.n_pop, replace=False)]
        aff = ctx.fitness(sample)
        if params.negative_selection:
            keep = aff >= 0
            sample, aff = sample[keep], aff[keep]
            if len(sample) == 0:
                worst_trace.append(pool.worst)
                continue
        best = np.argsort(-aff, kind="stable")[: params.n_c]
        colony = np.repeat(sample[best], counts[: len(best)], axis=0)
        hit = rng.random(colony.shape) < params.mutation_rate
        fresh = lo + span * rng.random(colony.shape)
        mutated = np.where(hit, fresh, colony)
        m_aff = ctx.fitness(mutated)
        top = np.argsort(-m_aff, kind="stable")[: params.n_m]
        installed += pool.replace_worst(mutated[top], m_aff[top], guarded=not params.faithful)
        worst_trace.append(pool.worst)

    stats = {
        "iterations": params.iterations,
        "installed": installed,
        "worst_affinity": worst_trace,
        "final_affinities": pool.affinities.tolist(),
        "train_time_s": time.perf_counter() - t0,
    }
    return DetectorSet(pool.cells, ctx.bounds, float("nan"), "ais", stats)
