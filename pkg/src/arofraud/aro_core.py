"""Single-individual asexual reproduction optimiser over fixed-length bit strings.

One parent produces one bud per iteration. A contiguous window of the
parent (the larva) is bit-flipped, and each window gene of the bud is then
taken from the larva with probability ``1 / (1 + ln(window_length))``,
otherwise from the parent. The bud replaces the parent only if it scores
strictly higher.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "BinaryChromosome",
    "AroCoreParams",
    "OptimizeResult",
    "merge_probability",
    "draw_window",
    "reproduce_bud",
    "optimize",
]

BinaryChromosome = np.ndarray  # 1-D bool array


def merge_probability(lam: int) -> float:
    """Probability that a window gene is taken from the larva, ``1 / (1 + ln lam)``."""
    if lam < 1:
        raise ValueError(f"window length must be >= 1, got {lam}")
    return 1.0 / (1.0 + math.log(lam))


def draw_window(length: int, rng: np.random.Generator) -> tuple[int, int]:
    """Random contiguous window ``[start, stop)`` inside ``range(length)``.

    The start is uniform over all positions, then the window length is
    uniform over the lengths that still fit.
    """
    start = int(rng.integers(0, length))
    lam = int(rng.integers(1, length - start + 1))
    return start, start + lam


def reproduce_bud(
    parent: BinaryChromosome,
    rng: np.random.Generator,
    deterministic_merge: bool = False,
    window: tuple[int, int] | None = None,
) -> BinaryChromosome:
    """Produce one bud from ``parent``.

    Parameters
    ----------
    parent : ndarray of bool
    rng : numpy.random.Generator
    deterministic_merge : bool
        Take every window gene from the larva when the merge probability
        exceeds 0.5 and none otherwise, instead of a per-gene draw.
    window : (start, stop), optional
        Force the larva window; drawn with :func:`draw_window` when omitted.
    """
    parent = np.asarray(parent, dtype=bool)
    start, stop = window if window is not None else draw_window(parent.size, rng)
    p = merge_probability(stop - start)
    bud = parent.copy()
    larva = ~parent[start:stop]
    if deterministic_merge:
        take = np.full(stop - start, p > 0.5)
    else:
        take = rng.random(stop - start) < p
    bud[start:stop] = np.where(take, larva, parent[start:stop])
    return bud


@dataclass
class AroCoreParams:
    length: int
    objective: Callable[[BinaryChromosome], float]
    max_iterations: int = 1000
    seed: int = 0
    target_fitness: float | None = None
    deterministic_merge: bool = False

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("chromosome length must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class OptimizeResult:
    best: BinaryChromosome
    best_fitness: float
    iterations_used: int
    fitness_trace: list[float] = field(default_factory=list)


def optimize(params: AroCoreParams, initial: BinaryChromosome | None = None) -> OptimizeResult:
    """Run the parent/bud survival loop.

    ``fitness_trace[0]`` is the initial parent's fitness and entry ``t`` the
    parent fitness after iteration ``t``. The run stops after
    ``max_iterations`` buds or as soon as the parent reaches ``target_fitness``.
    """
    rng = np.random.default_rng(params.seed)
    if initial is None:
        parent = rng.random(params.length) < 0.5
    else:
        parent = np.asarray(initial, dtype=bool).copy()
        if parent.size != params.length:
            raise ValueError(f"initial chromosome has length {parent.size}, expected {params.length}")
    parent_fit = float(params.objective(parent))
    trace = [parent_fit]
    it = 0
    while it < params.max_iterations:
        if params.target_fitness is not None and parent_fit >= params.target_fitness:
            break
        it += 1
        bud = reproduce_bud(parent, rng, params.deterministic_merge)
        bud_fit = float(params.objective(bud))
        if bud_fit > parent_fit:
            parent, parent_fit = bud, bud_fit
        trace.append(parent_fit)
    return OptimizeResult(parent, parent_fit, it, trace)
