"""Per-path objectives, n-gram rarity and exact Pareto filtering."""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

OBJECTIVES = ("T", "R", "C", "A", "O", "S", "U", "N")
MINIMIZED = ("T", "R")


@dataclass(frozen=True)
class ObjectiveVector:
    T: int  # path length
    R: float  # estimated execution time
    C: int  # unique states
    A: int  # distinct actions
    O: int  # distinct objects
    S: int  # distinct scenes
    U: int  # distinct ui components
    N: float  # n-gram rarity

    def as_minimization(self):
        """Orient every objective so smaller is better."""
        return tuple(getattr(self, k) if k in MINIMIZED else -getattr(self, k) for k in OBJECTIVES)

    def to_json(self):
        return {k: getattr(self, k) for k in OBJECTIVES}

    @classmethod
    def from_json(cls, d):
        return cls(**{k: d[k] for k in OBJECTIVES})


@dataclass
class NGramTable:
    n: int = 2
    counts: Counter = field(default_factory=Counter)
    total: int = 0


def ngrams(actions, n):
    return [tuple(actions[i : i + n]) for i in range(len(actions) - n + 1)]


def build_ngram_table(pool, n=2) -> NGramTable:
    if not pool:
        raise ValueError("n-gram table needs a non-empty pool")
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = Counter()
    for case in pool:
        counts.update(ngrams(case.actions, n))
    return NGramTable(n, counts, sum(counts.values()))


def rarity(case, table: NGramTable) -> float:
    """Mean inverse pool frequency of the path's n-grams (0 when it has none)."""
    grams = ngrams(case.actions, table.n)
    if not grams:
        return 0.0
    total = 0.0
    for g in grams:
        c = table.counts.get(g, 0)
        if c == 0:
            log.warning("n-gram %s absent from table; treating as count 1", g)
            c = 1
        total += 1.0 / c
    return total / len(grams)


def compute_objectives(case, table: NGramTable) -> ObjectiveVector:
    return ObjectiveVector(
        T=len(case.actions),
        R=float(sum(case.exec_times)),
        C=len(set(case.states)),
        A=len(set(case.actions)),
        O=len(case.objects),
        S=len(case.scenes),
        U=len(case.ui),
        N=rarity(case, table),
    )


def dominates(a, b) -> bool:
    """True if minimization vector ``a`` Pareto-dominates ``b``."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def pareto_mask(F: np.ndarray) -> np.ndarray:
    """Boolean mask of non-dominated rows of a minimization matrix."""
    n = len(F)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        le = np.all(F <= F[i], axis=1)
        lt = np.any(F < F[i], axis=1)
        if np.any(le & lt):
            keep[i] = False
    return keep


def pareto_front(pool):
    """Non-dominated cases of ``[(case, ObjectiveVector), ...]`` in input order.

    Path length and execution time are minimized, every other objective is
    maximized. Cases with identical vectors are all kept.
    """
    if not pool:
        return []
    F = np.array([v.as_minimization() for _, v in pool], dtype=float)
    mask = pareto_mask(F)
    return [case for (case, _), k in zip(pool, mask) if k]


def score_pool(cases, n=2):
    """Attach objectives to every case (in place) and return the table used."""
    table = build_ngram_table(cases, n)
    for case in cases:
        case.objectives = compute_objectives(case, table)
    return table


def optimize_suite(cases, n=2):
    if not cases:
        return []
    score_pool(cases, n)
    return pareto_front([(c, c.objectives) for c in cases])


def save_suite(cases, path):
    Path(path).write_text(json.dumps([c.to_json() for c in cases], sort_keys=True, indent=1), encoding="utf-8")


def load_suite(path):
    from .graph import TestCase

    return [TestCase.from_json(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]
