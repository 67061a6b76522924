"""Diversity metrics over the actives held in a scaffold memory."""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .chem import Fingerprint, tanimoto_distances
from .chem.fingerprint import stack
from .shaping import ScaffoldMemory


def count_scaffolds(memory: ScaffoldMemory) -> tuple[int, int]:
    """Distinct molecular and topological scaffolds among the actives (``∅`` counts once)."""
    return len(memory.counts), len(memory.topological)


def diverse_actives_count(memory: ScaffoldMemory) -> int:
    return len(memory.diverse)


def recount_scaffolds(actives) -> tuple[int, int]:
    """From-scratch recount, used to cross-check the incremental bookkeeping."""
    return len({a.scaffold for a in actives}), len({a.topological for a in actives})


def distance_matrix(fps: Sequence[Fingerprint]) -> np.ndarray:
    m = stack(fps)
    return np.stack([tanimoto_distances(fp, m) for fp in fps]) if fps else np.zeros((0, 0))


def is_packing(fps: Sequence[Fingerprint], d: float) -> bool:
    dist = distance_matrix(fps)
    off = ~np.eye(len(fps), dtype=bool)
    return bool(np.all(dist[off] >= d))


def packing_exact(fps: Sequence[Fingerprint], d: float) -> int:
    """Largest subset whose members are pairwise at least ``d`` apart (brute force, n ≤ 15)."""
    n = len(fps)
    if n > 15:
        raise ValueError("exact packing is limited to 15 fingerprints")
    if n == 0:
        return 0
    ok = distance_matrix(fps) >= d
    for size in range(n, 0, -1):
        for subset in itertools.combinations(range(n), size):
            if all(ok[a, b] for a, b in itertools.combinations(subset, 2)):
                return size
    return 0
