"""Circular (Morgan-style) bit fingerprints and Tanimoto distances.

Fingerprints are stored as ``nbits // 64`` little-endian ``uint64`` words so
batches of them stack into a 2-D array and distances vectorise with
``np.bitwise_count``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import MolGraph

MASK64 = (1 << 64) - 1
DEFAULT_HASH_SEED = 0x5EED_D1CE
_ELEMENT_CODE = {"C": 6, "N": 7, "O": 8, "S": 16, "F": 9}


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def hash_ints(seed: int, values: Sequence[int]) -> int:
    """Platform-independent 64-bit hash of an integer sequence."""
    h = splitmix64(seed & MASK64)
    for x in values:
        h = splitmix64(h ^ (x & MASK64))
    return h


@dataclass(frozen=True, eq=False)
class Fingerprint:
    words: np.ndarray  # uint64, shape (nbits // 64,)
    popcount: int

    @property
    def nbits(self) -> int:
        return 64 * len(self.words)

    @classmethod
    def from_bits(cls, bits: Sequence[int], nbits: int = 2048) -> "Fingerprint":
        if nbits % 64:
            raise ValueError("nbits must be a multiple of 64")
        words = np.zeros(nbits // 64, dtype=np.uint64)
        for b in set(bits):
            words[b // 64] |= np.uint64(1) << np.uint64(b % 64)
        words.flags.writeable = False
        return cls(words, int(np.bitwise_count(words).sum()))

    def on_bits(self) -> list[int]:
        return [i for i in range(self.nbits) if (int(self.words[i // 64]) >> (i % 64)) & 1]

    def __eq__(self, other) -> bool:
        return isinstance(other, Fingerprint) and np.array_equal(self.words, other.words)

    def __hash__(self) -> int:
        return hash(self.words.tobytes())


def fingerprint(g: MolGraph, radius: int = 2, nbits: int = 2048, seed: int = DEFAULT_HASH_SEED) -> Fingerprint:
    """Hash every atom environment up to ``radius`` bonds into ``nbits`` buckets.

    As in Morgan fingerprints, an environment contributes a bit only if it
    covers a bond set not already seen; among atoms whose environments cover
    the same bonds at the same radius, the smallest identifier wins.
    """
    ring = g.ring_membership
    ids = [
        hash_ints(seed, (_ELEMENT_CODE[el], g.degrees[v], sum(o for _, o in g.neighbors[v]), int(ring[v])))
        for v, el in enumerate(g.elements)
    ]
    bits = [i % nbits for i in ids]
    bond_index = {(a, b): k for k, (a, b, _) in enumerate(g.bonds)}
    envs = [frozenset() for _ in range(len(g))]
    seen = {frozenset()}
    for r in range(1, radius + 1):
        new_ids, new_envs = [], []
        for v in range(len(g)):
            env = sorted((o, ids[w]) for w, o in g.neighbors[v])
            flat = [r, ids[v]]
            for o, w in env:
                flat.extend((o, w))
            new_ids.append(hash_ints(seed, flat))
            cover = set(envs[v])
            for w, _ in g.neighbors[v]:
                cover.add(bond_index[(min(v, w), max(v, w))])
                cover |= envs[w]
            new_envs.append(frozenset(cover))
        for v in sorted(range(len(g)), key=lambda v: new_ids[v]):
            if new_envs[v] in seen:
                continue
            seen.add(new_envs[v])
            bits.append(new_ids[v] % nbits)
        ids, envs = new_ids, new_envs
    return Fingerprint.from_bits(bits, nbits)


def tanimoto_distance(a: Fingerprint, b: Fingerprint) -> float:
    """``1 - |a & b| / |a | b|``; two empty fingerprints are at distance 0."""
    if a.nbits != b.nbits:
        raise ValueError("fingerprint widths differ")
    union = int(np.bitwise_count(a.words | b.words).sum())
    if union == 0:
        return 0.0
    inter = int(np.bitwise_count(a.words & b.words).sum())
    return 1.0 - inter / union


def stack(fps: Sequence[Fingerprint]) -> np.ndarray:
    if not fps:
        return np.zeros((0, 32), dtype=np.uint64)
    return np.stack([f.words for f in fps])


def tanimoto_distances(a: Fingerprint, matrix: np.ndarray) -> np.ndarray:
    """Distances from ``a`` to every row of a stacked fingerprint matrix."""
    if len(matrix) == 0:
        return np.zeros(0)
    inter = np.bitwise_count(matrix & a.words).sum(axis=1)
    union = np.bitwise_count(matrix | a.words).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        d = 1.0 - inter / union
    return np.where(union == 0, 0.0, d)
