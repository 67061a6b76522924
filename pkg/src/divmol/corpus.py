"""Seeded random generator of valid molecule lines for prior pretraining.

Molecules are grown as carbon skeletons (chains, pendant rings, fused
rings), decorated with heteroatoms and multiple bonds where valence allows,
then written out in canonical form (or from a random atom ranking).
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np

from .chem import MAX_VALENCE, MolGraph, ParseError, canonical_ranks, parse, write

RING_SIZES = (3, 4, 5, 6, 7)
RING_SIZE_P = (0.04, 0.04, 0.34, 0.48, 0.10)
HETERO = ("N", "O", "S", "F")
HETERO_P = (0.45, 0.30, 0.12, 0.13)
BOND_UPGRADE_P = 0.08
ATOM_COUNT_RANGE = (4, 16)
RING_COUNT_P = (0.2, 0.5, 0.3)


class CorpusEmpty(ValueError):
    pass


class CorpusInvalidLine(ValueError):
    def __init__(self, lineno: int, line: str):
        super().__init__(f"line {lineno}: {line!r} is not a valid molecule")
        self.lineno = lineno


def _skeleton(rng: np.random.Generator) -> tuple[int, list[list[int]]]:
    n_atoms_target = int(rng.integers(ATOM_COUNT_RANGE[0], ATOM_COUNT_RANGE[1] + 1))
    n_rings = int(rng.choice(len(RING_COUNT_P), p=RING_COUNT_P))
    adj: list[set[int]] = []

    def new_atom() -> int:
        adj.append(set())
        return len(adj) - 1

    def link(a: int, b: int) -> None:
        adj[a].add(b)
        adj[b].add(a)

    def attach_point() -> int | None:
        open_ = [v for v in range(len(adj)) if len(adj[v]) < 3]
        return int(rng.choice(open_)) if open_ else None

    new_atom()
    for _ in range(n_rings):
        size = int(rng.choice(RING_SIZES, p=RING_SIZE_P))
        fuse = len(adj) > 1 and rng.random() < 0.3
        if fuse:
            # share an existing bond whose ends both have degree 2
            cands = [(a, b) for a in range(len(adj)) for b in adj[a] if a < b and len(adj[a]) == 2 and len(adj[b]) == 2]
            if cands:
                a, b = cands[int(rng.integers(len(cands)))]
                prev = a
                for _ in range(size - 2):
                    v = new_atom()
                    link(prev, v)
                    prev = v
                link(prev, b)
                continue
        anchor = attach_point()
        if anchor is None:
            break
        first = new_atom()
        if rng.random() < 0.25 and len(adj) > 2:
            # short linker between the anchor and the new ring
            link(anchor, first)
            anchor, first = first, new_atom()
        link(anchor, first)
        prev = first
        for _ in range(size - 1):
            v = new_atom()
            link(prev, v)
            prev = v
        link(prev, first)
    while len(adj) < n_atoms_target:
        anchor = attach_point()
        if anchor is None:
            break
        link(anchor, new_atom())
    return len(adj), [sorted(s) for s in adj]


def random_molecule(rng: np.random.Generator) -> MolGraph:
    n, adj = _skeleton(rng)
    orders = {(a, b): 1 for a in range(n) for b in adj[a] if a < b}
    used = [len(adj[v]) for v in range(n)]
    for (a, b) in list(orders):
        if rng.random() < BOND_UPGRADE_P:
            o = 3 if rng.random() < 0.15 else 2
            if used[a] + o - 1 <= 4 and used[b] + o - 1 <= 4:
                orders[(a, b)] = o
                used[a] += o - 1
                used[b] += o - 1
    elements = ["C"] * n
    for v in range(n):
        if rng.random() < 0.22:
            el = str(rng.choice(HETERO, p=HETERO_P))
            if used[v] <= MAX_VALENCE[el]:
                elements[v] = el
    bonds = tuple(sorted((a, b, o) for (a, b), o in orders.items()))
    return MolGraph(tuple(elements), bonds)


def generate_corpus(n: int, seed: int = 0, max_len: int = 32, randomize: bool = False) -> list[str]:
    """``n`` valid molecule lines, each at most ``max_len`` glyphs.

    Lines are canonical spellings unless ``randomize`` is set, in which case
    each molecule is written from a random atom ranking.
    """
    rng = np.random.default_rng(seed)
    lines: list[str] = []
    while len(lines) < n:
        g = random_molecule(rng)
        ranks = list(rng.permutation(len(g))) if randomize else canonical_ranks(g)
        try:
            s = write(g, ranks, max_ring_digits=4)
        except ValueError:
            continue
        if len(s) > max_len:
            continue
        try:
            parse(s)
        except ParseError:
            continue
        lines.append(s)
    return lines


def read_corpus(path: str | Path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise CorpusEmpty(f"corpus file {path} does not exist")
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln]
    validate_corpus(lines)
    return lines


def validate_corpus(lines: Iterable[str]) -> None:
    lines = list(lines)
    if not lines:
        raise CorpusEmpty("corpus is empty")
    for i, ln in enumerate(lines, 1):
        try:
            parse(ln)
        except ParseError:
            raise CorpusInvalidLine(i, ln) from None


def write_corpus(lines: Iterable[str], path: str | Path) -> None:
    Path(path).write_text("".join(f"{ln}\n" for ln in lines), encoding="utf-8")
