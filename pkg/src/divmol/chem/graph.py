from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence


@dataclass(frozen=True)
class MolGraph:
    """Heavy-atom molecular graph.

    ``bonds`` holds ``(i, j, order)`` triples with ``i < j``; hydrogens are
    implicit.
    """

    elements: tuple[str, ...]
    bonds: tuple[tuple[int, int, int], ...]

    def __len__(self) -> int:
        return len(self.elements)

    @cached_property
    def neighbors(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per atom, the ``(neighbor, order)`` pairs sorted by neighbor index."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.elements]
        for a, b, o in self.bonds:
            adj[a].append((b, o))
            adj[b].append((a, o))
        return tuple(tuple(sorted(x)) for x in adj)

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(n) for n in self.neighbors)

    @cached_property
    def ring_bonds(self) -> frozenset[tuple[int, int]]:
        """Bonds that lie on at least one cycle (the non-bridges)."""
        n = len(self.elements)
        disc = [-1] * n
        low = [0] * n
        bridges: set[tuple[int, int]] = set()
        timer = 0
        for root in range(n):
            if disc[root] >= 0:
                continue
            disc[root] = low[root] = timer
            timer += 1
            # iterative DFS: (vertex, parent, neighbor iterator)
            stack = [(root, -1, iter(self.neighbors[root]))]
            while stack:
                v, parent, it = stack[-1]
                advanced = False
                for w, _ in it:
                    if w == parent:
                        continue
                    if disc[w] < 0:
                        disc[w] = low[w] = timer
                        timer += 1
                        stack.append((w, v, iter(self.neighbors[w])))
                        advanced = True
                        break
                    low[v] = min(low[v], disc[w])
                if advanced:
                    continue
                stack.pop()
                if parent >= 0:
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        bridges.add((min(v, parent), max(v, parent)))
        return frozenset((a, b) for a, b, _ in self.bonds if (a, b) not in bridges)

    @cached_property
    def ring_membership(self) -> tuple[bool, ...]:
        flags = [False] * len(self.elements)
        for a, b in self.ring_bonds:
            flags[a] = flags[b] = True
        return tuple(flags)

    @property
    def has_ring(self) -> bool:
        return bool(self.ring_bonds)

    @cached_property
    def ring_sizes(self) -> frozenset[int]:
        """Sizes of the smallest cycle through each ring bond."""
        sizes = set()
        for a, b in self.ring_bonds:
            # BFS from a to b without using the bond a-b
            dist = {a: 0}
            queue = deque([a])
            while queue and b not in dist:
                v = queue.popleft()
                for w, _ in self.neighbors[v]:
                    if w in dist or (v == a and w == b):
                        continue
                    dist[w] = dist[v] + 1
                    queue.append(w)
            sizes.add(dist[b] + 1)
        return frozenset(sizes)

    def bond_orders(self) -> frozenset[int]:
        return frozenset(o for _, _, o in self.bonds)

    def subgraph(self, keep: Sequence[int]) -> "MolGraph":
        """Induced subgraph on ``keep`` (reindexed in the given order)."""
        remap = {old: new for new, old in enumerate(keep)}
        bonds = []
        for a, b, o in self.bonds:
            if a in remap and b in remap:
                x, y = remap[a], remap[b]
                bonds.append((min(x, y), max(x, y), o))
        return MolGraph(tuple(self.elements[i] for i in keep), tuple(sorted(bonds)))

    def permuted(self, perm: Sequence[int]) -> "MolGraph":
        """Same molecule with atom ``i`` moved to position ``perm[i]``."""
        elements = [""] * len(self.elements)
        for old, new in enumerate(perm):
            elements[new] = self.elements[old]
        bonds = []
        for a, b, o in self.bonds:
            x, y = perm[a], perm[b]
            bonds.append((min(x, y), max(x, y), o))
        return MolGraph(tuple(elements), tuple(sorted(bonds)))
