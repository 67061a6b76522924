"""Canonical atom ranking and line-notation writer.

Ranking is individualization-refinement: colour refinement on
``(element, degree, bond orders)`` until stable, then branch on every atom
of the first non-singleton cell and keep the lexicographically smallest
leaf certificate. Automorphisms discovered at equal leaves prune sibling
branches, which keeps highly symmetric side chains cheap.
"""

from __future__ import annotations

from typing import Sequence

from .grammar import BOND_SYMBOL, PARSER_RING_DIGITS
from .graph import MolGraph


def _rerank(keys: list) -> list[int]:
    index = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [index[k] for k in keys]


def _refine(g: MolGraph, colors: list[int]) -> list[int]:
    nbrs = g.neighbors
    count = len(set(colors))
    while True:
        keys = [
            (colors[v], tuple(sorted((o, colors[w]) for w, o in nbrs[v])))
            for v in range(len(colors))
        ]
        new = _rerank(keys)
        new_count = max(new) + 1 if new else 0
        if new_count == count:
            return new
        colors, count = new, new_count


def _initial_colors(g: MolGraph) -> list[int]:
    return _rerank([
        (el, g.degrees[v], tuple(sorted(o for _, o in g.neighbors[v])))
        for v, el in enumerate(g.elements)
    ])


def _certificate(g: MolGraph, pos: list[int]):
    order = sorted(range(len(pos)), key=pos.__getitem__)
    edges = sorted(
        (min(pos[a], pos[b]), max(pos[a], pos[b]), o) for a, b, o in g.bonds
    )
    return tuple(g.elements[v] for v in order), tuple(edges)


def _orbit_root(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def canonical_ranks(g: MolGraph) -> list[int]:
    """Canonical position of every atom (a permutation of ``range(len(g))``).

    Isomorphic graphs receive ranks under which they become identical.
    """
    n = len(g)
    if n == 0:
        return []
    best: list = [None, None]  # certificate, positions
    first: list = [None, None]
    autos: list[list[int]] = []

    def record_auto(src: list[int], dst: list[int]) -> None:
        # src/dst are position arrays with equal certificates
        inv_src = [0] * n
        for v, p in enumerate(src):
            inv_src[p] = v
        gamma = [0] * n
        for v, p in enumerate(dst):
            gamma[inv_src[p]] = v
        if any(i != x for i, x in enumerate(gamma)):
            autos.append(gamma)

    def search(colors: list[int], path: list[int]) -> None:
        colors = _refine(g, colors)
        if max(colors) == n - 1:
            cert = _certificate(g, colors)
            if first[0] is None:
                first[0], first[1] = cert, colors
            elif cert == first[0]:
                record_auto(first[1], colors)
            if best[0] is None or cert < best[0]:
                best[0], best[1] = cert, colors
            elif cert == best[0] and best[1] is not first[1]:
                record_auto(best[1], colors)
            return
        sizes: dict[int, int] = {}
        for c in colors:
            sizes[c] = sizes.get(c, 0) + 1
        target = min(c for c, s in sizes.items() if s > 1)
        cell = [v for v in range(n) if colors[v] == target]
        explored: list[int] = []
        for v in cell:
            if explored:
                parent = list(range(n))
                for gamma in autos:
                    if all(gamma[p] == p for p in path):
                        for x, y in enumerate(gamma):
                            rx, ry = _orbit_root(parent, x), _orbit_root(parent, y)
                            if rx != ry:
                                parent[rx] = ry
                root = _orbit_root(parent, v)
                if any(_orbit_root(parent, u) == root for u in explored):
                    continue
            explored.append(v)
            individual = _rerank([(c, 0 if u == v else 1) for u, c in enumerate(colors)])
            search(individual, path + [v])

    search(_initial_colors(g), [])
    return best[1]


def write(g: MolGraph, ranks: Sequence[int], max_ring_digits: int = len(PARSER_RING_DIGITS)) -> str:
    """Serialize ``g`` by depth-first traversal guided by ``ranks``.

    Traversal starts at the lowest-ranked atom and visits neighbours in
    rank order. Raises ``ValueError`` if more than ``max_ring_digits`` ring
    closures would be open at once.
    """
    n = len(g)
    if n == 0:
        return ""
    nbrs = [sorted(g.neighbors[v], key=lambda wo: ranks[wo[0]]) for v in range(n)]
    start = min(range(n), key=ranks.__getitem__)

    # first pass: DFS tree and visit order
    visit_order: list[int] = []
    seen = [False] * n
    children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    tree: set[tuple[int, int]] = set()
    stack = [(start, -1, 0)]
    while stack:
        v, parent, order = stack.pop()
        if seen[v]:
            continue
        seen[v] = True
        visit_order.append(v)
        if parent >= 0:
            children[parent].append((v, order))
            tree.add((min(v, parent), max(v, parent)))
        for w, o in reversed(nbrs[v]):
            if not seen[w]:
                stack.append((w, v, o))
    when = {v: i for i, v in enumerate(visit_order)}

    ring_at: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for a, b, o in g.bonds:
        if (a, b) not in tree:
            ring_at[a].append((b, o))
            ring_at[b].append((a, o))

    digits = PARSER_RING_DIGITS[:max_ring_digits]
    free = list(digits)
    open_label: dict[tuple[int, int], str] = {}
    out: list[str] = []

    def emit(v: int) -> None:
        out.append(g.elements[v])
        closes = sorted((w, o) for w, o in ring_at[v] if when[w] < when[v])
        opens = sorted((w, o) for w, o in ring_at[v] if when[w] > when[v])
        for w, _ in sorted(closes, key=lambda wo: ranks[wo[0]]):
            label = open_label.pop((w, v))
            out.append(label)
            free.append(label)
            free.sort(key=digits.index)
        for w, o in sorted(opens, key=lambda wo: ranks[wo[0]]):
            if not free:
                raise ValueError(f"more than {max_ring_digits} ring closures open at once")
            label = free.pop(0)
            open_label[(v, w)] = label
            out.append(BOND_SYMBOL[o] + label)

    # second pass: iterative emission (explicit stack avoids recursion limits)
    work: list = [("atom", start)]
    while work:
        kind, item = work.pop()
        if kind == "text":
            out.append(item)
            continue
        emit(item)
        kids = children[item]
        plan: list = []
        for i, (w, o) in enumerate(kids):
            last = i == len(kids) - 1
            if not last:
                plan.append(("text", "("))
            plan.append(("text", BOND_SYMBOL[o]) if o != 1 else None)
            plan.append(("atom", w))
            if not last:
                plan.append(("text", ")"))
        work.extend(reversed([p for p in plan if p is not None]))
    return "".join(out)


def canonical_string(g: MolGraph) -> str:
    return write(g, canonical_ranks(g))
