from __future__ import annotations

from dataclasses import dataclass

from .canon import canonical_string
from .graph import MolGraph

EMPTY_SCAFFOLD = "∅"


@dataclass(frozen=True)
class ScaffoldKey:
    canonical: str
    kind: str  # "molecular" or "topological"

    @property
    def is_empty(self) -> bool:
        return self.canonical == EMPTY_SCAFFOLD


def scaffold_graph(g: MolGraph) -> MolGraph | None:
    """Ring systems plus linkers, or ``None`` for a ring-free molecule.

    Degree-1 atoms are stripped repeatedly; ring atoms never reach degree 1
    so only side chains disappear.
    """
    if not g.has_ring:
        return None
    degree = list(g.degrees)
    alive = [True] * len(g)
    leaves = [v for v, d in enumerate(degree) if d == 1]
    while leaves:
        v = leaves.pop()
        if not alive[v]:
            continue
        alive[v] = False
        for w, _ in g.neighbors[v]:
            if alive[w]:
                degree[w] -= 1
                if degree[w] == 1:
                    leaves.append(w)
    return g.subgraph([v for v in range(len(g)) if alive[v]])


def molecular_scaffold(g: MolGraph) -> ScaffoldKey:
    core = scaffold_graph(g)
    if core is None:
        return ScaffoldKey(EMPTY_SCAFFOLD, "molecular")
    return ScaffoldKey(canonical_string(core), "molecular")


def topological_scaffold(g: MolGraph) -> ScaffoldKey:
    core = scaffold_graph(g)
    if core is None:
        return ScaffoldKey(EMPTY_SCAFFOLD, "topological")
    generic = MolGraph(("C",) * len(core), tuple((a, b, 1) for a, b, _ in core.bonds))
    return ScaffoldKey(canonical_string(generic), "topological")
