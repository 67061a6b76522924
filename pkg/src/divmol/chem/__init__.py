from .canon import canonical_ranks, canonical_string, write
from .fingerprint import (
    DEFAULT_HASH_SEED,
    Fingerprint,
    fingerprint,
    tanimoto_distance,
    tanimoto_distances,
)
from .grammar import (
    DEFAULT_VOCAB,
    ELEMENTS,
    MAX_VALENCE,
    START,
    STOP,
    EmptyInput,
    MalformedSyntax,
    ParseError,
    Token,
    UnbalancedParen,
    UnclosedRing,
    UnknownToken,
    ValenceExceeded,
    Vocabulary,
    is_valid,
    parse,
)
from .graph import MolGraph
from .scaffold import EMPTY_SCAFFOLD, ScaffoldKey, molecular_scaffold, scaffold_graph, topological_scaffold


def unparse(g: MolGraph) -> str:
    """Canonical line notation of ``g``; ``parse(unparse(g))`` is isomorphic to ``g``."""
    return canonical_string(g)


__all__ = [
    "DEFAULT_HASH_SEED", "DEFAULT_VOCAB", "ELEMENTS", "EMPTY_SCAFFOLD", "MAX_VALENCE",
    "START", "STOP", "EmptyInput", "Fingerprint", "MalformedSyntax", "MolGraph",
    "ParseError", "ScaffoldKey", "Token", "UnbalancedParen", "UnclosedRing",
    "UnknownToken", "ValenceExceeded", "Vocabulary", "canonical_ranks",
    "canonical_string", "fingerprint", "is_valid", "molecular_scaffold", "parse",
    "scaffold_graph", "tanimoto_distance", "tanimoto_distances",
    "topological_scaffold", "unparse", "write",
]
