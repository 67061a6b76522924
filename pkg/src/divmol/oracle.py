"""Synthetic extrinsic reward functions over parsed molecules.

An oracle is a weighted list of structural predicates. In dense mode the
score is the matched weight fraction; in sparse mode only a molecule that
matches every predicate scores ``full_score``, anything else earns
``0.2 * matched / total`` which stays below the activity threshold.

Oracle files are line oriented::

    # comment
    mode sparse
    ring_of_size 5 1
    contains_element S 1
    atom_count_in_range 10 18 1

Each predicate line is ``kind arg* weight``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .chem import ELEMENTS, MolGraph, ParseError, parse

INVALID_REWARD = -1.0
SPARSE_PARTIAL = 0.2


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class FeaturePredicate:
    kind: str
    args: tuple = ()

    def __post_init__(self):
        if self.kind not in _PREDICATES:
            raise OracleError(f"unknown predicate kind {self.kind!r}")
        arity, _ = _PREDICATES[self.kind]
        if len(self.args) != arity:
            raise OracleError(f"{self.kind} takes {arity} argument(s), got {len(self.args)}")

    def __call__(self, g: MolGraph) -> bool:
        return _PREDICATES[self.kind][1](g, *self.args)


def _ring_of_size(g: MolGraph, k: int) -> bool:
    return k in g.ring_sizes


def _contains_element(g: MolGraph, el: str) -> bool:
    return el in g.elements


def _bond_order_present(g: MolGraph, order: int) -> bool:
    return order in g.bond_orders()


def _atom_count_in_range(g: MolGraph, lo: int, hi: int) -> bool:
    return lo <= len(g) <= hi


def _scaffold_nonempty(g: MolGraph) -> bool:
    return g.has_ring


_PREDICATES: dict[str, tuple[int, Callable[..., bool]]] = {
    "ring_of_size": (1, _ring_of_size),
    "contains_element": (1, _contains_element),
    "bond_order_present": (1, _bond_order_present),
    "atom_count_in_range": (2, _atom_count_in_range),
    "scaffold_nonempty": (0, _scaffold_nonempty),
}


@dataclass(frozen=True)
class OracleSpec:
    features: tuple[tuple[FeaturePredicate, float], ...]
    mode: str = "dense"
    full_score: float = 1.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.mode not in ("dense", "sparse"):
            raise OracleError(f"mode must be dense or sparse, not {self.mode!r}")
        if not self.features:
            raise OracleError("an oracle needs at least one feature")
        if any(w < 0 for _, w in self.features) or sum(w for _, w in self.features) <= 0:
            raise OracleError("weights must be non-negative with a positive sum")

    def score_graph(self, g: MolGraph) -> float:
        matched = [pred(g) for pred, _ in self.features]
        if self.mode == "dense":
            total = sum(w for _, w in self.features)
            return sum(w for (_, w), hit in zip(self.features, matched) if hit) / total
        if all(matched):
            return self.full_score
        return SPARSE_PARTIAL * sum(matched) / len(matched)

    def __call__(self, tokens) -> float:
        return evaluate(self, tokens)


def evaluate(spec: OracleSpec, tokens) -> float:
    """Extrinsic reward of a glyph string: -1 if it does not parse."""
    try:
        g = parse(tokens)
    except ParseError:
        return INVALID_REWARD
    return spec.score_graph(g)


def _feature(kind: str, *args, weight: float = 1.0) -> tuple[FeaturePredicate, float]:
    return FeaturePredicate(kind, tuple(args)), weight


def builtin_oracles() -> dict[str, OracleSpec]:
    dense = OracleSpec(
        (
            _feature("ring_of_size", 6),
            _feature("ring_of_size", 5),
            _feature("ring_of_size", 7),
            _feature("contains_element", "O"),
            _feature("contains_element", "S"),
            _feature("contains_element", "F"),
            _feature("bond_order_present", 3),
            _feature("atom_count_in_range", 12, 18),
        ),
        mode="dense",
        name="dense-easy",
    )
    sparse = OracleSpec(
        (
            _feature("ring_of_size", 5),
            _feature("ring_of_size", 6),
            _feature("contains_element", "S"),
            _feature("contains_element", "N"),
            _feature("atom_count_in_range", 12, 18),
        ),
        mode="sparse",
        name="sparse-hard",
    )
    return {"dense-easy": dense, "sparse-hard": sparse}


def _coerce(arg: str):
    try:
        return int(arg)
    except ValueError:
        if arg in ELEMENTS:
            return arg
        raise OracleError(f"bad predicate argument {arg!r}") from None


def parse_oracle_file(path: str | Path) -> OracleSpec:
    path = Path(path)
    if not path.exists():
        raise OracleError(f"oracle file {path} not found")
    mode, full = "dense", 1.0
    features = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "mode":
            mode = parts[1]
            continue
        if parts[0] == "full_score":
            full = float(parts[1])
            continue
        if len(parts) < 2:
            raise OracleError(f"{path}:{lineno}: expected 'kind arg* weight'")
        try:
            weight = float(parts[-1])
        except ValueError:
            raise OracleError(f"{path}:{lineno}: weight {parts[-1]!r} is not a number") from None
        features.append((FeaturePredicate(parts[0], tuple(_coerce(a) for a in parts[1:-1])), weight))
    return OracleSpec(tuple(features), mode=mode, full_score=full, name=f"file:{path}")


def load_oracle(name: str) -> OracleSpec:
    """Resolve ``dense-easy``, ``sparse-hard`` or ``file:<path>``."""
    if name.startswith("file:"):
        return parse_oracle_file(name[len("file:"):])
    table = builtin_oracles()
    if name not in table:
        raise OracleError(f"unknown oracle {name!r}; choose from {sorted(table)} or file:<path>")
    return table[name]


def score_batch(spec: OracleSpec, molecules: Sequence[str]) -> list[float]:
    return [evaluate(spec, m) for m in molecules]
