"""Tokens and parser for the restricted molecule line notation.

The notation is a small SMILES subset: the plain elements ``C N O S F``,
``=`` and ``#`` bond prefixes, ``( )`` branches and single-digit ring
closures. Hydrogens are implicit and there is no aromaticity, charge or
stereo information.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

ELEMENTS = ("C", "N", "O", "S", "F")
MAX_VALENCE = {"C": 4, "N": 3, "O": 2, "S": 2, "F": 1}
BOND_GLYPHS = {"=": 2, "#": 3}
BOND_SYMBOL = {1: "", 2: "=", 3: "#"}

START = "^"
STOP = "$"

# The generative vocabulary only carries ring labels 1-4; the parser accepts
# 1-9 so canonical strings of dense polycycles still round-trip.
VOCAB_RING_DIGITS = ("1", "2", "3", "4")
PARSER_RING_DIGITS = tuple("123456789")


@dataclass(frozen=True)
class Token:
    id: int
    glyph: str


class Vocabulary:
    """Dense token index with distinguished START/STOP tokens."""

    def __init__(self, glyphs: Sequence[str]):
        glyphs = list(glyphs)
        if START not in glyphs or STOP not in glyphs:
            raise ValueError("vocabulary needs START and STOP glyphs")
        if len(set(glyphs)) != len(glyphs):
            raise ValueError("duplicate glyphs in vocabulary")
        self.tokens = tuple(Token(i, g) for i, g in enumerate(glyphs))
        self._index = {g: i for i, g in enumerate(glyphs)}
        self.start = self._index[START]
        self.stop = self._index[STOP]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, glyph: str) -> bool:
        return glyph in self._index

    def index(self, glyph: str) -> int:
        return self._index[glyph]

    def encode(self, molecule: str) -> list[int]:
        """Framed id sequence ``START body STOP`` for a molecule string."""
        return [self.start] + [self._index[g] for g in molecule] + [self.stop]

    def decode(self, ids: Sequence[int]) -> str:
        """Glyph string for ``ids`` with any START/STOP framing removed."""
        return "".join(self.tokens[i].glyph for i in ids if i not in (self.start, self.stop))

    @property
    def glyphs(self) -> tuple[str, ...]:
        return tuple(t.glyph for t in self.tokens)


DEFAULT_VOCAB = Vocabulary(
    [START, STOP, *ELEMENTS, *BOND_GLYPHS, "(", ")", *VOCAB_RING_DIGITS]
)


class ParseError(ValueError):
    """Base class for every reason a token string is not a molecule."""


class EmptyInput(ParseError):
    pass


class UnknownToken(ParseError):
    pass


class UnbalancedParen(ParseError):
    pass


class UnclosedRing(ParseError):
    pass


class ValenceExceeded(ParseError):
    pass


class MalformedSyntax(ParseError):
    """Misplaced bond symbol, empty branch, self-loop or duplicate bond."""


Tokens = Union[str, Sequence[str]]


def parse(tokens: Tokens):
    """Parse a glyph string (or glyph sequence) into a :class:`MolGraph`.

    Raises a :class:`ParseError` subclass when the input is not a valid
    connected molecule under the restricted grammar.
    """
    from .graph import MolGraph

    glyphs = list(tokens)
    if not glyphs:
        raise EmptyInput("empty molecule")
    for pos, g in enumerate(glyphs):
        if g in (START, STOP):
            raise UnknownToken(f"framing token {g!r} at position {pos}")
        if g not in MAX_VALENCE and g not in BOND_GLYPHS and g not in "()" and g not in PARSER_RING_DIGITS:
            raise UnknownToken(f"unknown token {g!r} at position {pos}")

    depth = 0
    for g in glyphs:
        if g == "(":
            depth += 1
        elif g == ")":
            depth -= 1
            if depth < 0:
                raise UnbalancedParen("')' without matching '('")
    if depth:
        raise UnbalancedParen(f"{depth} unclosed branch(es)")

    elements: list[str] = []
    bonds: dict[tuple[int, int], int] = {}
    open_rings: dict[str, tuple[int, int | None]] = {}
    stack: list[int] = []
    prev: int | None = None
    pending: int | None = None
    last = ""

    def add_bond(a: int, b: int, order: int) -> None:
        if a == b:
            raise MalformedSyntax("ring closure onto the same atom")
        key = (min(a, b), max(a, b))
        if key in bonds:
            raise MalformedSyntax(f"duplicate bond between atoms {a} and {b}")
        bonds[key] = order

    for g in glyphs:
        if g in MAX_VALENCE:
            idx = len(elements)
            elements.append(g)
            if prev is not None:
                add_bond(prev, idx, pending or 1)
            elif pending is not None:
                raise MalformedSyntax("bond symbol before the first atom")
            prev, pending = idx, None
        elif g in BOND_GLYPHS:
            if prev is None or pending is not None:
                raise MalformedSyntax(f"misplaced bond symbol {g!r}")
            pending = BOND_GLYPHS[g]
        elif g == "(":
            if prev is None or pending is not None or last == "(":
                raise MalformedSyntax("branch must follow an atom")
            stack.append(prev)
        elif g == ")":
            if pending is not None or last == "(":
                raise MalformedSyntax("empty or dangling branch")
            prev = stack.pop()
        else:
            if prev is None:
                raise MalformedSyntax("ring label before the first atom")
            if g in open_rings:
                other, order = open_rings.pop(g)
                if pending is not None and order is not None and pending != order:
                    raise MalformedSyntax(f"conflicting bond orders on ring {g}")
                add_bond(other, prev, pending or order or 1)
            else:
                open_rings[g] = (prev, pending)
            pending = None
        last = g

    if pending is not None:
        raise MalformedSyntax("dangling bond symbol at end of input")
    if open_rings:
        raise UnclosedRing(f"unclosed ring label(s) {sorted(open_rings)}")

    used = [0] * len(elements)
    for (a, b), order in bonds.items():
        used[a] += order
        used[b] += order
    for i, (el, v) in enumerate(zip(elements, used)):
        if v > MAX_VALENCE[el]:
            raise ValenceExceeded(f"atom {i} ({el}) has valence {v} > {MAX_VALENCE[el]}")

    return MolGraph(tuple(elements), tuple(sorted((a, b, o) for (a, b), o in bonds.items())))


def is_valid(tokens: Tokens) -> bool:
    try:
        parse(tokens)
    except ParseError:
        return False
    return True
