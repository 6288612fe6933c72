"""Expression language for movement-rule conditions.

Grammar (whitespace-insensitive)::

    expr      := term ( ("and" | "or") term )*
    term      := primitive cmp (primitive | number ["deg"])
    primitive := Angle(id, id, id) | X(id) | Y(id)
    cmp       := "~=" | "<" | ">" | "<=" | ">="
    id        := [a-z_0-9]+

``Angle`` yields degrees, ``X``/``Y`` yield positions normalized by person
bounding-box height. ``~=`` is approximate equality whose tolerance comes
from the active threshold configuration (one tolerance per unit class,
optionally overridden per constraint). Boolean chains associate left.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union

from .errors import GrammarError, MissingFeatureError, UnitMismatchError

COMPARATORS = ("~=", "<=", ">=", "<", ">")

# Unit classes carried by expression nodes.
ANGLE = "angle"
POSITION = "position"


@dataclass(frozen=True)
class Angle:
    a: str
    b: str
    c: str

    @property
    def unit_class(self) -> str:
        return ANGLE

    @property
    def key(self) -> str:
        return angle_key(self.a, self.b, self.c)

    def joints(self) -> tuple[str, ...]:
        return (self.a, self.b, self.c)

    def pretty(self) -> str:
        return f"Angle({self.a}, {self.b}, {self.c})"


@dataclass(frozen=True)
class Coord:
    axis: str  # "x" | "y"
    joint: str

    @property
    def unit_class(self) -> str:
        return POSITION

    @property
    def key(self) -> str:
        return f"{self.axis}({self.joint})"

    def joints(self) -> tuple[str, ...]:
        return (self.joint,)

    def pretty(self) -> str:
        return f"{self.axis.upper()}({self.joint})"


@dataclass(frozen=True)
class Literal:
    value: float
    unit: Optional[str] = None  # "deg" or None

    @property
    def unit_class(self) -> Optional[str]:
        return ANGLE if self.unit == "deg" else None

    def pretty(self) -> str:
        text = format(self.value, "g")
        return f"{text} deg" if self.unit == "deg" else text


Primitive = Union[Angle, Coord]
Operand = Union[Angle, Coord, Literal]


@dataclass(frozen=True)
class Compare:
    op: str  # one of COMPARATORS
    left: Primitive
    right: Operand

    def pretty(self) -> str:
        return f"{self.left.pretty()} {self.op} {self.right.pretty()}"


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    left: "ConditionExpr"
    right: "ConditionExpr"

    def pretty(self) -> str:
        return f"{self.left.pretty()} {self.op} {self.right.pretty()}"


ConditionExpr = Union[Compare, BoolOp]


def angle_key(a: str, b: str, c: str) -> str:
    """Canonical feature key for the interior angle at vertex ``b``.

    The angle is symmetric in its endpoints, so they are ordered
    lexicographically to make ``Angle(a,b,c)`` and ``Angle(c,b,a)`` share
    one feature slot.
    """
    lo, hi = sorted((a, c))
    return f"angle({lo},{b},{hi})"


# --------------------------------------------------------------------------
# Tokenizer / parser
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<word>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<cmp>~=|<=|>=|<|>)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
    """,
    re.VERBOSE,
)

_IDENT_RE = re.compile(r"[a-z_0-9]+\Z")


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise GrammarError(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        tokens.append(_Token(kind, m.group(0), m.start()))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Optional[_Token]:
        tok = self.peek()
        if tok is not None:
            self.i += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.next()
        if tok is None:
            raise GrammarError(f"expected {what}, found end of input", len(self.text))
        if tok.kind != kind:
            raise GrammarError(f"expected {what}, found {tok.text!r}", tok.pos)
        return tok

    def parse(self) -> ConditionExpr:
        expr = self.parse_term()
        while True:
            tok = self.peek()
            if tok is not None and tok.kind == "word" and tok.text in ("and", "or"):
                self.next()
                rhs = self.parse_term()
                expr = BoolOp(tok.text, expr, rhs)
            else:
                break
        tok = self.peek()
        if tok is not None:
            raise GrammarError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return expr

    def parse_term(self) -> Compare:
        left = self.parse_primitive()
        tok = self.next()
        if tok is None:
            raise GrammarError("expected comparator, found end of input", len(self.text))
        if tok.kind != "cmp":
            raise GrammarError(f"unknown comparator {tok.text!r}", tok.pos)
        right = self.parse_operand()
        return Compare(tok.text, left, right)

    def parse_operand(self) -> Operand:
        tok = self.peek()
        if tok is None:
            raise GrammarError("expected operand, found end of input", len(self.text))
        if tok.kind == "number":
            self.next()
            unit = None
            nxt = self.peek()
            if nxt is not None and nxt.kind == "word" and nxt.text == "deg":
                self.next()
                unit = "deg"
            return Literal(float(tok.text), unit)
        return self.parse_primitive()

    def parse_primitive(self) -> Primitive:
        tok = self.next()
        if tok is None:
            raise GrammarError("expected primitive, found end of input", len(self.text))
        if tok.kind != "word":
            raise GrammarError(f"expected primitive, found {tok.text!r}", tok.pos)
        name = tok.text.lower()
        if name == "angle":
            self.expect("lparen", "'('")
            a = self.parse_ident()
            self.expect("comma", "','")
            b = self.parse_ident()
            self.expect("comma", "','")
            c = self.parse_ident()
            self.expect("rparen", "')'")
            return Angle(a, b, c)
        if name in ("x", "y"):
            self.expect("lparen", "'('")
            joint = self.parse_ident()
            self.expect("rparen", "')'")
            return Coord(name, joint)
        raise GrammarError(f"unknown primitive {tok.text!r}", tok.pos)

    def parse_ident(self) -> str:
        tok = self.next()
        if tok is None:
            raise GrammarError("expected joint name, found end of input", len(self.text))
        if tok.kind not in ("word", "number") or not _IDENT_RE.match(tok.text):
            raise GrammarError(f"invalid joint name {tok.text!r}", tok.pos)
        return tok.text


def parse_condition(text: str) -> ConditionExpr:
    """Parse a condition string into its expression tree.

    Raises GrammarError with a character position on malformed input.
    """
    return _Parser(text).parse()


def pretty(expr: ConditionExpr) -> str:
    """Canonical text form; ``parse_condition(pretty(e))`` rebuilds ``e``."""
    return expr.pretty()


# --------------------------------------------------------------------------
# Tree utilities
# --------------------------------------------------------------------------

def iter_primitives(expr: ConditionExpr) -> Iterator[Primitive]:
    if isinstance(expr, BoolOp):
        yield from iter_primitives(expr.left)
        yield from iter_primitives(expr.right)
    elif isinstance(expr, Compare):
        yield expr.left
        if not isinstance(expr.right, Literal):
            yield expr.right
    else:  # pragma: no cover - defensive
        raise TypeError(f"not a condition expression: {expr!r}")


def referenced_joints(expr: ConditionExpr) -> set[str]:
    joints: set[str] = set()
    for prim in iter_primitives(expr):
        joints.update(prim.joints())
    return joints


_FLIP = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}


def flip_y_comparisons(expr: ConditionExpr) -> ConditionExpr:
    """Convert Y-orderings authored in a y-up rulebook to image coordinates.

    Rule documents follow the rulebook template where "A below B" is written
    ``Y(A) < Y(B)``. Keypoints live in image coordinates (y grows downward),
    so ordering comparators whose left side is a Y primitive are flipped.
    Approximate equality is direction-free and passes through.
    """
    if isinstance(expr, BoolOp):
        return BoolOp(expr.op, flip_y_comparisons(expr.left), flip_y_comparisons(expr.right))
    if isinstance(expr, Compare):
        if isinstance(expr.left, Coord) and expr.left.axis == "y" and expr.op in _FLIP:
            return Compare(_FLIP[expr.op], expr.left, expr.right)
        return expr
    raise TypeError(f"not a condition expression: {expr!r}")


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

_UNKNOWN = object()


class FeatureLookup:
    """Minimal interface the evaluator needs: value(key) or a miss reason."""

    def lookup(self, key: str) -> tuple[Optional[float], str]:
        raise NotImplementedError


class MappingFeatures(FeatureLookup):
    """Adapter for plain dicts, used in tests and direct evaluation."""

    def __init__(self, values: Mapping[str, float]):
        self.values = dict(values)

    def lookup(self, key: str) -> tuple[Optional[float], str]:
        if key in self.values:
            return self.values[key], ""
        return None, "not computed"


def _operand_value(node: Operand, features: FeatureLookup):
    if isinstance(node, Literal):
        return node.value, None
    value, reason = features.lookup(node.key)
    if value is None:
        return _UNKNOWN, (node.key, reason)
    return value, None


def _compare_units(node: Compare) -> str:
    left_class = node.left.unit_class
    right_class = node.right.unit_class
    if right_class is not None and right_class != left_class:
        raise UnitMismatchError(
            f"cannot compare {left_class} with {right_class} in {node.pretty()!r}"
        )
    return left_class


def evaluate_condition(
    expr: ConditionExpr,
    features: Union[FeatureLookup, Mapping[str, float]],
    thresholds,
    tolerance_override: Optional[float] = None,
) -> bool:
    """Evaluate a condition against per-frame features.

    ``thresholds`` supplies ``angle_tolerance`` (degrees) and
    ``position_tolerance`` (bbox-height units) for ``~=``;
    ``tolerance_override`` takes precedence over both when given.

    Comparisons over unavailable features propagate an unknown state through
    the boolean connectives (three-valued, symmetric, so commutativity
    holds); an unknown result at the top raises MissingFeatureError naming
    the first unavailable feature in tree order.
    """
    if not isinstance(features, FeatureLookup):
        features = MappingFeatures(features)
    misses: list[tuple[str, str]] = []
    result = _evaluate(expr, features, thresholds, tolerance_override, misses)
    if result is _UNKNOWN:
        feature, reason = misses[0]
        raise MissingFeatureError(feature, reason)
    return result


def _evaluate(expr, features, thresholds, tolerance_override, misses):
    if isinstance(expr, BoolOp):
        left = _evaluate(expr.left, features, thresholds, tolerance_override, misses)
        right = _evaluate(expr.right, features, thresholds, tolerance_override, misses)
        if expr.op == "and":
            if left is False or right is False:
                return False
            if left is _UNKNOWN or right is _UNKNOWN:
                return _UNKNOWN
            return True
        if left is True or right is True:
            return True
        if left is _UNKNOWN or right is _UNKNOWN:
            return _UNKNOWN
        return False

    unit_class = _compare_units(expr)
    lhs, miss = _operand_value(expr.left, features)
    if miss is not None:
        misses.append(miss)
    rhs, miss = _operand_value(expr.right, features)
    if miss is not None:
        misses.append(miss)
    if lhs is _UNKNOWN or rhs is _UNKNOWN:
        return _UNKNOWN

    if expr.op == "~=":
        if tolerance_override is not None:
            tol = tolerance_override
        elif unit_class == ANGLE:
            tol = thresholds.angle_tolerance
        else:
            tol = thresholds.position_tolerance
        return abs(lhs - rhs) <= tol
    if expr.op == "<":
        return lhs < rhs
    if expr.op == ">":
        return lhs > rhs
    if expr.op == "<=":
        return lhs <= rhs
    return lhs >= rhs
