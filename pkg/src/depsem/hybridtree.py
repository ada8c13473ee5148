"""Dependency-based hybrid trees.

A hybrid tree jointly encodes a sentence and a meaning representation: every
semantic unit labels exactly one word-to-word dependency arc, and each arc
carries a pattern describing how the words inside the arc's cover interval
are split around the modifier:

    WW  arity 0   both sides of the modifier are word spans
    X   arity 1   the child unit self-loops on the modifier and inherits
                  the whole cover interval
    WX  arity 1   word span on the left (modifier included), child on the right
    XW  arity 1   child on the left, word span on the right (modifier included)
    XY  arity 2   first child handles the left side, second the right
    YX  arity 2   first child handles the right side, second the left

The resulting dependency structure is projective, and following the arcs
reconstructs the meaning representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import product

from .funql import (FunqlError, FunqlTypeError, MeaningRepresentation, MRNode,
                    SemanticUnit)

ROOT_TOKEN = "<root>"


class HybridTreeError(FunqlError):
    pass


class InconsistentTreeError(HybridTreeError):
    pass


class BoundExceededError(HybridTreeError):
    pass


class Pattern(Enum):
    WW = "WW"
    X = "X"
    WX = "WX"
    XW = "XW"
    XY = "XY"
    YX = "YX"

    def __repr__(self):
        return self.value


# canonical order, also the deterministic iteration order everywhere
PATTERN_ORDER = (Pattern.WW, Pattern.X, Pattern.WX, Pattern.XW,
                 Pattern.XY, Pattern.YX)

_PATTERNS_BY_ARITY = {
    0: (Pattern.WW,),
    1: (Pattern.X, Pattern.WX, Pattern.XW),
    2: (Pattern.XY, Pattern.YX),
}


def patterns_for(unit: SemanticUnit):
    """Admissible dependency patterns for a unit, by arity."""
    return _PATTERNS_BY_ARITY[unit.arity]


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("a sentence needs at least one token")

    @classmethod
    def from_text(cls, text):
        return cls(tuple(text.split()))

    def __len__(self):
        return len(self.tokens)

    def word(self, i: int) -> str:
        """Token at position i, with the implicit root at index 0."""
        if i == 0:
            return ROOT_TOKEN
        return self.tokens[i - 1]


@dataclass(frozen=True)
class Arc:
    parent: int
    child: int
    unit: SemanticUnit
    pattern: Pattern

    @property
    def is_self_loop(self):
        return self.parent == self.child


@dataclass(frozen=True)
class TreeArc:
    """An arc plus its child arcs, ordered like the unit's argument list."""

    parent: int
    child: int
    unit: SemanticUnit
    pattern: Pattern
    subarcs: tuple["TreeArc", ...] = ()

    def arc(self) -> Arc:
        return Arc(self.parent, self.child, self.unit, self.pattern)


@dataclass(frozen=True)
class HybridTree:
    root: TreeArc

    def arcs(self):
        """Flat arc list, pre-order over the semantic tree."""
        out = []
        stack = [self.root]
        while stack:
            a = stack.pop()
            out.append(a.arc())
            stack.extend(reversed(a.subarcs))
        return out


def child_regions(pattern, k, lo, hi):
    """Cover intervals handed to the child arcs, in argument order.

    Returns a list of (lo, hi, is_self_loop) triples, or None when the
    pattern does not fit the geometry (e.g. WX with no words right of the
    modifier).
    """
    if pattern is Pattern.WW:
        return []
    if pattern is Pattern.X:
        return [(lo, hi, True)]
    if pattern is Pattern.WX:
        return None if hi <= k else [(k + 1, hi, False)]
    if pattern is Pattern.XW:
        return None if lo >= k else [(lo, k - 1, False)]
    if pattern is Pattern.XY:
        if lo >= k or hi <= k:
            return None
        return [(lo, k - 1, False), (k + 1, hi, False)]
    if pattern is Pattern.YX:
        if lo >= k or hi <= k:
            return None
        return [(k + 1, hi, False), (lo, k - 1, False)]
    raise ValueError(pattern)


def word_material(pattern, k, lo, hi):
    """Token positions directly under the arc's unit (its W spans)."""
    if pattern is Pattern.WW:
        return range(lo, hi + 1)
    if pattern is Pattern.WX:
        return range(lo, k + 1)
    if pattern is Pattern.XW:
        return range(k, hi + 1)
    return range(0)


def recover_mr(t: HybridTree) -> MeaningRepresentation:
    """The meaning representation induced by the arc labels."""
    def rec(arc):
        try:
            return MRNode(arc.unit, tuple(rec(s) for s in arc.subarcs))
        except FunqlTypeError as exc:
            raise InconsistentTreeError(str(exc)) from None
    return MeaningRepresentation(rec(t.root))


def check_structure(t: HybridTree, sentence: Sentence, depth_cap):
    """First structural violation of the hybrid tree invariants, or None."""
    n = len(sentence)
    root = t.root
    if root.parent != 0:
        return f"root arc must leave token 0, got {root.parent}"

    def walk(arc, lo, hi, depth):
        k = arc.child
        if not lo <= k <= hi:
            return f"modifier {k} outside cover [{lo},{hi}]"
        if not 1 <= k <= n:
            return f"modifier {k} outside the sentence"
        if depth > depth_cap:
            return f"unit {arc.unit} at depth {depth} exceeds the cap {depth_cap}"
        if arc.pattern not in patterns_for(arc.unit):
            return f"pattern {arc.pattern.value} not admissible for {arc.unit}"
        if len(arc.subarcs) != arc.unit.arity:
            return (f"{arc.unit} needs {arc.unit.arity} child arcs, "
                    f"got {len(arc.subarcs)}")
        regions = child_regions(arc.pattern, k, lo, hi)
        if regions is None:
            return (f"pattern {arc.pattern.value} does not fit "
                    f"modifier {k} in [{lo},{hi}]")
        for sub, (clo, chi, loop) in zip(arc.subarcs, regions):
            if sub.parent != k:
                return f"child arc parent {sub.parent} is not the modifier {k}"
            if loop != (sub.child == k and sub.parent == k):
                want = "a self-loop" if loop else "a non-loop arc"
                return f"pattern {arc.pattern.value} requires {want} child"
            if not loop and not clo <= sub.child <= chi:
                return f"child modifier {sub.child} outside [{clo},{chi}]"
            bad = walk(sub, clo, chi, depth + 1)
            if bad:
                return bad
        return None

    return walk(root, 1, n, 1)


def validate(t: HybridTree, sentence: Sentence, m: MeaningRepresentation,
             depth_cap=20):
    """True iff the tree is structurally valid and recovers exactly ``m``."""
    bad = check_structure(t, sentence, depth_cap)
    if bad:
        return False, bad
    try:
        recovered = recover_mr(t)
    except InconsistentTreeError as exc:
        return False, f"arc labels do not compose: {exc}"
    if recovered != m:
        return False, "recovered meaning representation differs from the target"
    return True, None


def arcs_noncrossing(arcs):
    """Independent projectivity check on a flat arc list."""
    spans = [(min(a.parent, a.child), max(a.parent, a.child))
             for a in arcs if not a.is_self_loop]
    for i, (a, b) in enumerate(spans):
        for c, d in spans[i + 1:]:
            if a < c < b < d or c < a < d < b:
                return False
    return True


def enumerate_trees(sentence: Sentence, m: MeaningRepresentation,
                    depth_cap=20, limit=9):
    """Exhaustively enumerate T(n, m), the testing oracle for the charts.

    Exponential in the sentence length; refuses sentences longer than
    ``limit`` tokens.
    """
    n = len(sentence)
    if n > limit:
        raise BoundExceededError(
            f"enumeration limit is {limit} tokens, got {n}")
    if m.depth > depth_cap:
        return []

    def arcs(parent, k, lo, hi, node):
        out = []
        for pattern in patterns_for(node.unit):
            regions = child_regions(pattern, k, lo, hi)
            if regions is None:
                continue
            sub_choices = [region(k, clo, chi, loop, child)
                           for child, (clo, chi, loop)
                           in zip(node.children, regions)]
            for combo in product(*sub_choices):
                out.append(TreeArc(parent, k, node.unit, pattern, combo))
        return out

    def region(anchor, lo, hi, loop, node):
        mods = [anchor] if loop else range(lo, hi + 1)
        return [a for k2 in mods for a in arcs(anchor, k2, lo, hi, node)]

    return [HybridTree(a)
            for k in range(1, n + 1)
            for a in arcs(0, k, 1, n, m.root)]


def format_arcs(t: HybridTree):
    """One arc per line: ``parent -> child : unit : pattern``."""
    return "\n".join(f"{a.parent} -> {a.child} : {a.unit} : {a.pattern.value}"
                     for a in t.arcs())


def format_diagram(t: HybridTree, sentence: Sentence):
    """Indented text rendering of the tree with the words it touches."""
    lines = []

    def rec(arc, indent):
        head = sentence.word(arc.parent)
        mod = sentence.word(arc.child)
        loop = " (self-loop)" if arc.parent == arc.child else ""
        lines.append(f"{'  ' * indent}{head} -[{arc.unit} / "
                     f"{arc.pattern.value}]-> {mod}{loop}")
        for sub in arc.subarcs:
            rec(sub, indent + 1)

    rec(t.root, 0)
    return "\n".join(lines)
