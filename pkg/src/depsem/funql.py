"""Variable-free tree-structured meaning representations (FunQL).

A meaning representation is a tree of typed semantic units.  Each unit is a
function with a return type and 0-2 typed arguments; constants such as
``'tn'`` are folded into the function symbol and become arity-0 units typed
by the argument slot they fill.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import product


class FunqlError(Exception):
    pass


class FunqlSyntaxError(FunqlError):
    pass


class FunqlTypeError(FunqlError):
    pass


class UnknownSymbolError(FunqlError):
    pass


class AmbiguousSymbolError(FunqlError):
    pass


class EmptyCorpusError(FunqlError):
    pass


@dataclass(frozen=True)
class SemanticType:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("semantic type needs a non-empty name")

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class SemanticUnit:
    """One typed function node: return type, symbol and argument types.

    Two units with the same (return_type, function, arg_types) compare equal;
    ``uid`` is the dense index assigned by the grammar and is ignored for
    equality and hashing.
    """

    return_type: SemanticType
    function: str
    arg_types: tuple[SemanticType, ...] = ()
    uid: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.arg_types) > 2:
            raise ValueError("units support at most two arguments")

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    def label(self) -> str:
        if not self.arg_types:
            return f"{self.return_type.name}:{self.function}"
        args = ",".join(t.name for t in self.arg_types)
        return f"{self.return_type.name}:{self.function}({args})"

    def signature(self):
        return (self.return_type.name, self.function,
                tuple(t.name for t in self.arg_types))

    def __repr__(self):
        return self.label()


@dataclass(frozen=True)
class MRNode:
    unit: SemanticUnit
    children: tuple["MRNode", ...] = ()

    def __post_init__(self):
        if len(self.children) != self.unit.arity:
            raise FunqlTypeError(
                f"{self.unit} expects {self.unit.arity} children, "
                f"got {len(self.children)}")
        for child, want in zip(self.children, self.unit.arg_types):
            if child.unit.return_type != want:
                raise FunqlTypeError(
                    f"argument of {self.unit} should have type {want}, "
                    f"got {child.unit.return_type}")


@dataclass(frozen=True)
class MeaningRepresentation:
    root: MRNode

    def nodes(self):
        """Pre-order node list."""
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(reversed(node.children))
        return out

    def units(self):
        return [n.unit for n in self.nodes()]

    @property
    def size(self) -> int:
        return len(self.nodes())

    @property
    def depth(self) -> int:
        def rec(node):
            if not node.children:
                return 1
            return 1 + max(rec(c) for c in node.children)
        return rec(self.root)


def mr(unit, *children):
    """Convenience constructor used heavily in tests."""
    kids = tuple(c.root if isinstance(c, MeaningRepresentation) else c
                 for c in children)
    return MeaningRepresentation(MRNode(unit, kids))


class SignatureTable:
    """Maps function symbols to their (return type, argument types) entries.

    A symbol may carry several signatures (e.g. ``answer`` over different
    argument types); the parser disambiguates by context.
    """

    def __init__(self):
        self._entries: dict[str, list[tuple[SemanticType, tuple[SemanticType, ...]]]] = {}

    def add(self, symbol, return_type, arg_types=()):
        sig = (return_type, tuple(arg_types))
        sigs = self._entries.setdefault(symbol, [])
        if sig not in sigs:
            sigs.append(sig)

    def signatures(self, symbol):
        return self._entries.get(symbol, [])

    def __contains__(self, symbol):
        return symbol in self._entries

    def symbols(self):
        return sorted(self._entries)


def load_signatures(path) -> SignatureTable:
    """Read a tab-separated signature file.

    One line per symbol: ``function<TAB>return_type<TAB>arg_type[,arg_type]``;
    the third column may be empty, ``-`` or absent for arity-0 symbols.
    """
    table = SignatureTable()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise FunqlSyntaxError(
                    f"{path}:{lineno}: expected at least 2 tab-separated columns")
            symbol, ret = cols[0].strip(), cols[1].strip()
            raw_args = cols[2].strip() if len(cols) > 2 else ""
            if raw_args in ("", "-"):
                args = ()
            else:
                args = tuple(SemanticType(a.strip())
                             for a in raw_args.split(","))
            table.add(symbol, SemanticType(ret), args)
    return table


_TOKEN_RE = re.compile(r"\s*(?:('(?:[^'\\]|\\.)*')|([(),])|([^\s(),']+))")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise FunqlSyntaxError(f"bad token near {rest[:20]!r}")
        pos = m.end()
        quoted, punct, sym = m.groups()
        if quoted is not None:
            tokens.append(("lit", quoted))
        elif punct is not None:
            tokens.append((punct, punct))
        elif sym is not None:
            tokens.append(("sym", sym))
    return tokens


@dataclass
class _Raw:
    symbol: str
    literal: bool
    children: list


def _parse_raw(tokens, pos):
    if pos >= len(tokens):
        raise FunqlSyntaxError("unexpected end of input")
    kind, value = tokens[pos]
    pos += 1
    if kind == "lit":
        return _Raw(value, True, []), pos
    if kind != "sym":
        raise FunqlSyntaxError(f"unexpected {value!r}")
    children = []
    if pos < len(tokens) and tokens[pos][0] == "(":
        pos += 1
        while True:
            child, pos = _parse_raw(tokens, pos)
            children.append(child)
            if pos >= len(tokens):
                raise FunqlSyntaxError("unbalanced parentheses")
            if tokens[pos][0] == ",":
                pos += 1
                continue
            if tokens[pos][0] == ")":
                pos += 1
                break
            raise FunqlSyntaxError(f"expected ',' or ')' near {tokens[pos][1]!r}")
    return _Raw(value, False, children), pos


def _fold_all(node, table):
    """Fold ``sym(all)`` into a single arity-0 symbol when the table knows it."""
    node.children = [_fold_all(c, table) for c in node.children]
    if (not node.literal and len(node.children) == 1
            and node.children[0].symbol == "all"
            and not node.children[0].children
            and f"{node.symbol}(all)" in table):
        return _Raw(f"{node.symbol}(all)", False, [])
    return node


def _resolve(node, table, expected):
    """Return every type-correct MRNode reading of a raw node."""
    if node.literal:
        if expected is None:
            raise FunqlTypeError("string literal cannot be the root")
        return [MRNode(SemanticUnit(expected, node.symbol))]
    if node.symbol not in table:
        raise UnknownSymbolError(f"unknown symbol {node.symbol!r}")
    readings = []
    for ret, args in table.signatures(node.symbol):
        if expected is not None and ret != expected:
            continue
        if len(args) != len(node.children):
            continue
        per_child = [_resolve(c, table, t)
                     for c, t in zip(node.children, args)]
        unit = SemanticUnit(ret, node.symbol, tuple(args))
        for combo in product(*per_child):
            readings.append(MRNode(unit, tuple(combo)))
    return readings


def parse_mr(text, table) -> MeaningRepresentation:
    """Parse a FunQL string into a type-correct meaning representation."""
    tokens = _tokenize(text)
    if not tokens:
        raise FunqlSyntaxError("empty input")
    raw, pos = _parse_raw(tokens, 0)
    if pos != len(tokens):
        raise FunqlSyntaxError(f"trailing input near {tokens[pos][1]!r}")
    raw = _fold_all(raw, table)
    readings = _resolve(raw, table, None)
    if not readings:
        raise FunqlTypeError(f"no type-correct reading for {text!r}")
    if len(set(readings)) > 1:
        raise AmbiguousSymbolError(f"{text!r} has multiple type-correct readings")
    return MeaningRepresentation(readings[0])


def serialize_mr(m: MeaningRepresentation) -> str:
    def rec(node):
        if not node.children:
            return node.unit.function
        inner = ", ".join(rec(c) for c in node.children)
        return f"{node.unit.function}({inner})"
    return rec(m.root)


class SemanticGrammar:
    """Deduplicated unit inventory plus type-compatible transitions.

    ``allowed_children(u, k)`` returns every unit whose return type matches
    argument slot ``k`` of ``u`` -- compatibility is by type over the full
    inventory, not by observed parent/child co-occurrence.
    """

    def __init__(self, units, root_type):
        canonical = {}
        for u in units:
            canonical.setdefault(u.signature(), u)
        ordered = sorted(canonical.values(), key=lambda u: u.signature())
        self.units = tuple(
            SemanticUnit(u.return_type, u.function, u.arg_types, uid=i)
            for i, u in enumerate(ordered))
        self.root_type = root_type
        self._by_signature = {u.signature(): u for u in self.units}
        self._by_type: dict[SemanticType, tuple[SemanticUnit, ...]] = {}
        for u in self.units:
            self._by_type.setdefault(u.return_type, ())
        for t in self._by_type:
            self._by_type[t] = tuple(u for u in self.units if u.return_type == t)

    def __len__(self):
        return len(self.units)

    def canonical(self, unit) -> SemanticUnit:
        """The uid-carrying copy of an equal unit."""
        try:
            return self._by_signature[unit.signature()]
        except KeyError:
            raise UnknownSymbolError(f"unit {unit} not in grammar") from None

    def uid(self, unit) -> int:
        return self.canonical(unit).uid

    def units_of_type(self, t):
        return self._by_type.get(t, ())

    def root_units(self):
        return self.units_of_type(self.root_type)

    def allowed_children(self, unit, k):
        if not 0 <= k < unit.arity:
            raise IndexError(f"{unit} has no argument slot {k}")
        return self.units_of_type(unit.arg_types[k])


def build_grammar(corpus, root_type) -> SemanticGrammar:
    """Collect the unit inventory of a corpus of meaning representations."""
    mrs = list(corpus)
    if not mrs:
        raise EmptyCorpusError("cannot build a grammar from an empty corpus")
    units = [u for m in mrs for u in m.units()]
    return SemanticGrammar(units, root_type)


def enumerate_mrs(grammar, max_depth, root_type=None):
    """All type-correct meaning representations with node depth <= max_depth.

    Brute-force expansion used as a testing oracle for the unclamped chart;
    exponential, keep the grammar and depth small.
    """
    root_type = root_type or grammar.root_type

    def expand(t, depth):
        if depth > max_depth:
            return []
        out = []
        for u in grammar.units_of_type(t):
            if not u.arg_types:
                out.append(MRNode(u))
                continue
            per_arg = [expand(at, depth + 1) for at in u.arg_types]
            for combo in product(*per_arg):
                out.append(MRNode(u, tuple(combo)))
        return out

    return [MeaningRepresentation(n) for n in expand(root_type, 1)]


def sample_mr(grammar, rng, max_depth, root_type=None) -> MeaningRepresentation:
    """Draw one random type-correct tree; leaves forced at the depth cap."""
    root_type = root_type or grammar.root_type

    def pick(t, depth):
        options = grammar.units_of_type(t)
        if depth >= max_depth:
            options = tuple(u for u in options if not u.arg_types)
        if not options:
            raise FunqlError(f"no unit of type {t} fits within the depth cap")
        u = options[rng.randrange(len(options))]
        return MRNode(u, tuple(pick(at, depth + 1) for at in u.arg_types))

    return MeaningRepresentation(pick(root_type, 1))
