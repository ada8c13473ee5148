"""Exact dynamic-programming inference over hybrid-tree derivations.

The derivation space is packed into a hypergraph with three span kinds:

  * arc spans   -- a head -> modifier dependency carrying a semantic unit,
                   covering a word interval; one hyperedge per admissible
                   dependency pattern;
  * child regions -- the interval a unit hands to one of its children,
                   summing over the child's unit choice and modifier
                   position (self-loop regions keep the interval and bump
                   the depth counter instead);
  * word spans  -- incrementally built pattern-W material, one token and
                   one Word feature per step.

Inside/outside over the hypergraph yields partition functions, span
marginals and feature expectations; max-sum with backpointers yields the
Viterbi meaning representation.  Everything is in log space with fixed
iteration order, so identical inputs give bit-identical scores.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .funql import MeaningRepresentation
from .hybridtree import (HybridTree, Pattern, TreeArc, child_regions,
                         patterns_for, recover_mr)

NEG_INF = float("-inf")


class NoDerivationError(Exception):
    pass


class ClampedLabels:
    """Label space with the meaning representation fixed to the gold tree."""

    def __init__(self, m: MeaningRepresentation, depth_cap, grammar=None):
        self.depth_cap = depth_cap
        self.nodes = []
        self._children = []

        def index(node):
            unit = grammar.canonical(node.unit) if grammar else node.unit
            i = len(self.nodes)
            self.nodes.append(unit)
            self._children.append(())
            self._children[i] = tuple(index(c) for c in node.children)
            return i

        self._root = index(m.root)
        self._feasible = m.depth <= depth_cap

    def root_labels(self):
        return (self._root,) if self._feasible else ()

    def child_labels(self, label, pos):
        return (self._children[label][pos],)

    def unit(self, label):
        return self.nodes[label]


class UnclampedLabels:
    """Label space ranging over all grammar units, depth-capped."""

    def __init__(self, grammar, depth_cap):
        self.grammar = grammar
        self.depth_cap = depth_cap

    def root_labels(self):
        if self.depth_cap < 1:
            return ()
        return tuple((u, 1) for u in self.grammar.root_units())

    def child_labels(self, label, pos):
        unit, depth = label
        if depth >= self.depth_cap:
            return ()
        return tuple((u, depth + 1)
                     for u in self.grammar.allowed_children(unit, pos))

    def unit(self, label):
        return label[0]


@dataclass(slots=True)
class Edge:
    tails: tuple
    score: float
    feats: tuple
    arc_info: tuple | None  # (uid, head, mod) when a bilinear score applies
    meta: tuple | None      # arc edges: (pattern, region tail offsets)


class Hypergraph:
    """Packed chart; items are topologically ordered (tails first)."""

    def __init__(self, sentence):
        self.sentence = sentence
        self.keys = []
        self.edges = []
        self._index = {}
        self.goal = None

    def __len__(self):
        return len(self.keys)

    def add_item(self, key, edges):
        idx = len(self.keys)
        self._index[key] = idx
        self.keys.append(key)
        self.edges.append(edges)
        return idx

    def inside(self) -> np.ndarray:
        ins = np.full(len(self.keys), NEG_INF)
        for idx, edges in enumerate(self.edges):
            acc = NEG_INF
            for e in edges:
                s = e.score
                for t in e.tails:
                    s += ins[t]
                acc = np.logaddexp(acc, s)
            ins[idx] = acc
        return ins

    def outside(self, ins) -> np.ndarray:
        out = np.full(len(self.keys), NEG_INF)
        out[self.goal] = 0.0
        for idx in range(len(self.keys) - 1, -1, -1):
            o = out[idx]
            if o == NEG_INF:
                continue
            for e in self.edges[idx]:
                tail_ins = [ins[t] for t in e.tails]
                for j, t in enumerate(e.tails):
                    rest = e.score + o
                    dead = False
                    for jj, v in enumerate(tail_ins):
                        if jj == j:
                            continue
                        if v == NEG_INF:
                            dead = True
                            break
                        rest += v
                    if not dead:
                        out[t] = np.logaddexp(out[t], rest)
        return out


def build_chart(sentence, labels, scorer) -> Hypergraph:
    """Construct the full hypergraph for one sentence and label space."""
    n = len(sentence)
    g = Hypergraph(sentence)
    memo = {}
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

    def wspan(unit, lo, hi):
        key = ("wspan", unit, lo, hi)
        idx = memo.get(key)
        if idx is not None:
            return idx
        score, feats = scorer.word_term(sentence, unit, hi)
        tails = () if lo == hi else (wspan(unit, lo, hi - 1),)
        idx = g.add_item(key, [Edge(tails, score, feats, None, None)])
        memo[key] = idx
        return idx

    def arc(head, mod, lo, hi, label):
        key = ("arc", head, mod, lo, hi, label)
        idx = memo.get(key)
        if idx is not None:
            return idx
        unit = labels.unit(label)
        edges = []
        for pattern in patterns_for(unit):
            regions = child_regions(pattern, mod, lo, hi)
            if regions is None:
                continue
            tails = []
            if pattern is Pattern.WW:
                tails.append(wspan(unit, lo, hi))
            elif pattern is Pattern.WX:
                tails.append(wspan(unit, lo, mod))
            elif pattern is Pattern.XW:
                tails.append(wspan(unit, mod, hi))
            reg_offset = len(tails)
            for pos, (clo, chi, loop) in enumerate(regions):
                tails.append(region(mod, clo, chi, label, pos, loop))
            score, feats = scorer.arc_term(
                sentence, head, mod, lo, hi, unit, pattern)
            edges.append(Edge(tuple(tails), score, feats,
                              (unit.uid, head, mod),
                              (pattern, reg_offset, unit)))
        idx = g.add_item(key, edges)
        memo[key] = idx
        return idx

    def region(anchor, lo, hi, label, pos, loop):
        key = ("region", anchor, lo, hi, label, pos, loop)
        idx = memo.get(key)
        if idx is not None:
            return idx
        unit = labels.unit(label)
        edges = []
        for child_label in labels.child_labels(label, pos):
            child_unit = labels.unit(child_label)
            score, feats = scorer.transition_term(unit, child_unit)
            mods = (anchor,) if loop else range(lo, hi + 1)
            for k2 in mods:
                a = arc(anchor, k2, lo, hi, child_label)
                edges.append(Edge((a,), score, feats, None, None))
        idx = g.add_item(key, edges)
        memo[key] = idx
        return idx

    goal_edges = []
    for label in labels.root_labels():
        for k in range(1, n + 1):
            a = arc(0, k, 1, n, label)
            goal_edges.append(Edge((a,), 0.0, (), None, None))
    g.goal = g.add_item(("goal",), goal_edges)
    return g


class Chart:
    """Inside/outside scores and derived quantities over one hypergraph."""

    def __init__(self, graph: Hypergraph):
        self.graph = graph
        self.ins = graph.inside()
        self._out = None

    @property
    def log_z(self) -> float:
        return float(self.ins[self.graph.goal])

    @property
    def outs(self):
        if self._out is None:
            self._out = self.graph.outside(self.ins)
        return self._out

    def expectations(self):
        """Feature expectations and per-arc probability mass.

        Returns (feature expectations keyed by feature id, arc mass keyed by
        (unit id, head index, modifier index)).
        """
        log_z = self.log_z
        if log_z == NEG_INF:
            raise NoDerivationError("chart has no derivations")
        feat_expect: dict = {}
        arc_mass: dict = {}
        ins, outs = self.ins, self.outs
        for idx, edges in enumerate(self.graph.edges):
            o = outs[idx]
            if o == NEG_INF:
                continue
            for e in edges:
                marg = e.score + o - log_z
                for t in e.tails:
                    marg += ins[t]
                if marg == NEG_INF:
                    continue
                p = float(np.exp(marg))
                for fid, value in e.feats:
                    feat_expect[fid] = feat_expect.get(fid, 0.0) + p * value
                if e.arc_info is not None:
                    arc_mass[e.arc_info] = arc_mass.get(e.arc_info, 0.0) + p
        return feat_expect, arc_mass

    def marginal_rows(self):
        """Arc-span marginals for the inspect dump.

        Yields (head, endpoint, modifier, direction, pattern, unit,
        log marginal) per arc item and pattern edge.
        """
        log_z = self.log_z
        ins, outs = self.ins, self.outs
        for idx, key in enumerate(self.graph.keys):
            if key[0] != "arc":
                continue
            _, head, mod, lo, hi, _label = key
            if head > mod:
                direction, endpoint = "L", lo
            elif head < mod:
                direction, endpoint = "R", hi
            else:
                direction, endpoint = "S", hi
            o = outs[idx]
            for e in self.graph.edges[idx]:
                marg = e.score + o - log_z
                for t in e.tails:
                    marg += ins[t]
                pattern, _, unit = e.meta
                yield (head, endpoint, mod, direction,
                       pattern.value, unit, float(marg))

    def viterbi(self):
        """Max derivation: (hybrid tree, meaning representation, score)."""
        graph = self.graph
        best = np.full(len(graph.keys), NEG_INF)
        back = [None] * len(graph.keys)
        for idx, edges in enumerate(graph.edges):
            for e in edges:
                s = e.score
                for t in e.tails:
                    s += best[t]
                # strict improvement keeps the earliest edge on ties, which
                # is the smaller unit id / smaller split by construction
                if s > best[idx]:
                    best[idx] = s
                    back[idx] = e
        score = float(best[graph.goal])
        if score == NEG_INF:
            raise NoDerivationError("no derivation covers the sentence")

        def build_arc(idx) -> TreeArc:
            _, head, mod, _lo, _hi, _label = graph.keys[idx]
            e = back[idx]
            pattern, reg_offset, unit = e.meta
            subarcs = []
            for t in e.tails[reg_offset:]:
                reg_edge = back[t]
                subarcs.append(build_arc(reg_edge.tails[0]))
            return TreeArc(head, mod, unit, pattern, tuple(subarcs))

        goal_edge = back[graph.goal]
        tree = HybridTree(build_arc(goal_edge.tails[0]))
        return tree, recover_mr(tree), score


def inside_clamped(sentence, m, scorer, depth_cap, grammar=None) -> Chart:
    """Chart over T(n, m): all hybrid trees containing the gold tree.

    ``log_z`` is -inf when the gold tree is unreachable under the depth cap.
    """
    labels = ClampedLabels(m, depth_cap, grammar=grammar)
    return Chart(build_chart(sentence, labels, scorer))


def inside_unclamped(sentence, grammar, scorer, depth_cap) -> Chart:
    """Chart over every type-correct meaning representation and tree."""
    labels = UnclampedLabels(grammar, depth_cap)
    return Chart(build_chart(sentence, labels, scorer))


def viterbi_decode(sentence, grammar, scorer, depth_cap):
    """MAP decode: (meaning representation, hybrid tree, score)."""
    chart = inside_unclamped(sentence, grammar, scorer, depth_cap)
    tree, m, score = chart.viterbi()
    return m, tree, score
