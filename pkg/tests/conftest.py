"""Shared fixtures: toy grammars, deterministic pseudo-random scorers, and
brute-force scoring oracles used against the dynamic programs."""

from __future__ import annotations

import math
import zlib

import numpy as np
import pytest

from depsem.features import FeatureFlags, FeatureIndex
from depsem.funql import (SemanticGrammar, SemanticType, SemanticUnit,
                          enumerate_mrs, mr)
from depsem.hybridtree import Sentence, enumerate_trees
from depsem.scoring import LinearScorer

Q = SemanticType("Q")
S = SemanticType("S")
R = SemanticType("R")


def unary_grammar():
    """Two units, arities 1 and 0."""
    return SemanticGrammar([
        SemanticUnit(Q, "ans", (S,)),
        SemanticUnit(S, "tn"),
    ], Q)


def mixed_grammar():
    """Four units covering arities 0, 1 and 2."""
    return SemanticGrammar([
        SemanticUnit(Q, "ans", (S,)),
        SemanticUnit(S, "pair", (R, S)),
        SemanticUnit(S, "tn"),
        SemanticUnit(R, "river"),
    ], Q)


def ambiguous_grammar():
    """Two interchangeable leaf units of the same type, plus a recursive
    unary; exercises the sum over unit labelings."""
    return SemanticGrammar([
        SemanticUnit(Q, "ans", (S,)),
        SemanticUnit(S, "wrap", (S,)),
        SemanticUnit(S, "tn"),
        SemanticUnit(S, "ca"),
    ], Q)


GRAMMARS = {
    "unary": unary_grammar,
    "mixed": mixed_grammar,
    "ambiguous": ambiguous_grammar,
}


def hash_weight(key, seed, scale=1.0):
    """Deterministic pseudo-random weight in [-scale, scale] from the key
    string; independent of feature registration order."""
    h = zlib.crc32(f"{seed}:{key}".encode()) & 0xFFFFFFFF
    return scale * (2.0 * h / 0xFFFFFFFF - 1.0)


def indexed_scorer(flags, jobs, seed, bank=None, embeddings=None, scale=1.0):
    """Build a scorer whose feature space covers everything ``jobs`` touch.

    Each job is a callable taking a scorer; they are run once with zero
    weights to register keys, then weights are filled from ``hash_weight``.
    """
    index = FeatureIndex()
    probe = LinearScorer(flags, index, np.zeros(0),
                         bank=bank, embeddings=embeddings)
    for job in jobs:
        job(probe)
    index.freeze()
    weights = np.zeros(len(index))
    for key, fid in index.items():
        weights[fid] = hash_weight(key, seed, scale)
    return LinearScorer(flags, index, weights,
                        bank=bank, embeddings=embeddings)


def logsumexp(values):
    values = [v for v in values if v != float("-inf")]
    if not values:
        return float("-inf")
    top = max(values)
    return top + math.log(sum(math.exp(v - top) for v in values))


def oracle_clamped(sentence, m, scorer, depth_cap):
    """Brute-force log partition over T(n, m)."""
    return logsumexp([scorer.tree_score(t, sentence)
                      for t in enumerate_trees(sentence, m,
                                               depth_cap=depth_cap)])


def oracle_unclamped(sentence, grammar, scorer, depth_cap):
    """Two-level brute force: expand meaning representations to the depth
    cap, then enumerate every tree of each."""
    scores = []
    for m in enumerate_mrs(grammar, depth_cap):
        for t in enumerate_trees(sentence, m, depth_cap=depth_cap):
            scores.append(scorer.tree_score(t, sentence))
    return logsumexp(scores)


def oracle_max(sentence, grammar, scorer, depth_cap):
    """Brute-force Viterbi: (best score, best tree)."""
    best, best_tree = float("-inf"), None
    for m in enumerate_mrs(grammar, depth_cap):
        for t in enumerate_trees(sentence, m, depth_cap=depth_cap):
            s = scorer.tree_score(t, sentence)
            if s > best:
                best, best_tree = s, t
    return best, best_tree


def sample_sentence(rng, n, vocab=("what", "is", "the", "river", "run",
                                   "not", "through", "tn")):
    return Sentence(tuple(rng.choice(vocab) for _ in range(n)))


GEO_SIGNATURES = """\
answer\tQUERY\tSTATE
state(all)\tSTATE\t-
next_to_1\tSTATE\tSTATE
exclude\tSTATE\tSTATE,STATE
stateid\tSTATE\tREF
"""


@pytest.fixture
def geo_table(tmp_path):
    from depsem.funql import load_signatures
    path = tmp_path / "signatures.tsv"
    path.write_text(GEO_SIGNATURES)
    return load_signatures(path)


def toy_corpus_text():
    """Synthetic paired corpus with strong word/unit cues; each record keys
    its meaning off distinct lexical triggers."""
    names = ["tn", "ca", "tx", "ny", "wa"]
    fillers = ["please", "now", "today", "quickly", "kindly"]
    records = []
    for name, filler in zip(names, fillers):
        records.append((f"which states border {name}",
                        f"answer(next_to_1(stateid('{name}')))"))
        records.append((f"states other than {name}",
                        f"answer(exclude(state(all), stateid('{name}')))"))
        records.append((f"states near states near {name}",
                        f"answer(next_to_1(next_to_1(stateid('{name}'))))"))
        records.append((f"name all the states {filler}",
                        "answer(state(all))"))
    lines = []
    for sent, gold in records:
        lines.append(sent)
        lines.append(gold)
        lines.append("")
    return "\n".join(lines)


@pytest.fixture
def toy_corpus_path(tmp_path):
    path = tmp_path / "toy.corpus"
    path.write_text(toy_corpus_text())
    return path


@pytest.fixture
def geo_signature_path(tmp_path):
    path = tmp_path / "signatures.tsv"
    path.write_text(GEO_SIGNATURES)
    return path
