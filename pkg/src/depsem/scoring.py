"""Log-potential scorers consumed by the chart builder.

A scorer answers three queries -- per-token Word material, arc-local
features, and parent/child transitions -- returning a log-potential plus
the (feature id, value) pairs behind it so the chart can compute feature
expectations.
"""

from __future__ import annotations

from . import features as F
from . import neural


class LinearScorer:
    """w . f potentials over an indexed feature space, plus the optional
    bilinear arc score."""

    def __init__(self, flags, index, weights, bank=None, embeddings=None):
        self.flags = flags
        self.index = index
        self.weights = weights
        self.bank = bank
        self.embeddings = embeddings
        if flags.embedding and embeddings is None:
            raise ValueError("embedding features need an embedding table")

    def _emb_fn(self):
        if self.flags.embedding and self.embeddings is not None:
            return lambda p, c: neural.embedding_features(self.embeddings, p, c)
        return None

    def _resolve(self, keyed):
        score = 0.0
        feats = []
        weights = self.weights
        limit = len(weights)
        for key, value in keyed:
            fid = self.index.resolve(key)
            if fid is None:
                continue
            if fid < limit:
                score += weights[fid] * value
            feats.append((fid, value))
        return score, tuple(feats)

    def word_term(self, sentence, unit, i):
        if not self.flags.word:
            return 0.0, ()
        return self._resolve([(F.word_key(unit, sentence.word(i)), 1.0)])

    def arc_term(self, sentence, head, mod, lo, hi, unit, pattern):
        keyed = F.arc_local_features(self.flags, sentence, head, mod, lo, hi,
                                     unit, pattern, self._emb_fn())
        score, feats = self._resolve(keyed)
        if self.bank is not None and self.embeddings is not None:
            score += neural.arc_score(self.bank, self.embeddings,
                                      sentence.word(head), sentence.word(mod),
                                      unit)
        return score, feats

    def transition_term(self, parent_unit, child_unit):
        if not self.flags.transition:
            return 0.0, ()
        return self._resolve([(F.transition_key(parent_unit, child_unit), 1.0)])

    def tree_score(self, tree, sentence) -> float:
        """Direct whole-tree score; independent of the chart decomposition."""
        totals = F.extract_tree(tree, sentence, self.flags, self._emb_fn())
        score = 0.0
        for key, value in totals.items():
            fid = self.index.get(key)
            if fid is not None and fid < len(self.weights):
                score += self.weights[fid] * value
        if self.bank is not None and self.embeddings is not None:
            for arc in tree.arcs():
                score += neural.arc_score(
                    self.bank, self.embeddings,
                    sentence.word(arc.parent), sentence.word(arc.child),
                    arc.unit)
        return score
