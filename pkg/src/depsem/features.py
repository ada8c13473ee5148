"""Feature templates over chart-local structures.

Six families: Word, Pattern and Transition form the basic set; HeadWord,
ModifierWord and BagOfWords are the dependency set.  Keys are exact string
concatenations; values are counts except for the optional real-valued
embedding features.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .hybridtree import child_regions, word_material

SEP = "&"


@dataclass(frozen=True)
class FeatureFlags:
    word: bool = True
    pattern: bool = True
    transition: bool = True
    head_word: bool = True
    modifier_word: bool = True
    bag_of_words: bool = True
    embedding: bool = False

    @classmethod
    def basic(cls):
        return cls(head_word=False, modifier_word=False, bag_of_words=False)

    @classmethod
    def basic_hm(cls):
        return cls(bag_of_words=False)

    @classmethod
    def basic_bow(cls):
        return cls(head_word=False, modifier_word=False)

    @classmethod
    def full(cls):
        return cls()

    @classmethod
    def from_spec(cls, spec: str) -> "FeatureFlags":
        """Parse an ablation regime name: basic | basic+hm | basic+bow | full."""
        presets = {
            "basic": cls.basic(),
            "basic+hm": cls.basic_hm(),
            "basic+bow": cls.basic_bow(),
            "full": cls.full(),
        }
        try:
            return presets[spec]
        except KeyError:
            raise ValueError(
                f"unknown feature regime {spec!r}; "
                f"expected one of {sorted(presets)}") from None

    def with_embedding(self, on=True):
        return replace(self, embedding=on)


def word_key(unit, token):
    return f"word{SEP}{unit.label()}{SEP}{token}"


def pattern_key(unit, pattern):
    return f"pat{SEP}{unit.label()}{SEP}{pattern.value}"


def transition_key(parent_unit, child_unit):
    return f"trans{SEP}{parent_unit.label()}{SEP}{child_unit.label()}"


def head_key(unit, token):
    return f"head{SEP}{unit.label()}{SEP}{token}"


def modifier_key(unit, token):
    return f"mod{SEP}{unit.label()}{SEP}{token}"


def bow_key(unit, token):
    return f"bow{SEP}{unit.label()}{SEP}{token}"


def embedding_key(unit, dim):
    return f"emb{SEP}{unit.label()}{SEP}{dim}"


def arc_local_features(flags, sentence, head, mod, lo, hi, unit, pattern,
                       emb_fn=None):
    """Arc-level features excluding the per-token Word family.

    The Word family decomposes over single tokens and is attached to word
    spans in the chart; ``extract_arc`` adds it back for whole-arc contexts.
    """
    feats = []
    if flags.pattern:
        feats.append((pattern_key(unit, pattern), 1.0))
    if flags.head_word:
        feats.append((head_key(unit, sentence.word(head)), 1.0))
    if flags.modifier_word:
        feats.append((modifier_key(unit, sentence.word(mod)), 1.0))
    if flags.bag_of_words:
        for i in range(min(head, mod), max(head, mod) + 1):
            feats.append((bow_key(unit, sentence.word(i)), 1.0))
    if flags.embedding and emb_fn is not None:
        avg = emb_fn(sentence.word(head), sentence.word(mod))
        for dim, value in enumerate(avg):
            if value != 0.0:
                feats.append((embedding_key(unit, dim), float(value)))
    return feats


def extract_arc(flags, sentence, head, mod, lo, hi, unit, pattern,
                emb_fn=None):
    """All features of one arc, including its Word-span material."""
    feats = arc_local_features(flags, sentence, head, mod, lo, hi, unit,
                               pattern, emb_fn)
    if flags.word:
        for i in word_material(pattern, mod, lo, hi):
            feats.append((word_key(unit, sentence.word(i)), 1.0))
    return feats


def extract_tree(tree, sentence, flags, emb_fn=None):
    """Total feature vector of a hybrid tree, as a key -> value dict.

    Walks the tree geometry directly; used as the independent whole-tree
    oracle against which chart-local extraction is checked.
    """
    totals: dict[str, float] = {}

    def add(feats):
        for key, value in feats:
            totals[key] = totals.get(key, 0.0) + value

    def rec(arc, lo, hi):
        add(extract_arc(flags, sentence, arc.parent, arc.child, lo, hi,
                        arc.unit, arc.pattern, emb_fn))
        regions = child_regions(arc.pattern, arc.child, lo, hi)
        for sub, (clo, chi, _loop) in zip(arc.subarcs, regions):
            if flags.transition:
                add([(transition_key(arc.unit, sub.unit), 1.0)])
            rec(sub, clo, chi)

    rec(tree.root, 1, len(sentence))
    return totals


class FeatureIndex:
    """String key -> dense id map with a single-writer build phase.

    After ``freeze()`` unseen keys resolve to None and contribute nothing.
    """

    def __init__(self):
        self._ids: dict[str, int] = {}
        self.frozen = False

    def __len__(self):
        return len(self._ids)

    def __contains__(self, key):
        return key in self._ids

    def add(self, key) -> int:
        fid = self._ids.get(key)
        if fid is None:
            if self.frozen:
                raise RuntimeError("feature index is frozen")
            fid = len(self._ids)
            self._ids[key] = fid
        return fid

    def get(self, key):
        return self._ids.get(key)

    def resolve(self, key):
        """Id for the key; grows the index unless frozen."""
        if self.frozen:
            return self._ids.get(key)
        return self.add(key)

    def freeze(self):
        self.frozen = True

    def items(self):
        return sorted(self._ids.items())

    @classmethod
    def from_keys(cls, keys):
        index = cls()
        for key in keys:
            index.add(key)
        return index
