"""Bilinear neural arc scorer.

Each dependency arc (parent word, child word, unit) receives an extra
log-potential e_p^T U e_c with one d x d matrix U per semantic unit.
Word embeddings are loaded from a file and stay fixed during training.
"""

from __future__ import annotations

import numpy as np


class EmbeddingTable:
    """Word -> fixed vector map; out-of-vocabulary words get the zero vector."""

    def __init__(self, vectors: dict, dim: int, lowercase=False):
        self.dim = dim
        self.lowercase = lowercase
        self._vectors = {}
        for word, vec in vectors.items():
            arr = np.asarray(vec, dtype=float)
            if arr.shape != (dim,):
                raise ValueError(
                    f"embedding for {word!r} has shape {arr.shape}, "
                    f"expected ({dim},)")
            self._vectors[word] = arr
        self._oov = np.zeros(dim)

    def __len__(self):
        return len(self._vectors)

    def __contains__(self, word):
        if self.lowercase:
            word = word.lower()
        return word in self._vectors

    def lookup(self, word) -> np.ndarray:
        if self.lowercase:
            word = word.lower()
        return self._vectors.get(word, self._oov)

    @classmethod
    def load(cls, path, dim=None, lowercase=False) -> "EmbeddingTable":
        """Read a text embedding file: ``word v1 v2 ... vd`` per line."""
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip().split()
                if not parts:
                    continue
                word, values = parts[0], parts[1:]
                if dim is None:
                    dim = len(values)
                if len(values) != dim:
                    raise ValueError(
                        f"{path}:{lineno}: expected {dim} values, "
                        f"got {len(values)}")
                vectors[word] = [float(v) for v in values]
        if dim is None:
            raise ValueError(f"{path}: no embeddings found")
        return cls(vectors, dim, lowercase=lowercase)

    @classmethod
    def random(cls, vocab, dim, seed=0, scale=1.0) -> "EmbeddingTable":
        """Seeded random table, for tests and synthetic experiments."""
        rng = np.random.RandomState(seed)
        return cls({w: scale * rng.randn(dim) for w in sorted(set(vocab))}, dim)


class BilinearBank:
    """One d x d bilinear form per semantic unit id."""

    def __init__(self, matrices: dict, dim: int):
        self.dim = dim
        self.matrices = {}
        for uid, mat in matrices.items():
            arr = np.asarray(mat, dtype=float)
            if arr.shape != (dim, dim):
                raise ValueError(
                    f"matrix for unit {uid} has shape {arr.shape}, "
                    f"expected ({dim}, {dim})")
            self.matrices[int(uid)] = arr
        self._zero = np.zeros((dim, dim))

    def matrix(self, uid) -> np.ndarray:
        return self.matrices.get(uid, self._zero)

    def copy(self):
        return BilinearBank({u: m.copy() for u, m in self.matrices.items()},
                            self.dim)

    @classmethod
    def zeros(cls, unit_ids, dim) -> "BilinearBank":
        return cls({uid: np.zeros((dim, dim)) for uid in unit_ids}, dim)

    @classmethod
    def init_random(cls, unit_ids, dim, seed=0, scale=0.01) -> "BilinearBank":
        rng = np.random.RandomState(seed)
        mats = {}
        for uid in sorted(unit_ids):
            mats[uid] = rng.uniform(-scale, scale, size=(dim, dim))
        return cls(mats, dim)


def arc_score(bank: BilinearBank, embeddings: EmbeddingTable,
              parent_word, child_word, unit) -> float:
    """r = e_p^T U e_c for the arc's unit; self-loops score e^T U e."""
    e_p = embeddings.lookup(parent_word)
    e_c = embeddings.lookup(child_word)
    return float(e_p @ bank.matrix(unit.uid) @ e_c)


def arc_score_gradient(embeddings: EmbeddingTable, parent_word, child_word,
                       coefficient) -> np.ndarray:
    """d(coefficient * r)/dU = coefficient * e_p e_c^T (embeddings frozen)."""
    e_p = embeddings.lookup(parent_word)
    e_c = embeddings.lookup(child_word)
    return coefficient * np.outer(e_p, e_c)


def embedding_features(embeddings: EmbeddingTable, parent_word,
                       child_word) -> np.ndarray:
    """(e_p + e_c) / 2, used as real-valued features without the bilinear form."""
    return (embeddings.lookup(parent_word) + embeddings.lookup(child_word)) / 2.0
