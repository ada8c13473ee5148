"""Semantic parsing with latent dependency-based hybrid trees.

Maps sentences to variable-free tree-structured meaning representations via
a latent-variable CRF over labeled dependency trees, with exact
dynamic-programming inference and an optional bilinear neural arc scorer.
"""

from .chart import (Chart, NoDerivationError, inside_clamped,
                    inside_unclamped, viterbi_decode)
from .corpus import Instance, evaluate, load_corpus
from .features import FeatureFlags, FeatureIndex
from .funql import (MeaningRepresentation, SemanticGrammar, SemanticType,
                    SemanticUnit, build_grammar, load_signatures, parse_mr,
                    serialize_mr)
from .hybridtree import HybridTree, Pattern, Sentence, TreeArc
from .model import Model, ModelConfig
from .neural import BilinearBank, EmbeddingTable
from .scoring import LinearScorer

__version__ = "0.1.0"

__all__ = [
    "Chart", "NoDerivationError", "inside_clamped", "inside_unclamped",
    "viterbi_decode", "Instance", "evaluate", "load_corpus", "FeatureFlags",
    "FeatureIndex", "MeaningRepresentation", "SemanticGrammar",
    "SemanticType", "SemanticUnit", "build_grammar", "load_signatures",
    "parse_mr", "serialize_mr", "HybridTree", "Pattern", "Sentence",
    "TreeArc", "Model", "ModelConfig", "BilinearBank", "EmbeddingTable",
    "LinearScorer", "__version__",
]
