"""Adverse drug reaction mention tagging for drug label text.

Structure-aware document splitting, CRF and BLSTM sequence taggers, their
voting and stacked ensembles, rule-based negation and animal taggers, and
token / mention level evaluation.
"""

from .corpus import AnnotatedDocument, EntityClass, MentionAnnotation, load_corpus, write_corpus
from .crf import CRFTagger
from .blstm import BLSTMTagger
from .embeddings import CbowEmbedder, WordClusterer, train_cbow, kmeans
from .ensembles import StackedEnsemble, VotingEnsemble
from .evaluation import MatchMode, SplitSpec, mention_prf, split_corpus, token_prf
from .exceptions import AdrTagError, ConfigurationError, TrainingError, ValidationError
from .features import CrfFeaturizer, FeatureConfig, FeatureResources, extract_features
from .pipeline import RunConfig, TaggingSystem, run_pipeline
from .structure import SplitStrategy, parse_structure, split_document
from .tokenization import Token, TaggedSequence, tokenize

__version__ = "0.1.0"

__all__ = [
    "AnnotatedDocument",
    "EntityClass",
    "MentionAnnotation",
    "load_corpus",
    "write_corpus",
    "CRFTagger",
    "BLSTMTagger",
    "CbowEmbedder",
    "WordClusterer",
    "train_cbow",
    "kmeans",
    "VotingEnsemble",
    "StackedEnsemble",
    "MatchMode",
    "SplitSpec",
    "mention_prf",
    "split_corpus",
    "token_prf",
    "AdrTagError",
    "ConfigurationError",
    "TrainingError",
    "ValidationError",
    "CrfFeaturizer",
    "FeatureConfig",
    "FeatureResources",
    "extract_features",
    "RunConfig",
    "TaggingSystem",
    "run_pipeline",
    "SplitStrategy",
    "parse_structure",
    "split_document",
    "Token",
    "TaggedSequence",
    "tokenize",
]
