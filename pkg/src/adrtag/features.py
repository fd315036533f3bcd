"""Sparse binary CRF features with a symmetric context window."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import MentionAnnotation
from .embeddings import ClusterModel, cluster_feature
from .exceptions import ConfigurationError
from .resources import (
    Lemmatizer,
    Lexicon,
    RulePosTagger,
    SuffixLemmatizer,
    TokenAnnotator,
    bundled_lexicon,
    bundled_semtypes,
)
from .tokenization import Token

logger = logging.getLogger(__name__)

__all__ = ["FeatureConfig", "FeatureResources", "extract_features", "token_mask", "CrfFeaturizer"]

FeatureVector = frozenset


@dataclass(frozen=True)
class FeatureConfig:
    window: int = 5
    use_lemma: bool = True
    use_pos: bool = True
    use_semtype: bool = True
    use_lexicons: bool = True
    use_clusters: bool = True
    adr_context_feature: bool = False


@dataclass
class FeatureResources:
    lexicons: list[Lexicon] = field(default_factory=list)
    pos_tagger: TokenAnnotator | None = None
    semtype_annotator: TokenAnnotator | None = None
    cluster_model: ClusterModel | None = None
    lemmatizer: Lemmatizer = field(default_factory=SuffixLemmatizer)

    @classmethod
    def bundled(cls, lexicons: Iterable[str] = ("adr",), cluster_model: ClusterModel | None = None,
                extra_lexicons: Iterable[Lexicon] = ()) -> "FeatureResources":
        lex = [bundled_lexicon(name) for name in lexicons] + list(extra_lexicons)
        return cls(lex, RulePosTagger(), bundled_semtypes(), cluster_model)


def token_mask(tokens: Sequence[Token], mentions: Iterable) -> list[bool]:
    """Mark tokens whose midpoint falls inside any of *mentions*.

    Mentions may be :class:`MentionAnnotation` objects or ``(start, end)``
    pairs, in the same (unit-local) coordinates as the tokens.
    """
    spans = []
    for m in mentions:
        if isinstance(m, MentionAnnotation):
            spans.extend(m.spans)
        else:
            spans.append(tuple(m))
    mask = []
    for tok in tokens:
        mid2 = tok.start + tok.end
        mask.append(any(2 * s <= mid2 < 2 * e for s, e in spans))
    return mask


def _annotate(annotator: TokenAnnotator | None, words: list[str]) -> list[str]:
    if annotator is None:
        return ["UNK"] * len(words)
    try:
        tags = list(annotator.tag(words))
        if len(tags) != len(words):
            raise ValueError(f"returned {len(tags)} tags for {len(words)} tokens")
        return [t if t else "UNK" for t in tags]
    except Exception as exc:  # annotator failures degrade the feature family
        logger.warning("annotator %s failed (%s); using UNK", getattr(annotator, "name", annotator), exc)
        return ["UNK"] * len(words)


def _token_features(tokens: Sequence[Token], config: FeatureConfig, resources: FeatureResources) -> list[list[str]]:
    words = [t.surface for t in tokens]
    lemmas = [resources.lemmatizer.lemmatize(w) for w in words]
    per_token: list[list[str]] = [[] for _ in tokens]
    if config.use_lemma:
        for k, lemma in enumerate(lemmas):
            per_token[k].append(f"LEMMA={lemma}")
    if config.use_pos:
        for k, tag in enumerate(_annotate(resources.pos_tagger, words)):
            per_token[k].append(f"POS={tag}")
    if config.use_semtype:
        for k, tag in enumerate(_annotate(resources.semtype_annotator, words)):
            per_token[k].append(f"SEM={tag}")
    if config.use_lexicons:
        for lex in resources.lexicons:
            for s, e in lex.match(words, lemmas):
                for k in range(s, e):
                    per_token[k].append(f"LEX:{lex.name}=1")
    if config.use_clusters:
        for k, lemma in enumerate(lemmas):
            per_token[k].append(f"CLUST={cluster_feature(lemma, resources.cluster_model, lemma)}")
    return per_token


def extract_features(
    tokens: Sequence[Token],
    config: FeatureConfig | None = None,
    resources: FeatureResources | None = None,
    adr_mentions: Iterable | None = None,
) -> list[FeatureVector]:
    """One feature set per token, prefixed with the window offset (``-2:POS=NN``).

    With ``config.adr_context_feature`` the key ``ADR_IN_CONTEXT=1`` is added
    to every position whose window contains a token of *adr_mentions*.
    """
    config = config or FeatureConfig()
    resources = resources or FeatureResources()
    if config.adr_context_feature and adr_mentions is None:
        raise ConfigurationError("adr_context_feature is enabled but no ADR mentions were supplied")
    base = _token_features(tokens, config, resources)
    n = len(tokens)
    w = config.window
    adr = token_mask(tokens, adr_mentions) if config.adr_context_feature else None
    out = []
    for i in range(n):
        keys = set()
        for o in range(-w, w + 1):
            j = i + o
            if 0 <= j < n:
                keys.update(f"{o}:{f}" for f in base[j])
        if adr is not None and any(adr[max(0, i - w):i + w + 1]):
            keys.add("ADR_IN_CONTEXT=1")
        out.append(frozenset(keys))
    return out


class CrfFeaturizer(TransformerMixin, BaseEstimator):
    """Stateless transformer: token sequences in, feature-set sequences out.

    ``transform`` accepts a list of token lists, or of ``(tokens, adr_mentions)``
    pairs when ``config.adr_context_feature`` is set.
    """

    def __init__(self, config=None, resources=None):
        self.config = config
        self.resources = resources

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        config = self.config or FeatureConfig()
        out = []
        for item in X:
            if config.adr_context_feature:
                tokens, adr = item
            else:
                tokens, adr = item, None
            out.append(extract_features(tokens, config, self.resources, adr))
        return out
