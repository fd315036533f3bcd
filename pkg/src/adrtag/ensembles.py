"""Voting and stacked combinations of the CRF and BLSTM taggers.

Both ensembles consume ``X`` as a list of ``(features, vectors)`` pairs: the
CRF feature-set sequence and the dense ``(T, D)`` BLSTM input for the same
tokenisation.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from .blstm import BLSTMTagger
from .crf import CRFTagger
from .exceptions import ConfigurationError, ValidationError
from .tokenization import infer_labels

__all__ = ["average_vote", "augment_with_marginals", "VotingEnsemble", "StackedEnsemble"]


def average_vote(p_crf: np.ndarray, p_blstm: np.ndarray) -> np.ndarray:
    """Per-token argmax of the mean distribution; ties go to the lower label index."""
    if p_crf.shape != p_blstm.shape:
        raise ConfigurationError(f"distribution shapes differ: {p_crf.shape} vs {p_blstm.shape}")
    return np.argmax((p_crf + p_blstm) / 2.0, axis=1)


def augment_with_marginals(vectors: np.ndarray, marginals: np.ndarray) -> np.ndarray:
    """Append CRF per-token label probabilities to the base token vectors."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(vectors) != len(marginals):
        raise ValidationError(f"{len(vectors)} vectors but {len(marginals)} marginal rows")
    return np.hstack([vectors.reshape(len(vectors), -1), marginals])


def _split(X):
    X = list(X)
    return [x[0] for x in X], [x[1] for x in X]


def _resolve_labels(crf: CRFTagger, blstm: BLSTMTagger, y) -> list[str]:
    labels = crf.labels if crf.labels is not None else blstm.labels
    if labels is None:
        labels = infer_labels(y)
    if blstm.labels is not None and crf.labels is not None and list(blstm.labels) != list(crf.labels):
        raise ConfigurationError("CRF and BLSTM label sets differ")
    return list(labels)


class VotingEnsemble(BaseEstimator):
    """CRF and BLSTM trained independently; tokens take the label with the
    highest average of the two predicted probabilities."""

    def __init__(self, crf=None, blstm=None):
        self.crf = crf
        self.blstm = blstm

    def fit(self, X, y, X_val=None, y_val=None):
        feats, vecs = _split(X)
        y = list(y)
        crf = clone(self.crf) if self.crf is not None else CRFTagger()
        blstm = clone(self.blstm) if self.blstm is not None else BLSTMTagger()
        labels = _resolve_labels(crf, blstm, y)
        crf.set_params(labels=labels)
        blstm.set_params(labels=labels)
        self.crf_ = crf.fit(feats, y)
        if X_val is not None:
            _, val_vecs = _split(X_val)
            self.blstm_ = blstm.fit(vecs, y, val_vecs, list(y_val))
        else:
            self.blstm_ = blstm.fit(vecs, y)
        self._check_labels()
        self.classes_ = self.crf_.classes_
        return self

    @classmethod
    def from_components(cls, crf: CRFTagger, blstm: BLSTMTagger) -> "VotingEnsemble":
        ens = cls(crf, blstm)
        ens.crf_, ens.blstm_ = crf, blstm
        ens._check_labels()
        ens.classes_ = crf.classes_
        return ens

    def _check_labels(self):
        if list(self.crf_.classes_) != list(self.blstm_.classes_):
            raise ConfigurationError(
                f"label sets differ: {list(self.crf_.classes_)} vs {list(self.blstm_.classes_)}")

    def predict_proba(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "crf_")
        feats, vecs = _split(X)
        out = []
        for pc, pb in zip(self.crf_.predict_proba(feats), self.blstm_.predict_proba(vecs)):
            if pc.shape != pb.shape:
                raise ConfigurationError(f"distribution shapes differ: {pc.shape} vs {pb.shape}")
            out.append((pc + pb) / 2.0)
        return out

    def predict(self, X) -> list[list[str]]:
        return [[self.classes_[j] for j in np.argmax(p, axis=1)] for p in self.predict_proba(X)]


class StackedEnsemble(BaseEstimator):
    """Two-stage model: CRF marginals become extra BLSTM input dimensions.

    Stage-2 inputs for training are computed with the stage-1 CRF on the same
    data it was trained on, so the BLSTM sees optimistic marginals.
    """

    def __init__(self, crf=None, blstm=None):
        self.crf = crf
        self.blstm = blstm

    def _augment(self, feats, vecs) -> list[np.ndarray]:
        return [augment_with_marginals(v, m) for v, m in zip(vecs, self.crf_.predict_proba(feats))]

    def fit(self, X, y, X_val=None, y_val=None):
        feats, vecs = _split(X)
        y = list(y)
        if not feats:
            raise ValidationError("empty training set")
        crf = clone(self.crf) if self.crf is not None else CRFTagger()
        blstm = clone(self.blstm) if self.blstm is not None else BLSTMTagger()
        labels = _resolve_labels(crf, blstm, y)
        crf.set_params(labels=labels)
        blstm.set_params(labels=labels)
        self.crf_ = crf.fit(feats, y)
        aug = self._augment(feats, vecs)
        if X_val is not None:
            val_feats, val_vecs = _split(X_val)
            self.blstm_ = blstm.fit(aug, y, self._augment(val_feats, val_vecs), list(y_val))
        else:
            self.blstm_ = blstm.fit(aug, y)
        self.classes_ = self.crf_.classes_
        self.input_dim_ = aug[0].shape[1] if aug else None
        return self

    @classmethod
    def from_components(cls, crf: CRFTagger, blstm: BLSTMTagger) -> "StackedEnsemble":
        ens = cls(crf, blstm)
        ens.crf_, ens.blstm_ = crf, blstm
        ens.classes_ = crf.classes_
        ens.input_dim_ = blstm.model_.input_dim
        return ens

    def transform(self, X) -> list[np.ndarray]:
        """Augmented BLSTM inputs for ``X``."""
        check_is_fitted(self, "crf_")
        feats, vecs = _split(X)
        for f in feats:
            if len(f) == 0:
                raise ValidationError("empty sequence")
        return self._augment(feats, vecs)

    def predict_proba(self, X) -> list[np.ndarray]:
        return self.blstm_.predict_proba(self.transform(X))

    def predict(self, X) -> list[list[str]]:
        return [[self.classes_[j] for j in np.argmax(p, axis=1)] for p in self.predict_proba(X)]
