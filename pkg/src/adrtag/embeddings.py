"""CBOW word2vec with negative sampling, and k-means over the vector space.

Both trainers are written directly against numpy so that every step is
deterministic for a given seed and corpus order.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigurationError, ValidationError

logger = logging.getLogger(__name__)

__all__ = [
    "EmbeddingModel",
    "ClusterModel",
    "KMeansResult",
    "CbowEmbedder",
    "WordClusterer",
    "train_cbow",
    "cbow_loss",
    "cbow_gradients",
    "context_positions",
    "lloyd_kmeans",
    "kmeans",
    "cluster_feature",
    "load_vectors",
    "save_vectors",
]


@dataclass
class EmbeddingModel:
    words: list[str]
    vectors: np.ndarray  # input (context) vectors, |V| x d
    output_vectors: np.ndarray | None = None
    hyperparams: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.words):
            raise ValidationError(f"vector matrix shape {self.vectors.shape} does not match {len(self.words)} words")
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValidationError("duplicate words in vocabulary")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[self.index[word]]

    def key_for(self, word: str) -> str | None:
        """Vocabulary key for *word*: exact form first, then lowercase."""
        if word in self.index:
            return word
        low = word.lower()
        return low if low in self.index else None

    def get(self, word: str) -> np.ndarray | None:
        key = self.key_for(word)
        return None if key is None else self.vectors[self.index[key]]

    def similarity(self, a: str, b: str) -> float:
        u, v = self[a], self[b]
        return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))


def _fmt(x: float) -> str:
    return repr(float(x))


def save_vectors(model: EmbeddingModel, path) -> None:
    """Write the text format: ``|V| d`` header then ``word v1 ... vd`` per line.

    Values use Python's shortest round-trip float repr, so load/save is bit-exact.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(model.words)} {model.dim}\n")
        for word, vec in zip(model.words, model.vectors):
            fh.write(word + " " + " ".join(_fmt(x) for x in vec) + "\n")


def load_vectors(path, expected_dim: int | None = None) -> EmbeddingModel:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValidationError(f"{path}: first line must be '<vocab size> <dim>'")
        n, d = int(header[0]), int(header[1])
        if expected_dim is not None and d != expected_dim:
            raise ConfigurationError(f"{path}: declared dimension {expected_dim} but file has {d}")
        words, rows = [], []
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != d + 1:
                raise ValidationError(f"{path}:{lineno}: expected {d} values")
            words.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(words) != n:
        raise ValidationError(f"{path}: header says {n} words, found {len(words)}")
    vectors = np.array(rows, dtype=np.float64).reshape(n, d)
    return EmbeddingModel(words, vectors)


# ---------------------------------------------------------------------------
# CBOW


def context_positions(i: int, n: int, window: int) -> list[int]:
    """Positions ``max(0, i-window) .. min(n-1, i+window)`` excluding *i*."""
    return [j for j in range(max(0, i - window), min(n, i + window + 1)) if j != i]


def cbow_loss(input_vectors, output_vectors, context, center, negatives) -> float:
    """Negative-sampling loss for one (context, center) pair.

    ``-log s(u_c . h) - sum_n log s(-u_n . h)`` with ``h`` the mean of the
    context input vectors.
    """
    h = np.mean(input_vectors[np.asarray(context)], axis=0)
    pos = output_vectors[center] @ h
    neg = output_vectors[np.asarray(negatives, dtype=int)] @ h if len(negatives) else np.zeros(0)
    return float(np.logaddexp(0.0, -pos) + np.sum(np.logaddexp(0.0, neg)))


def cbow_gradients(input_vectors, output_vectors, context, center, negatives):
    """Analytic gradient of :func:`cbow_loss`.

    Returns ``(loss, grad_h_rows, targets, grad_out_rows)``: the gradient for
    each context row (identical, ``dh / len(context)``) and for each output
    row in ``targets = [center] + negatives``.
    """
    context = np.asarray(context, dtype=int)
    targets = np.concatenate(([center], np.asarray(negatives, dtype=int))).astype(int)
    labels = np.zeros(len(targets))
    labels[0] = 1.0
    h = input_vectors[context].mean(axis=0)
    scores = output_vectors[targets] @ h
    loss = float(np.logaddexp(0.0, -scores[0]) + np.sum(np.logaddexp(0.0, scores[1:])))
    g = expit(scores) - labels
    grad_out = np.outer(g, h)
    grad_h = g @ output_vectors[targets]
    return loss, grad_h / len(context), targets, grad_out


class _NoiseSampler:
    def __init__(self, counts: np.ndarray, power: float, rng: np.random.Generator):
        weights = counts.astype(np.float64) ** power
        self.cdf = np.cumsum(weights / weights.sum())
        self.cdf[-1] = 1.0
        self.rng = rng

    def draw(self, k: int) -> np.ndarray:
        return np.searchsorted(self.cdf, self.rng.random(k), side="right")


def train_cbow(
    sentences: Sequence[Sequence[str]],
    dim: int = 200,
    window: int = 5,
    negatives: int = 5,
    min_count: int = 2,
    epochs: int = 5,
    learning_rate: float = 0.025,
    seed: int = 0,
    noise_power: float = 0.75,
) -> EmbeddingModel:
    """Train CBOW embeddings with negative sampling.

    The learning rate decays linearly from ``learning_rate`` to
    ``learning_rate / 100`` over all training positions.  Noise words are
    drawn from the unigram distribution raised to ``noise_power``; draws
    equal to the center word are discarded.
    """
    if dim <= 0 or window <= 0 or negatives < 0 or epochs < 0:
        raise ConfigurationError("dim and window must be positive, negatives and epochs non-negative")
    counts = Counter(w for s in sentences for w in s)
    vocab = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    if not vocab:
        raise ConfigurationError(f"empty vocabulary after min_count={min_count} filtering")
    index = {w: i for i, w in enumerate(vocab)}
    encoded = [np.array([index[w] for w in s if w in index], dtype=int) for s in sentences]
    encoded = [s for s in encoded if len(s)]

    rng = np.random.default_rng(seed)
    inp = (rng.random((len(vocab), dim)) - 0.5) / dim
    out = np.zeros((len(vocab), dim))
    sampler = _NoiseSampler(np.array([counts[w] for w in vocab]), noise_power, rng)

    total = max(1, epochs * sum(len(s) for s in encoded))
    lr_floor = learning_rate / 100.0
    done = 0
    history = []
    for epoch in range(epochs):
        epoch_loss, n_pairs = 0.0, 0
        for sent in encoded:
            n = len(sent)
            for i in range(n):
                lr = learning_rate - (learning_rate - lr_floor) * (done / total)
                done += 1
                ctx = sent[max(0, i - window):i].tolist() + sent[i + 1:i + window + 1].tolist()
                if not ctx:
                    continue
                center = int(sent[i])
                negs = sampler.draw(negatives)
                negs = negs[negs != center]
                loss, grad_ctx, targets, grad_out = cbow_gradients(inp, out, ctx, center, negs)
                np.subtract.at(out, targets, lr * grad_out)
                np.subtract.at(inp, np.asarray(ctx), lr * grad_ctx)
                epoch_loss += loss
                n_pairs += 1
        history.append(epoch_loss / max(1, n_pairs))
        logger.debug("cbow epoch %d mean loss %.5f", epoch, history[-1])
    if not np.all(np.isfinite(inp)):
        raise ValidationError("non-finite embedding values after training")
    params = dict(dim=dim, window=window, negatives=negatives, min_count=min_count,
                  epochs=epochs, learning_rate=learning_rate, seed=seed)
    return EmbeddingModel(vocab, inp, out, params, history)


class CbowEmbedder(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`train_cbow`.

    ``fit`` takes a list of token lists; ``transform`` maps each token list to
    a ``(len, dim)`` array with zero rows for out-of-vocabulary tokens.
    """

    def __init__(self, dim=200, window=5, negatives=5, min_count=2, epochs=5, learning_rate=0.025, seed=0):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.min_count = min_count
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y=None):
        self.model_ = train_cbow(X, **self.get_params())
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        out = []
        for sent in X:
            arr = np.zeros((len(sent), self.model_.dim))
            for k, w in enumerate(sent):
                vec = self.model_.get(w)
                if vec is not None:
                    arr[k] = vec
            out.append(arr)
        return out


# ---------------------------------------------------------------------------
# k-means


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia_history: list[float]
    n_iter: int

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(d2) / total, rng.random(), side="right"))
            idx = min(idx, n - 1)
        else:  # fewer distinct points than k
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists(X, X[[idx]])[:, 0])
    return X[chosen].copy()


def lloyd_kmeans(X, k: int, seed: int = 0, max_iter: int = 100) -> KMeansResult:
    """Lloyd iterations from a seeded k-means++ start.

    Stops at an assignment fixpoint or after ``max_iter`` assignment steps.
    The inertia recorded after every assignment step never increases: an
    empty cluster keeps its previous centroid.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("expected a 2-d array of points")
    if len(X) < k:
        raise ConfigurationError(f"cannot form {k} clusters from {len(X)} points")
    if k <= 0:
        raise ConfigurationError("k must be positive")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(X, k, rng)
    labels = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d = _sq_dists(X, centroids)
        new_labels = np.argmin(d, axis=1)
        history.append(float(d[np.arange(len(X)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = X[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    return KMeansResult(centroids, new_labels, history, n_iter)


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignment: dict[str, int]
    inertia_history: list[float] = field(default_factory=list)

    def __contains__(self, word: str) -> bool:
        return word in self.assignment

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{self.k}\n")
            for word in sorted(self.assignment):
                fh.write(f"{word}\t{self.assignment[word]}\n")

    @classmethod
    def load(cls, path) -> "ClusterModel":
        with open(path, encoding="utf-8") as fh:
            k = int(fh.readline())
            assignment = {}
            for line in fh:
                word, _, cid = line.rstrip("\n").rpartition("\t")
                assignment[word] = int(cid)
        return cls(k, np.zeros((k, 0)), assignment)


def kmeans(model: EmbeddingModel, k: int = 50, seed: int = 0, max_iter: int = 100) -> ClusterModel:
    result = lloyd_kmeans(model.vectors, k, seed, max_iter)
    assignment = {w: int(c) for w, c in zip(model.words, result.labels)}
    return ClusterModel(k, result.centroids, assignment, result.inertia_history)


class WordClusterer(ClusterMixin, BaseEstimator):
    def __init__(self, n_clusters=50, max_iter=100, seed=0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y=None):
        if isinstance(X, EmbeddingModel):
            X = X.vectors
        result = lloyd_kmeans(X, self.n_clusters, self.seed, self.max_iter)
        self.cluster_centers_ = result.centroids
        self.labels_ = result.labels
        self.inertia_history_ = result.inertia_history
        self.inertia_ = result.inertia
        self.n_iter_ = result.n_iter
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        return np.argmin(_sq_dists(np.asarray(X, dtype=np.float64), self.cluster_centers_), axis=1)


def cluster_feature(word: str, cluster_model: ClusterModel | None, fallback_lemma: str) -> str:
    """``CL=<id>`` for in-vocabulary words, otherwise ``LEMMA=<fallback_lemma>``."""
    if cluster_model is not None and word in cluster_model.assignment:
        return f"CL={cluster_model.assignment[word]}"
    return f"LEMMA={fallback_lemma}"
