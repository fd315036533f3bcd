"""Linear-chain conditional random field over sparse binary features.

The potential of a label path ``y`` for a feature sequence ``x`` is::

    score(x, y) = sum_t sum_{f in x_t} W[f, y_t] + sum_{t>0} A[y_{t-1}, y_t]

All inference runs in log space.  Training minimises the L2-regularised
negative log-likelihood with L-BFGS (scipy) or plain gradient descent with
backtracking line search.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigurationError, TrainingError, ValidationError
from .tokenization import infer_labels

logger = logging.getLogger(__name__)

__all__ = [
    "CrfModel",
    "CrfTrainConfig",
    "score_path",
    "forward_backward",
    "viterbi",
    "nll_and_gradient",
    "train_crf",
    "save_crf",
    "load_crf",
    "CRFTagger",
]

FORMAT_HEADER = "# adrtag-crf v1"


@dataclass
class CrfModel:
    labels: list[str]
    feature_index: dict[str, int] = field(default_factory=dict)
    unary: np.ndarray | None = None  # n_features x n_labels
    transitions: np.ndarray | None = None  # n_labels x n_labels, [prev, cur]
    l2_sigma: float = 10.0

    def __post_init__(self):
        self.labels = list(self.labels)
        if len(set(self.labels)) != len(self.labels) or not self.labels:
            raise ConfigurationError("label set must be non-empty and unique")
        L = len(self.labels)
        if self.unary is None:
            self.unary = np.zeros((len(self.feature_index), L))
        if self.transitions is None:
            self.transitions = np.zeros((L, L))
        self.unary = np.asarray(self.unary, dtype=np.float64)
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        if self.unary.shape != (len(self.feature_index), L) or self.transitions.shape != (L, L):
            raise ValidationError("weight shapes do not match feature/label sets")
        if self.l2_sigma <= 0:
            raise ConfigurationError("l2_sigma must be positive")
        self.label_index = {lab: i for i, lab in enumerate(self.labels)}

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def copy(self) -> "CrfModel":
        return CrfModel(list(self.labels), dict(self.feature_index), self.unary.copy(),
                        self.transitions.copy(), self.l2_sigma)

    # -- encoding -------------------------------------------------------
    def encode(self, features: Sequence[Iterable[str]]) -> sp.csr_matrix:
        """Binary (T x n_features) indicator matrix; unseen features are dropped."""
        indptr, indices = [0], []
        for keys in features:
            idx = sorted({self.feature_index[k] for k in keys if k in self.feature_index})
            indices.extend(idx)
            indptr.append(len(indices))
        data = np.ones(len(indices))
        return sp.csr_matrix((data, indices, indptr), shape=(len(features), len(self.feature_index)))

    def unary_scores(self, features) -> np.ndarray:
        X = features if sp.issparse(features) else self.encode(features)
        return np.asarray(X @ self.unary)

    def label_ids(self, labels: Sequence) -> np.ndarray:
        out = []
        for lab in labels:
            if isinstance(lab, (int, np.integer)):
                if not 0 <= lab < self.n_labels:
                    raise ValidationError(f"label index {lab} out of range")
                out.append(int(lab))
            elif lab in self.label_index:
                out.append(self.label_index[lab])
            else:
                raise ValidationError(f"unknown label {lab!r}")
        return np.array(out, dtype=int)

    # -- flat parameter vector -------------------------------------------
    def get_weights(self) -> np.ndarray:
        return np.concatenate([self.unary.ravel(), self.transitions.ravel()])

    def set_weights(self, w: np.ndarray) -> None:
        n = self.unary.size
        self.unary = np.array(w[:n]).reshape(self.unary.shape)
        self.transitions = np.array(w[n:]).reshape(self.transitions.shape)


# ---------------------------------------------------------------------------
# inference on score matrices


def _path_score(U: np.ndarray, A: np.ndarray, y: np.ndarray) -> float:
    s = U[np.arange(len(y)), y].sum()
    if len(y) > 1:
        s += A[y[:-1], y[1:]].sum()
    return float(s)


def _lse(M: np.ndarray, axis: int) -> np.ndarray:
    # scipy.special.logsumexp has ~100us of overhead per call, which dominates
    # on the tiny matrices of these recursions
    m = M.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.log(np.exp(M - m).sum(axis=axis)) + np.squeeze(m, axis=axis)


def _forward_backward(U: np.ndarray, A: np.ndarray):
    T, L = U.shape
    alpha = np.empty((T, L))
    beta = np.empty((T, L))
    alpha[0] = U[0]
    for t in range(1, T):
        alpha[t] = _lse(alpha[t - 1][:, None] + A, 0) + U[t]
    beta[T - 1] = 0.0
    for t in range(T - 2, -1, -1):
        beta[t] = _lse(A + (U[t + 1] + beta[t + 1])[None, :], 1)
    log_z = float(_lse(alpha[T - 1], 0))
    return alpha, beta, log_z


def _viterbi(U: np.ndarray, A: np.ndarray) -> np.ndarray:
    T, L = U.shape
    delta = U[0].copy()
    back = np.zeros((T, L), dtype=int)
    for t in range(1, T):
        cand = delta[:, None] + A  # [prev, cur]
        back[t] = np.argmax(cand, axis=0)  # first maximum = lowest label index
        delta = cand[back[t], np.arange(L)] + U[t]
    path = np.empty(T, dtype=int)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def _check_nonempty(features):
    n = features.shape[0] if sp.issparse(features) else len(features)
    if n == 0:
        raise ValidationError("empty sequence")


def score_path(model: CrfModel, features, labels: Sequence) -> float:
    """Unnormalised log-potential of a label path."""
    y = model.label_ids(labels)
    n = features.shape[0] if sp.issparse(features) else len(features)
    if len(y) != n:
        raise ValidationError(f"{n} feature vectors but {len(y)} labels")
    if n == 0:
        return 0.0
    return _path_score(model.unary_scores(features), model.transitions, y)


def forward_backward(model: CrfModel, features) -> tuple[float, np.ndarray]:
    """``(log Z, marginals)``; ``marginals[t, j] = P(y_t = labels[j] | x)``."""
    _check_nonempty(features)
    U = model.unary_scores(features)
    alpha, beta, log_z = _forward_backward(U, model.transitions)
    return log_z, np.exp(alpha + beta - log_z)


def viterbi(model: CrfModel, features) -> list[str]:
    _check_nonempty(features)
    path = _viterbi(model.unary_scores(features), model.transitions)
    return [model.labels[j] for j in path]


# ---------------------------------------------------------------------------
# likelihood


def _sequence_nll_grad(X: sp.csr_matrix, y: np.ndarray, W: np.ndarray, A: np.ndarray):
    U = np.asarray(X @ W)
    alpha, beta, log_z = _forward_backward(U, A)
    marg = np.exp(alpha + beta - log_z)
    T, L = U.shape
    loss = log_z - _path_score(U, A, y)
    resid = marg.copy()
    resid[np.arange(T), y] -= 1.0
    gW = X.T @ resid
    gA = np.zeros_like(A)
    if T > 1:
        pair = alpha[:-1, :, None] + A[None, :, :] + (U[1:] + beta[1:])[:, None, :] - log_z
        gA = np.exp(pair).sum(axis=0)
        np.add.at(gA, (y[:-1], y[1:]), -1.0)
    return loss, np.asarray(gW), gA


def _prepare(model: CrfModel, batch) -> list[tuple[sp.csr_matrix, np.ndarray]]:
    prepared = []
    for features, labels in batch:
        X = features if sp.issparse(features) else model.encode(features)
        y = model.label_ids(labels)
        if X.shape[0] != len(y):
            raise ValidationError(f"{X.shape[0]} feature vectors but {len(y)} labels")
        if len(y):
            prepared.append((X, y))
    return prepared


def _objective(model: CrfModel, prepared, w: np.ndarray):
    n = model.unary.size
    W = w[:n].reshape(model.unary.shape)
    A = w[n:].reshape(model.transitions.shape)
    loss = 0.0
    gW = np.zeros_like(W)
    gA = np.zeros_like(A)
    for X, y in prepared:
        l, a, b = _sequence_nll_grad(X, y, W, A)
        loss += l
        gW += a
        gA += b
    var = model.l2_sigma ** 2
    loss += float(w @ w) / (2.0 * var)
    grad = np.concatenate([gW.ravel(), gA.ravel()]) + w / var
    return loss, grad


def nll_and_gradient(model: CrfModel, batch) -> tuple[float, np.ndarray, np.ndarray]:
    """Regularised negative log-likelihood of *batch* and its gradient.

    *batch* is a list of ``(features, gold_labels)``.  Returns
    ``(loss, grad_unary, grad_transitions)`` where::

        loss = sum_i (log Z_i - score(x_i, y_i)) + ||w||^2 / (2 sigma^2)
    """
    if not batch:
        raise ValidationError("empty batch")
    loss, grad = _objective(model, _prepare(model, batch), model.get_weights())
    n = model.unary.size
    return loss, grad[:n].reshape(model.unary.shape), grad[n:].reshape(model.transitions.shape)


# ---------------------------------------------------------------------------
# training


@dataclass
class CrfTrainConfig:
    l2_sigma: float = 10.0
    max_iters: int = 100
    tolerance: float = 1e-5
    solver: str = "lbfgs"  # or "gd"
    labels: list[str] | None = None


@dataclass
class CrfTrainLog:
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    converged: bool = False


def build_feature_index(feature_seqs: Iterable[Sequence[Iterable[str]]]) -> dict[str, int]:
    keys = sorted({k for seq in feature_seqs for keys in seq for k in keys})
    return {k: i for i, k in enumerate(keys)}


def _gradient_descent(fun, w0, max_iters, tolerance, log):
    w = w0.copy()
    loss, grad = fun(w)
    step = 1.0
    for _ in range(max_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tolerance:
            log.converged = True
            break
        while True:  # Armijo backtracking
            w_new = w - step * grad
            loss_new, grad_new = fun(w_new)
            if np.isfinite(loss_new) and loss_new <= loss - 1e-4 * step * gnorm ** 2:
                break
            step *= 0.5
            if step < 1e-20:
                return w
        w, loss, grad = w_new, loss_new, grad_new
        log.losses.append(loss)
        log.grad_norms.append(float(np.linalg.norm(grad)))
        step *= 2.0
    else:
        log.converged = float(np.linalg.norm(grad)) < tolerance
    return w


def train_crf(dataset, config: CrfTrainConfig | None = None, return_log: bool = False):
    """Fit a CRF on ``[(features, labels), ...]`` starting from zero weights."""
    config = config or CrfTrainConfig()
    dataset = list(dataset)
    if not dataset:
        raise ValidationError("empty training set")
    labels = config.labels or infer_labels(y for _, y in dataset)
    model = CrfModel(labels, build_feature_index(x for x, _ in dataset), l2_sigma=config.l2_sigma)
    prepared = _prepare(model, dataset)
    log = CrfTrainLog()

    def fun(w):
        loss, grad = _objective(model, prepared, w)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite CRF loss {loss}")
        return loss, grad

    w0 = model.get_weights()
    if config.max_iters > 0 and prepared:
        if config.solver == "lbfgs":
            def record(intermediate_result):
                log.losses.append(float(intermediate_result.fun))
            res = minimize(fun, w0, jac=True, method="L-BFGS-B", callback=record,
                           options={"maxiter": config.max_iters, "gtol": config.tolerance})
            w = res.x
            log.converged = bool(res.success)
        elif config.solver == "gd":
            w = _gradient_descent(fun, w0, config.max_iters, config.tolerance, log)
        else:
            raise ConfigurationError(f"unknown CRF solver {config.solver!r}")
        model.set_weights(w)
    logger.info("CRF trained: %d features, %d labels, %d iterations", len(model.feature_index),
                model.n_labels, len(log.losses))
    return (model, log) if return_log else model


# ---------------------------------------------------------------------------
# serialisation


def _fmt(x: float) -> str:
    return repr(float(x))


def save_crf(model: CrfModel, path) -> None:
    """Versioned text format: labels, sparse ``feature<TAB>label<TAB>weight`` lines, transitions."""
    inv = sorted(model.feature_index.items())
    lines = [FORMAT_HEADER, "labels\t" + "\t".join(model.labels), f"l2_sigma\t{_fmt(model.l2_sigma)}"]
    body = []
    for feat, fi in inv:
        row = model.unary[fi]
        for j, lab in enumerate(model.labels):
            if row[j] != 0.0:
                body.append(f"{feat}\t{lab}\t{_fmt(row[j])}")
    lines.append(f"weights\t{len(body)}")
    lines.extend(body)
    lines.append("transitions")
    lines.extend("\t".join(_fmt(x) for x in row) for row in model.transitions)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_crf(path) -> CrfModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines[0] != FORMAT_HEADER:
        raise ValidationError(f"{path}: not a CRF model file")
    labels = lines[1].split("\t")[1:]
    sigma = float(lines[2].split("\t")[1])
    n = int(lines[3].split("\t")[1])
    entries = [ln.split("\t") for ln in lines[4:4 + n]]
    feats = sorted({e[0] for e in entries})
    index = {f: i for i, f in enumerate(feats)}
    lab_idx = {lab: j for j, lab in enumerate(labels)}
    unary = np.zeros((len(feats), len(labels)))
    for feat, lab, val in entries:
        unary[index[feat], lab_idx[lab]] = float(val)
    if lines[4 + n] != "transitions":
        raise ValidationError(f"{path}: missing transitions block")
    rows = [[float(x) for x in ln.split("\t")] for ln in lines[5 + n:5 + n + len(labels)]]
    return CrfModel(labels, index, unary, np.array(rows).reshape(len(labels), len(labels)), sigma)


# ---------------------------------------------------------------------------
# estimator


class CRFTagger(BaseEstimator):
    """Sequence tagger estimator.

    ``X`` is a list of sequences, each a list of feature-key sets; ``y`` a
    list of label sequences.  ``predict_proba`` returns per-token marginals
    as ``(T, n_labels)`` arrays ordered like ``classes_``.
    """

    def __init__(self, labels=None, l2_sigma=10.0, max_iters=100, tolerance=1e-5, solver="lbfgs"):
        self.labels = labels
        self.l2_sigma = l2_sigma
        self.max_iters = max_iters
        self.tolerance = tolerance
        self.solver = solver

    def fit(self, X, y):
        X, y = list(X), list(y)
        if len(X) != len(y):
            raise ValidationError(f"{len(X)} sequences but {len(y)} label sequences")
        config = CrfTrainConfig(self.l2_sigma, self.max_iters, self.tolerance, self.solver,
                                list(self.labels) if self.labels is not None else None)
        self.model_, self.training_log_ = train_crf(zip(X, y), config, return_log=True)
        self.classes_ = np.array(self.model_.labels)
        return self

    def predict(self, X) -> list[list[str]]:
        check_is_fitted(self, "model_")
        return [viterbi(self.model_, x) if len(x) else [] for x in X]

    def predict_proba(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        return [forward_backward(self.model_, x)[1] if len(x) else np.zeros((0, self.model_.n_labels))
                for x in X]

    def score(self, X, y) -> float:
        """Token accuracy of the Viterbi paths."""
        pred = self.predict(X)
        total = sum(len(s) for s in y)
        hits = sum(p == g for ps, gs in zip(pred, y) for p, g in zip(ps, gs))
        return hits / total if total else 0.0

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        save_crf(self.model_, path)

    @classmethod
    def load(cls, path) -> "CRFTagger":
        model = load_crf(path)
        tagger = cls(labels=list(model.labels), l2_sigma=model.l2_sigma)
        tagger.model_ = model
        tagger.classes_ = np.array(model.labels)
        return tagger
