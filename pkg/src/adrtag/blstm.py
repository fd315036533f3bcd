"""Bidirectional LSTM token classifier in numpy.

Each direction holds stacked gate weights in the order ``[input, forget,
output, candidate]``: ``W`` is ``D x 4H``, ``U`` is ``H x 4H`` and ``b`` is
``4H``.  The forward and backward hidden states are concatenated and
projected to label logits; a softmax gives per-token distributions.
"""

from __future__ import annotations

import copy
import io
import logging
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit, softmax
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .embeddings import EmbeddingModel
from .exceptions import ConfigurationError, TrainingError, ValidationError
from .resources import SuffixLemmatizer
from .tokenization import OUTSIDE, Token, infer_labels

logger = logging.getLogger(__name__)

__all__ = [
    "LstmDirectionParams",
    "BlstmModel",
    "BlstmTrainConfig",
    "TrainingLog",
    "init_blstm",
    "blstm_predict",
    "loss_and_gradients",
    "train_blstm",
    "build_input_vectors",
    "token_f1",
    "save_blstm",
    "load_blstm",
    "BLSTMTagger",
]

MAGIC = b"ADRBLSTM"
FORMAT_VERSION = 1
GATES = ("i", "f", "o", "c")


@dataclass
class LstmDirectionParams:
    W: np.ndarray  # D x 4H
    U: np.ndarray  # H x 4H
    b: np.ndarray  # 4H

    @property
    def hidden_size(self) -> int:
        return self.U.shape[0]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(W_g, U_g, b_g)`` views for one gate."""
        H = self.hidden_size
        k = GATES.index(name)
        sl = slice(k * H, (k + 1) * H)
        return self.W[:, sl], self.U[:, sl], self.b[sl]


@dataclass
class BlstmModel:
    forward: LstmDirectionParams
    backward: LstmDirectionParams
    V: np.ndarray  # 2H x L
    c: np.ndarray  # L
    labels: list[str]
    dropout: float = 0.1

    @property
    def input_dim(self) -> int:
        return self.forward.W.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.forward.hidden_size

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "fW": self.forward.W, "fU": self.forward.U, "fb": self.forward.b,
            "bW": self.backward.W, "bU": self.backward.U, "bb": self.backward.b,
            "V": self.V, "c": self.c,
        }

    def copy(self) -> "BlstmModel":
        return copy.deepcopy(self)


def init_blstm(input_dim: int, hidden_size: int, labels: Sequence[str], dropout: float = 0.1,
               seed: int = 0) -> BlstmModel:
    """Glorot-uniform weights, zero biases except forget-gate bias 1."""
    rng = np.random.default_rng(seed)

    def uni(fan_in, fan_out, shape):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-r, r, size=shape)

    def direction():
        H = hidden_size
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        return LstmDirectionParams(uni(input_dim, H, (input_dim, 4 * H)), uni(H, H, (H, 4 * H)), b)

    L = len(labels)
    fwd = direction()
    bwd = direction()
    V = uni(2 * hidden_size, L, (2 * hidden_size, L))
    return BlstmModel(fwd, bwd, V, np.zeros(L), list(labels), dropout)


# ---------------------------------------------------------------------------
# forward / backward passes over a padded batch


def _pad(seqs: Sequence[np.ndarray], D: int):
    lengths = np.array([len(s) for s in seqs], dtype=int)
    T = int(lengths.max())
    X = np.zeros((len(seqs), T, D))
    for k, s in enumerate(seqs):
        X[k, :len(s)] = s
    return X, lengths


def _reverse(A: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Reverse the valid prefix of every row; padding stays at the end."""
    out = np.zeros_like(A)
    for k, n in enumerate(lengths):
        out[k, :n] = A[k, :n][::-1]
    return out


def _lstm_forward(p: LstmDirectionParams, X: np.ndarray):
    B, T, _ = X.shape
    H = p.hidden_size
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = {k: np.zeros((B, T, H)) for k in ("i", "f", "o", "g", "c", "tc", "h")}
    xw = X @ p.W + p.b
    for t in range(T):
        z = xw[:, t] + h @ p.U
        i = expit(z[:, :H])
        f = expit(z[:, H:2 * H])
        o = expit(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        for k, v in (("i", i), ("f", f), ("o", o), ("g", g), ("c", c), ("tc", tc), ("h", h)):
            cache[k][:, t] = v
    return cache["h"], cache


def _lstm_backward(p: LstmDirectionParams, X: np.ndarray, cache, dH: np.ndarray):
    B, T, _ = X.shape
    H = p.hidden_size
    dW = np.zeros_like(p.W)
    dU = np.zeros_like(p.U)
    db = np.zeros_like(p.b)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dz = np.zeros((B, 4 * H))
    for t in range(T - 1, -1, -1):
        i, f, o, g = cache["i"][:, t], cache["f"][:, t], cache["o"][:, t], cache["g"][:, t]
        tc = cache["tc"][:, t]
        c_prev = cache["c"][:, t - 1] if t > 0 else np.zeros((B, H))
        h_prev = cache["h"][:, t - 1] if t > 0 else np.zeros((B, H))
        dh = dH[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        dz[:, 3 * H:] = dc * i * (1.0 - g * g)
        dW += X[:, t].T @ dz
        dU += h_prev.T @ dz
        db += dz.sum(axis=0)
        dh_next = dz @ p.U.T
        dc_next = dc * f
    return dW, dU, db


def _forward(model: BlstmModel, X: np.ndarray, lengths: np.ndarray, masks=None):
    Hf, cf = _lstm_forward(model.forward, X)
    Xr = _reverse(X, lengths)
    Hr, cr = _lstm_forward(model.backward, Xr)
    Hb = _reverse(Hr, lengths)
    if masks is not None:
        Hf = Hf * masks[0]
        Hb = Hb * masks[1]
    O = np.concatenate([Hf, Hb], axis=-1)
    P = softmax(O @ model.V + model.c, axis=-1)
    return P, (O, Xr, cf, cr)


def blstm_predict(model: BlstmModel, vectors) -> np.ndarray:
    """Per-token label distributions ``(T, n_labels)``; dropout is off."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or len(vectors) == 0:
        raise ValidationError("expected a non-empty (T, D) sequence of vectors")
    if vectors.shape[1] != model.input_dim:
        raise ValidationError(f"input dimension {vectors.shape[1]} != model input {model.input_dim}")
    P, _ = _forward(model, vectors[None], np.array([len(vectors)]))
    return P[0]


def loss_and_gradients(model: BlstmModel, seqs: Sequence[np.ndarray], label_ids: Sequence[np.ndarray],
                       masks=None, reduction: str = "mean"):
    """Cross-entropy over all tokens of a batch and its exact gradient.

    *masks* is an optional pair of ``(B, T, H)`` multipliers applied to the
    forward and backward hidden outputs (inverted dropout).  With
    ``reduction="mean"`` the loss is averaged per token, otherwise summed.
    """
    X, lengths = _pad(seqs, model.input_dim)
    B, T = X.shape[:2]
    Y = np.zeros((B, T), dtype=int)
    valid = np.zeros((B, T))
    for k, y in enumerate(label_ids):
        Y[k, :len(y)] = y
        valid[k, :len(y)] = 1.0
    n_tokens = valid.sum()
    scale = 1.0 / n_tokens if reduction == "mean" else 1.0

    P, (O, Xr, cf, cr) = _forward(model, X, lengths, masks)
    picked = P[np.arange(B)[:, None], np.arange(T)[None, :], Y]
    loss = float(-(np.log(np.maximum(picked, 1e-300)) * valid).sum() * scale)

    dlogits = P.copy()
    dlogits[np.arange(B)[:, None], np.arange(T)[None, :], Y] -= 1.0
    dlogits *= valid[..., None] * scale
    H = model.hidden_size
    grads = {
        "V": O.reshape(-1, 2 * H).T @ dlogits.reshape(-1, model.n_labels),
        "c": dlogits.sum(axis=(0, 1)),
    }
    dO = dlogits @ model.V.T
    dHf, dHb = dO[..., :H], dO[..., H:]
    if masks is not None:
        dHf = dHf * masks[0]
        dHb = dHb * masks[1]
    grads["fW"], grads["fU"], grads["fb"] = _lstm_backward(model.forward, X, cf, dHf)
    grads["bW"], grads["bU"], grads["bb"] = _lstm_backward(model.backward, Xr, cr, _reverse(dHb, lengths))
    return loss, grads


# ---------------------------------------------------------------------------
# training


@dataclass
class BlstmTrainConfig:
    hidden_size: int = 170
    learning_rate: float = 1e-5
    epochs: int = 50
    patience: int = 10
    dropout: float = 0.1
    batch_size: int = 8
    seed: int = 0
    rho: float = 0.9
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.patience < 0 or self.patience > self.epochs:
            raise ConfigurationError("patience must lie in [0, epochs]")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must lie in [0, 1)")
        if self.batch_size <= 0 or self.hidden_size <= 0:
            raise ConfigurationError("batch_size and hidden_size must be positive")


@dataclass
class TrainingLog:
    train_loss: list[float] = field(default_factory=list)
    val_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


def token_f1(gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]]) -> float:
    """Micro F1 (percent) over tokens whose gold or predicted label is not ``O``."""
    tp = fp = fn = 0
    for gs, ps in zip(gold, pred):
        for g, p in zip(gs, ps):
            if g == p:
                tp += g != OUTSIDE
            else:
                fp += p != OUTSIDE
                fn += g != OUTSIDE
    if tp == 0:
        return 0.0
    prec, rec = tp / (tp + fp), tp / (tp + fn)
    return 100.0 * 2 * prec * rec / (prec + rec)


def _predict_labels(model: BlstmModel, seqs) -> list[list[str]]:
    return [[model.labels[j] for j in np.argmax(blstm_predict(model, s), axis=1)] for s in seqs]


def train_blstm(train_X, train_y, val_X, val_y, config: BlstmTrainConfig | None = None,
                labels: Sequence[str] | None = None) -> tuple[BlstmModel, TrainingLog]:
    """RMSprop training with inverted dropout and early stopping on validation token F1.

    The returned parameters are those of the best validation epoch.
    """
    config = config or BlstmTrainConfig()
    train_X = [np.asarray(x, dtype=np.float64) for x in train_X]
    val_X = [np.asarray(x, dtype=np.float64) for x in val_X]
    pairs = [(x, y) for x, y in zip(train_X, train_y) if len(x)]
    val_pairs = [(x, y) for x, y in zip(val_X, val_y) if len(x)]
    if not pairs or not val_pairs:
        raise ValidationError("training and validation sets must be non-empty")
    if labels is None:
        labels = infer_labels([y for _, y in pairs])
    labels = list(labels)
    lab_idx = {lab: j for j, lab in enumerate(labels)}
    D = pairs[0][0].shape[1]
    model = init_blstm(D, config.hidden_size, labels, config.dropout, config.seed)
    rng = np.random.default_rng(config.seed + 1)
    ids = [np.array([lab_idx[lab] for lab in y], dtype=int) for _, y in pairs]
    cache = {k: np.zeros_like(v) for k, v in model.arrays().items()}
    keep = 1.0 - config.dropout

    log = TrainingLog()
    best = model.copy()
    best_f1 = -np.inf
    wait = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            seqs = [pairs[k][0] for k in batch]
            masks = None
            if config.dropout > 0:
                T = max(len(s) for s in seqs)
                shape = (len(seqs), T, config.hidden_size)
                masks = ((rng.random(shape) < keep) / keep, (rng.random(shape) < keep) / keep)
            loss, grads = loss_and_gradients(model, seqs, [ids[k] for k in batch], masks)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite BLSTM loss at epoch {epoch}, batch {n_batches}")
            params = model.arrays()
            for name, g in grads.items():
                cache[name] *= config.rho
                cache[name] += (1.0 - config.rho) * g * g
                params[name] -= config.learning_rate * g / (np.sqrt(cache[name]) + config.epsilon)
            epoch_loss += loss
            n_batches += 1
        f1 = token_f1([y for _, y in val_pairs], _predict_labels(model, [x for x, _ in val_pairs]))
        log.train_loss.append(epoch_loss / n_batches)
        log.val_f1.append(f1)
        logger.debug("blstm epoch %d loss %.5f val F1 %.2f", epoch, log.train_loss[-1], f1)
        if f1 > best_f1:
            best_f1, best, wait = f1, model.copy(), 0
            log.best_epoch = epoch
        else:
            wait += 1
            if wait >= config.patience:
                log.stopped_early = True
                break
    return best, log


# ---------------------------------------------------------------------------
# inputs


def build_input_vectors(tokens: Sequence[Token | str], generic: EmbeddingModel, target: EmbeddingModel,
                        expected_dim: int | None = None, lemmatizer=None) -> np.ndarray:
    """Concatenate generic and target embeddings per token; OOV halves are zero.

    Lookup tries the surface form, its lowercase and finally its lemma.
    """
    if expected_dim is not None:
        for name, m in (("generic", generic), ("target", target)):
            if m.dim != expected_dim:
                raise ConfigurationError(f"{name} embeddings have dimension {m.dim}, expected {expected_dim}")
    lemmatizer = lemmatizer or SuffixLemmatizer()
    out = np.zeros((len(tokens), generic.dim + target.dim))
    for k, tok in enumerate(tokens):
        word = tok.surface if isinstance(tok, Token) else tok
        for model, sl in ((generic, slice(0, generic.dim)), (target, slice(generic.dim, None))):
            vec = model.get(word)
            if vec is None:
                vec = model.get(lemmatizer.lemmatize(word))
            if vec is not None:
                out[k, sl] = vec
    return out


# ---------------------------------------------------------------------------
# serialisation


def save_blstm(model: BlstmModel, path) -> None:
    """Binary container: 8-byte magic, header, labels, then float64 arrays.

    Layout (little-endian): ``MAGIC``, ``uint32`` version, ``uint32`` D, H, L,
    ``float64`` dropout, then for each label a ``uint32`` byte length and its
    UTF-8 bytes, then the row-major arrays fW, fU, fb, bW, bU, bb, V, c.
    """
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IIIId", FORMAT_VERSION, model.input_dim, model.hidden_size, model.n_labels,
                          model.dropout))
    for lab in model.labels:
        raw = lab.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    for arr in model.arrays().values():
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_blstm(path) -> BlstmModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ValidationError(f"{path}: bad magic header")
    version, D, H, L, dropout = struct.unpack_from("<IIIId", data, 8)
    if version != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    pos = 8 + struct.calcsize("<IIIId")
    labels = []
    for _ in range(L):
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        labels.append(data[pos:pos + n].decode("utf-8"))
        pos += n
    shapes = [(D, 4 * H), (H, 4 * H), (4 * H,), (D, 4 * H), (H, 4 * H), (4 * H,), (2 * H, L), (L,)]
    arrays = []
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64))
        pos += 8 * size
    if pos != len(data):
        raise ValidationError(f"{path}: trailing bytes in model file")
    fW, fU, fb, bW, bU, bb, V, c = arrays
    return BlstmModel(LstmDirectionParams(fW, fU, fb), LstmDirectionParams(bW, bU, bb), V, c, labels, dropout)


# ---------------------------------------------------------------------------
# estimator


class BLSTMTagger(BaseEstimator):
    """Estimator over dense token vectors.

    ``fit(X, y, X_val=None, y_val=None)``: ``X`` is a list of ``(T, D)``
    arrays and ``y`` a list of label sequences.  Without a validation set the
    training set is used for early stopping.
    """

    def __init__(self, hidden_size=170, learning_rate=1e-5, epochs=50, patience=10, dropout=0.1,
                 batch_size=8, seed=0, labels=None):
        self.hidden_size = hidden_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.patience = patience
        self.dropout = dropout
        self.batch_size = batch_size
        self.seed = seed
        self.labels = labels

    def _config(self) -> BlstmTrainConfig:
        return BlstmTrainConfig(self.hidden_size, self.learning_rate, self.epochs, self.patience,
                                self.dropout, self.batch_size, self.seed)

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = list(X), list(y)
        if len(X) != len(y):
            raise ValidationError(f"{len(X)} sequences but {len(y)} label sequences")
        if X_val is None:
            X_val, y_val = X, y
        self.model_, self.training_log_ = train_blstm(X, y, list(X_val), list(y_val), self._config(),
                                                      self.labels)
        self.classes_ = np.array(self.model_.labels)
        return self

    def predict_proba(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        return [blstm_predict(self.model_, x) if len(x) else np.zeros((0, self.model_.n_labels)) for x in X]

    def predict(self, X) -> list[list[str]]:
        return [[self.model_.labels[j] for j in np.argmax(p, axis=1)] for p in self.predict_proba(X)]

    def score(self, X, y) -> float:
        pred = self.predict(X)
        total = sum(len(s) for s in y)
        hits = sum(p == g for ps, gs in zip(pred, y) for p, g in zip(ps, gs))
        return hits / total if total else 0.0

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        save_blstm(self.model_, path)

    @classmethod
    def load(cls, path) -> "BLSTMTagger":
        model = load_blstm(path)
        tagger = cls(hidden_size=model.hidden_size, dropout=model.dropout, labels=list(model.labels))
        tagger.model_ = model
        tagger.classes_ = np.array(model.labels)
        return tagger
