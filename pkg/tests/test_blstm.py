import numpy as np
import pytest

from adrtag.blstm import (
    BLSTMTagger,
    BlstmTrainConfig,
    blstm_predict,
    build_input_vectors,
    init_blstm,
    load_blstm,
    save_blstm,
    train_blstm,
)
from adrtag.embeddings import EmbeddingModel
from adrtag.exceptions import ConfigurationError, ValidationError
from adrtag.tokenization import tokenize_text

from helpers import OVERFIT_BLSTM, blstm_gradient_error, normalization_deviation, overfit_data

LABELS = ["O", "B-AdverseReaction", "I-AdverseReaction"]


@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_finite_differences(seed):
    assert blstm_gradient_error(seed) < 1e-3


def test_outputs_are_distributions():
    assert normalization_deviation(trials=30, seed=1) < 1e-10


def test_zero_weights_give_uniform_output():
    model = init_blstm(3, 2, LABELS)
    for arr in model.arrays().values():
        arr[...] = 0.0
    np.testing.assert_allclose(blstm_predict(model, np.ones((4, 3))), 1 / 3, rtol=1e-12)


def test_reversal_symmetry():
    rng = np.random.default_rng(0)
    model = init_blstm(4, 3, LABELS, seed=1)
    swapped = model.copy()
    swapped.forward, swapped.backward = model.backward, model.forward
    H = model.hidden_size
    swapped.V = np.vstack([model.V[H:], model.V[:H]])
    X = rng.normal(size=(5, 4))
    np.testing.assert_allclose(blstm_predict(swapped, X[::-1]), blstm_predict(model, X)[::-1], atol=1e-12)


def test_length_one_depends_only_on_its_token():
    model = init_blstm(4, 3, LABELS, seed=2)
    x = np.arange(4.0)[None] / 4
    assert blstm_predict(model, x).shape == (1, 3)
    with pytest.raises(ValidationError):
        blstm_predict(model, np.zeros((0, 4)))
    with pytest.raises(ValidationError):
        blstm_predict(model, np.zeros((2, 5)))


def test_config_invariants():
    with pytest.raises(ConfigurationError):
        BlstmTrainConfig(learning_rate=0)
    with pytest.raises(ConfigurationError):
        BlstmTrainConfig(epochs=5, patience=6)
    with pytest.raises(ConfigurationError):
        BlstmTrainConfig(dropout=1.0)
    assert BlstmTrainConfig().learning_rate == 1e-5 and BlstmTrainConfig().patience == 10


@pytest.mark.parametrize("patience,expected", [(0, 2), (3, 4)])
def test_patience(patience, expected):
    _, vecs, labels = overfit_data()
    cfg = BlstmTrainConfig(hidden_size=4, learning_rate=1e-12, epochs=20, patience=patience, dropout=0.0)
    _, log = train_blstm(vecs, labels, vecs, labels, cfg)
    assert log.epochs_run == expected and log.stopped_early and log.best_epoch == 0


def test_overfit_reaches_full_training_accuracy():
    _, vecs, labels = overfit_data()
    tagger = BLSTMTagger(**OVERFIT_BLSTM).fit(vecs, labels)
    log = tagger.training_log_
    assert tagger.score(vecs, labels) >= 0.99
    assert log.epochs_run <= 200
    # best weights restored
    assert max(log.val_f1) == log.val_f1[log.best_epoch]


def test_training_is_deterministic():
    _, vecs, labels = overfit_data()
    cfg = BlstmTrainConfig(hidden_size=5, learning_rate=1e-2, epochs=3, patience=3, dropout=0.2, seed=4)
    a, log_a = train_blstm(vecs, labels, vecs, labels, cfg)
    b, log_b = train_blstm(vecs, labels, vecs, labels, cfg)
    assert log_a == log_b
    for name, arr in a.arrays().items():
        np.testing.assert_array_equal(arr, b.arrays()[name])


def test_save_load_bit_exact(tmp_path):
    model = init_blstm(4, 3, LABELS + ["B-Sévérité"], dropout=0.25, seed=3)
    save_blstm(model, tmp_path / "m.blstm")
    raw = (tmp_path / "m.blstm").read_bytes()
    back = load_blstm(tmp_path / "m.blstm")
    assert back.labels == model.labels and back.dropout == 0.25
    for name, arr in model.arrays().items():
        np.testing.assert_array_equal(arr, back.arrays()[name])
    save_blstm(back, tmp_path / "n.blstm")
    assert (tmp_path / "n.blstm").read_bytes() == raw
    (tmp_path / "bad.blstm").write_bytes(b"x" * 40)
    with pytest.raises(ValidationError):
        load_blstm(tmp_path / "bad.blstm")
    (tmp_path / "long.blstm").write_bytes(raw + b"\0")
    with pytest.raises(ValidationError):
        load_blstm(tmp_path / "long.blstm")


def test_input_vectors_concatenate_and_zero_oov():
    generic = EmbeddingModel(["Rash", "severe"], np.array([[1.0, 2.0], [3.0, 4.0]]))
    target = EmbeddingModel(["rash", "reaction"], np.array([[5.0, 6.0, 7.0], [8.0, 9.0, 1.0]]))
    out = build_input_vectors(tokenize_text("Rash reactions zzz"), generic, target)
    assert out.shape == (3, 5)
    np.testing.assert_array_equal(out[0], [1, 2, 5, 6, 7])
    np.testing.assert_array_equal(out[1], [0, 0, 8, 9, 1])  # lemma fallback in target only
    assert not out[2].any()
    with pytest.raises(ConfigurationError):
        build_input_vectors(["rash"], generic, target, expected_dim=2)
