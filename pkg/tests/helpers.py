"""Independent oracles and shared sanity computations for the test suite."""

import itertools

import numpy as np
from scipy.special import logsumexp

from adrtag.blstm import BLSTMTagger, blstm_predict, init_blstm, loss_and_gradients
from adrtag.crf import CRFTagger, CrfModel, forward_backward, nll_and_gradient, score_path, viterbi
from adrtag.ensembles import StackedEnsemble
from adrtag.synthetic import overfit_corpus

ACCEPTANCE_LINES: list[str] = []

# ---------------------------------------------------------------------------
# CRF


def random_crf(rng, n_features, n_labels, scale=1.0):
    labels = [f"L{j}" for j in range(n_labels)]
    index = {f"f{k}": k for k in range(n_features)}
    return CrfModel(labels, index, scale * rng.normal(size=(n_features, n_labels)),
                    scale * rng.normal(size=(n_labels, n_labels)))


def random_features(rng, n_features, T, density=0.4):
    return [{f"f{k}" for k in range(n_features) if rng.random() < density} for _ in range(T)]


def brute_force(model, features):
    """(log Z, best score) by enumerating every label path."""
    scores = [score_path(model, features, list(path))
              for path in itertools.product(range(model.n_labels), repeat=len(features))]
    return logsumexp(scores), max(scores)


def crf_exactness(n_models=100, seed=0):
    """Worst relative error of exp(log Z) and number of Viterbi misses over random models."""
    rng = np.random.default_rng(seed)
    worst, misses = 0.0, 0
    for _ in range(n_models):
        T, L, F = int(rng.integers(1, 7)), int(rng.integers(1, 5)), 6
        model = random_crf(rng, F, L)
        feats = random_features(rng, F, T)
        log_z, _ = forward_backward(model, feats)
        bf_log_z, best = brute_force(model, feats)
        worst = max(worst, abs(np.expm1(log_z - bf_log_z)))
        if not np.isclose(score_path(model, feats, viterbi(model, feats)), best, rtol=0, atol=1e-9):
            misses += 1
    return worst, misses


def numeric_gradient(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + eps
        hi = f()
        x[idx] = old - eps
        lo = f()
        x[idx] = old
        g[idx] = (hi - lo) / (2 * eps)
    return g


def relative_error(a, b, floor=1e-8):
    return np.abs(a - b) / np.maximum(floor, np.abs(a) + np.abs(b))


def crf_gradient_error(seed=0, n_features=20, n_labels=5):
    rng = np.random.default_rng(seed)
    model = random_crf(rng, n_features, n_labels, scale=0.5)
    model.l2_sigma = 3.0
    batch = []
    for _ in range(3):
        T = int(rng.integers(2, 6))
        batch.append((random_features(rng, n_features, T), list(rng.integers(0, n_labels, T))))
    _, g_unary, g_trans = nll_and_gradient(model, batch)
    f = lambda: nll_and_gradient(model, batch)[0]
    return max(relative_error(g_unary, numeric_gradient(f, model.unary)).max(),
               relative_error(g_trans, numeric_gradient(f, model.transitions)).max())


# ---------------------------------------------------------------------------
# BLSTM


def blstm_gradient_error(seed=0, D=4, H=3, T=2, n_labels=3, eps=1e-5):
    rng = np.random.default_rng(seed)
    model = init_blstm(D, H, [f"L{j}" for j in range(n_labels)], dropout=0.0, seed=seed)
    seqs = [rng.normal(size=(T, D))]
    ids = [rng.integers(0, n_labels, T)]
    _, grads = loss_and_gradients(model, seqs, ids)
    f = lambda: loss_and_gradients(model, seqs, ids)[0]
    params = model.arrays()
    # step 1e-5: at 1e-6 roundoff swamps coordinates whose gradient is ~1e-8
    return max(relative_error(grads[name], numeric_gradient(f, params[name], eps)).max() for name in params)


def normalization_deviation(trials=50, seed=0):
    """Largest |row sum - 1| of CRF marginals and BLSTM softmax outputs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(trials):
        T, L = int(rng.integers(1, 12)), int(rng.integers(1, 6))
        model = random_crf(rng, 8, L, scale=3.0)
        _, marg = forward_backward(model, random_features(rng, 8, T))
        worst = max(worst, np.abs(marg.sum(axis=1) - 1).max())
        net = init_blstm(5, 4, [f"L{j}" for j in range(L)], seed=k)
        probs = blstm_predict(net, 3 * rng.normal(size=(T, 5)))
        worst = max(worst, np.abs(probs.sum(axis=1) - 1).max())
    return worst


# ---------------------------------------------------------------------------
# overfit corpus


def overfit_data():
    """``(crf_features, blstm_vectors, labels)`` for the synthetic overfit corpus.

    CRF features are the word and its left neighbour; BLSTM vectors are
    one-hot word encodings.
    """
    words, labels = overfit_corpus()
    vocab = sorted({w for s in words for w in s})
    index = {w: k for k, w in enumerate(vocab)}
    feats = [[{f"w={w}", f"prev={s[i - 1] if i else '<s>'}"} for i, w in enumerate(s)] for s in words]
    vecs = [np.eye(len(vocab))[[index[w] for w in s]] for s in words]
    return feats, vecs, labels


OVERFIT_BLSTM = dict(hidden_size=16, learning_rate=1e-2, epochs=200, patience=200, dropout=0.0, seed=0)


def overfit_accuracies():
    """Training token accuracy of the CRF, the BLSTM and the stacked ensemble."""
    feats, vecs, labels = overfit_data()
    crf = CRFTagger(max_iters=200).fit(feats, labels)
    blstm = BLSTMTagger(**OVERFIT_BLSTM).fit(vecs, labels)
    stacked = StackedEnsemble(CRFTagger(max_iters=200), BLSTMTagger(**OVERFIT_BLSTM))
    stacked.fit(list(zip(feats, vecs)), labels)
    pred = stacked.predict(list(zip(feats, vecs)))
    total = sum(len(s) for s in labels)
    stacked_acc = sum(p == g for ps, gs in zip(pred, labels) for p, g in zip(ps, gs)) / total
    return crf.score(feats, labels), blstm.score(vecs, labels), stacked_acc


# ---------------------------------------------------------------------------
# rule taggers


def rule_unit(text, adr_words=()):
    """``(unit, tokens, adr_spans)`` for a sentence with ADR words marked."""
    from adrtag.structure import TextUnit
    from adrtag.tokenization import tokenize

    unit = TextUnit(text, 100)
    spans = [(text.index(w), text.index(w) + len(w)) for w in adr_words]
    return unit, tokenize(unit), spans


def rule_tagger_checks():
    """Named boolean outcomes of the negation and animal fixtures."""
    from adrtag.rules import tag_animals, tag_negations

    def negations(text, adr_words=()):
        unit, toks, spans = rule_unit(text, adr_words)
        return [m.surface for m in tag_negations(unit, toks, spans)]

    def animals(text):
        unit, toks, _ = rule_unit(text)
        return tag_animals(unit, toks)

    animal_texts = ["Embryotoxicity was observed in rats.", "One rat and two mice and 3 New Zealand rabbits died.",
                    "Dogs given 10 mg/kg and cynomolgus monkeys showed liver injury."]
    found = [m for t in animal_texts for m in animals(t)]
    return {
        "negation emitted for cue with ADR in scope":
            negations("no cases of anaphylaxis were reported", ["anaphylaxis"]) == ["no"],
        "negation suppressed by ignore phrase":
            negations("dosing information is not available") == []
            and negations("data on hepatotoxicity are not available", ["hepatotoxicity"]) == [],
        "negation suppressed without ADR in scope":
            negations("not recommended for children") == [],
        "animal mentions are single tokens":
            bool(found) and all(len(m.surface.split()) == 1 and len(m.spans) == 1 for m in found),
    }


# ---------------------------------------------------------------------------
# BIO codec


def bio_round_trip_failures(n_cases=1000, seed=0):
    """Encode then decode random non-overlapping mention sets; return failing case indices."""
    import random

    from adrtag.corpus import EntityClass, MentionAnnotation
    from adrtag.structure import TextUnit
    from adrtag.tokenization import TaggedSequence, align_all, decode_mentions, project_mentions, tokenize

    rng = random.Random(seed)
    vocab = ["rash", "severe", "liver", "injury", "(", "2", "%", "rats", "no", "Stevens-Johnson", "."]
    classes = list(EntityClass)
    failures = []
    for case in range(n_cases):
        words = [rng.choice(vocab) for _ in range(rng.randint(1, 30))]
        unit = TextUnit(" ".join(words), rng.randint(0, 500))
        toks = tokenize(unit)
        gold, i = [], 0
        while i < len(toks):
            if rng.random() < 0.35:
                k = rng.randint(1, min(4, len(toks) - i))
                s, e = unit.to_document(toks[i].start, toks[i + k - 1].end)
                gold.append(MentionAnnotation(f"G{len(gold) + 1}", rng.choice(classes), ((s, e),),
                                              unit.text[s - unit.start:e - unit.start]))
                i += k
            else:
                i += 1
        labels = align_all(toks, project_mentions(unit, gold), classes)
        decoded = decode_mentions(TaggedSequence(unit, toks, labels))
        if sorted(m.key() for m in decoded) != sorted(m.key() for m in gold):
            failures.append(case)
    return failures
