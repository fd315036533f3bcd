import dataclasses
from pathlib import Path

import pytest

from adrtag.corpus import EntityClass, load_corpus, write_corpus
from adrtag.exceptions import ConfigurationError
from adrtag.pipeline import (
    PRESETS,
    RunConfig,
    StageError,
    TaggingSystem,
    evaluate_predictions,
    resolve_groups,
    run_pipeline,
    stage_plan,
)
from adrtag.synthetic import fixture_corpus, write_fixture_corpus

from conftest import FAST_INI

E = EntityClass


def test_presets():
    assert PRESETS["run1"] == {E.ADVERSE_REACTION: "crf", E.SEVERITY: "blstm", E.FACTOR: "blstm",
                               E.DRUG_CLASS: "blstm", E.NEGATION: "rule", E.ANIMAL: "rule"}
    run2 = PRESETS["run2"]
    assert run2[E.NEGATION] == "rule" and {run2[c] for c in E if c is not E.NEGATION} == {"stacked"}
    with pytest.raises(ConfigurationError):
        RunConfig.from_preset("run3")


def test_groups():
    names = [g.name for g in resolve_groups(PRESETS["run1"])]
    assert names == ["crf-AdverseReaction", "blstm-Severity+Factor+DrugClass", "rule-Negation", "rule-Animal"]
    names = [g.name for g in resolve_groups(PRESETS["run2"])]
    assert names == ["stacked-AdverseReaction", "stacked-Severity", "stacked-Factor", "stacked-DrugClass",
                     "stacked-Animal", "rule-Negation"]


@pytest.mark.parametrize("change,message", [
    (lambda t: t.pop(E.ANIMAL), "Animal"),
    (lambda t: t.update({E.ADVERSE_REACTION: "rule"}), "rule-based"),
    (lambda t: t.update({E.FACTOR: "svm"}), "unknown tagger"),
])
def test_validation_errors(change, message):
    cfg = RunConfig.from_preset("run1")
    change(cfg.taggers)
    with pytest.raises(ConfigurationError, match=message):
        cfg.validate(check_paths=False)


def test_validation_of_jobs_and_paths(tmp_path):
    with pytest.raises(ConfigurationError):
        RunConfig(jobs=0).validate()
    with pytest.raises(ConfigurationError, match="corpus"):
        RunConfig(corpus=tmp_path / "missing").validate()


def test_missing_animal_fails_before_any_stage(tmp_path, corpus_dir):
    cfg = RunConfig.from_ini(f"[corpus]\npath = {corpus_dir}\n[output]\ndir = {tmp_path / 'out'}\n")
    del cfg.taggers[E.ANIMAL]
    with pytest.raises(ConfigurationError):
        run_pipeline(cfg)
    assert not (tmp_path / "out").exists()


def test_ini_round_trip(tmp_path):
    text = FAST_INI + "[run]\npreset = run2\nseed = 5\n[taggers]\nFactor = voting\n[corpus]\npath = data\n"
    (tmp_path / "run.ini").write_text(text)
    cfg = RunConfig.from_ini(tmp_path / "run.ini")
    assert cfg.preset == "run2" and cfg.seed == 5 and cfg.taggers[E.FACTOR] == "voting"
    assert cfg.taggers[E.SEVERITY] == "stacked"
    assert cfg.corpus == tmp_path / "data"
    assert (cfg.embeddings.dim, cfg.blstm.learning_rate, cfg.crf.max_iters) == (16, 0.01, 40)
    assert cfg.blstm.epochs == 4 and cfg.embeddings.window == 5
    assert RunConfig.from_ini(cfg.to_ini()) == cfg


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n", "[crf]\nmomentum = 1\n", "[crf]\nmax_iters = many\n", "not an ini",
    "[run]\npreset = run9\n", "[features]\nadr_context_feature = true\n", "[split]\nseed = 3\n",
])
def test_bad_ini(text):
    with pytest.raises(ConfigurationError):
        RunConfig.from_ini(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        RunConfig.from_ini(tmp_path / "nope.ini")


def test_stage_plan(corpus_dir):
    plan = stage_plan(RunConfig.from_preset("run1", corpus=corpus_dir))
    assert "preset: run1" in plan and "56/24/21 -> 7/3/2 of 12 documents" in plan
    assert plan.index("tag AdverseReaction") < plan.index("tag Severity, Factor, DrugClass")
    assert "train blstm-Severity+Factor+DrugClass" in plan


@pytest.fixture(scope="module")
def fast_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    write_fixture_corpus(root / "corpus")
    base = RunConfig.from_ini(FAST_INI, RunConfig.from_preset("run1"))
    cfg = dataclasses.replace(base, corpus=root / "corpus", output_dir=root / "out")
    return cfg, run_pipeline(cfg)


def test_pipeline_outputs(fast_run):
    cfg, result = fast_run
    out = Path(cfg.output_dir)
    train, val, test = result.split
    assert (len(train), len(val), len(test)) == (7, 3, 2)
    assert {d.doc_id for d in test}.isdisjoint(d.doc_id for d in train + val)
    assert sorted(p.name for p in (out / "annotations").iterdir()) == sorted(f"{d.doc_id}.ann" for d in test)
    assert (out / "report.txt").read_text() == result.report
    assert result.report.startswith("split: train=")
    assert (out / "summary.tsv").read_text().startswith("section\tclass")
    assert {p.name for p in (out / "models").iterdir()} >= {
        "config.ini", "target.vec", "generic.vec", "clusters.tsv", "crf-AdverseReaction.crf",
        "blstm-Severity+Factor+DrugClass.blstm"}
    assert not [p for p in out.parent.iterdir() if p.name.startswith(".adrtag-")]
    assert result.scores["mention-with-type"][E.ADVERSE_REACTION].f1 > 50


def test_related_stage_sees_predicted_adr(fast_run):
    cfg, result = fast_run
    for doc in result.predictions:
        ids = [m.id for m in doc.annotations]
        assert ids == [f"T{k}" for k in range(1, len(ids) + 1)]
        assert all(m.surface == doc.text[m.spans[0][0]:m.spans[0][1]] for m in doc.annotations)


def test_saved_system_reproduces_predictions_with_threads(fast_run):
    cfg, result = fast_run
    system = TaggingSystem.load(Path(cfg.output_dir) / "models")
    test = result.split[2]
    assert system.tag(test, jobs=2) == result.predictions
    assert system.tag(test, jobs=1) == result.predictions


def test_evaluation_matches_scores(fast_run):
    _, result = fast_run
    assert evaluate_predictions(result.split[2], result.predictions) == result.scores


def test_tiny_corpus_fails_in_split_stage(tmp_path):
    write_corpus(fixture_corpus(2), tmp_path / "c")
    cfg = RunConfig.from_preset("run1", corpus=tmp_path / "c", output_dir=tmp_path / "out")
    with pytest.raises(StageError, match="split"):
        run_pipeline(cfg)
    assert not (tmp_path / "out").exists()
    assert len(load_corpus(tmp_path / "c")) == 2
