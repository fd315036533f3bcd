"""Run configuration, trained tagging system and the end-to-end pipeline.

ADR mentions are tagged first.  Related-entity taggers then see them: gold
ADR spans at training time and predicted ones when tagging.  ML taggers run
on whole structural elements, rule taggers on sub-elements.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import logging
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .blstm import BLSTMTagger, build_input_vectors
from .corpus import (AnnotatedDocument, EntityClass, MentionAnnotation, filter_discontinuous,
                     load_corpus, write_annotations)
from .crf import CRFTagger
from .embeddings import ClusterModel, EmbeddingModel, kmeans, load_vectors, save_vectors, train_cbow
from .ensembles import StackedEnsemble, VotingEnsemble
from .evaluation import MatchMode, PrfScores, SplitSpec, format_report, format_summary, mention_prf, \
    split_corpus, split_sizes, token_prf
from .exceptions import AdrTagError, ConfigurationError, ValidationError
from .features import FeatureConfig, FeatureResources, extract_features, token_mask
from .resources import Lexicon, SuffixLemmatizer, harvest_lexicon
from .rules import tag_animals, tag_negations
from .structure import SplitStrategy, TextUnit, parse_structure, split_document
from .tokenization import Token, align_all, decode_mentions, label_set, project_mentions, tokenize, \
    TaggedSequence

logger = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "PRESETS",
    "StageError",
    "EmbeddingSettings",
    "CrfSettings",
    "BlstmSettings",
    "RunConfig",
    "TaggerGroup",
    "resolve_groups",
    "stage_plan",
    "TaggingSystem",
    "train_system",
    "evaluate_predictions",
    "RunResult",
    "run_pipeline",
    "corpus_sentences",
]

METHODS = ("rule", "crf", "blstm", "voting", "stacked")
RULE_CLASSES = frozenset({EntityClass.NEGATION, EntityClass.ANIMAL})
ADR = EntityClass.ADVERSE_REACTION

_R1 = {ADR: "crf", EntityClass.SEVERITY: "blstm", EntityClass.FACTOR: "blstm",
       EntityClass.DRUG_CLASS: "blstm", EntityClass.NEGATION: "rule", EntityClass.ANIMAL: "rule"}
_R2 = {cls: "stacked" for cls in EntityClass}
_R2[EntityClass.NEGATION] = "rule"
PRESETS = {"run1": _R1, "run2": _R2}


class StageError(AdrTagError, RuntimeError):
    """A pipeline stage failed; carries the stage name and offending document."""

    def __init__(self, stage: str, message: str, doc_id: str | None = None):
        where = f" (document {doc_id})" if doc_id else ""
        super().__init__(f"stage {stage}{where}: {message}")
        self.stage = stage
        self.doc_id = doc_id


# ---------------------------------------------------------------------------
# configuration


@dataclass
class EmbeddingSettings:
    generic_path: Path | None = None
    target_path: Path | None = None
    dim: int = 200
    window: int = 5
    negatives: int = 5
    min_count: int = 2
    epochs: int = 5
    learning_rate: float = 0.025
    clusters: int = 50


@dataclass
class CrfSettings:
    l2_sigma: float = 10.0
    max_iters: int = 100
    tolerance: float = 1e-5
    solver: str = "lbfgs"


@dataclass
class BlstmSettings:
    hidden_size: int = 170
    learning_rate: float = 1e-5
    epochs: int = 50
    patience: int = 10
    dropout: float = 0.1
    batch_size: int = 8


_FEATURE_KEYS = ("window", "use_lemma", "use_pos", "use_semtype", "use_lexicons", "use_clusters")


@dataclass
class RunConfig:
    """Everything a run needs; loadable from and writable to an INI file.

    Sections: ``[run]`` (preset, seed, jobs), ``[corpus]`` (path), ``[split]``,
    ``[taggers]`` (class = method), ``[features]``, ``[embeddings]``, ``[crf]``,
    ``[blstm]`` and ``[output]`` (dir).
    """

    taggers: dict = field(default_factory=lambda: dict(PRESETS["run1"]))
    corpus: Path | None = None
    output_dir: Path | None = None
    split: SplitSpec = field(default_factory=SplitSpec)
    seed: int = 0
    jobs: int = 1
    preset: str | None = None
    features: FeatureConfig = field(default_factory=FeatureConfig)
    embeddings: EmbeddingSettings = field(default_factory=EmbeddingSettings)
    crf: CrfSettings = field(default_factory=CrfSettings)
    blstm: BlstmSettings = field(default_factory=BlstmSettings)

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "RunConfig":
        if name not in PRESETS:
            raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(taggers=dict(PRESETS[name]), preset=name, **overrides)

    def validate(self, check_paths: bool = True) -> "RunConfig":
        missing = [c.value for c in EntityClass if c not in self.taggers]
        if missing:
            raise ConfigurationError(f"no tagger assigned to {', '.join(missing)}")
        for cls, method in self.taggers.items():
            if method not in METHODS:
                raise ConfigurationError(f"unknown tagger {method!r} for {cls.value}; choose from {METHODS}")
            if method == "rule" and cls not in RULE_CLASSES:
                raise ConfigurationError(f"no rule-based tagger exists for {cls.value}")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be at least 1")
        if self.features.adr_context_feature:
            raise ConfigurationError("adr_context_feature is set per stage and cannot be configured")
        if check_paths:
            if self.corpus is not None and not Path(self.corpus).is_dir():
                raise ConfigurationError(f"corpus directory not found: {self.corpus}")
            for p in (self.embeddings.generic_path, self.embeddings.target_path):
                if p is not None and not Path(p).is_file():
                    raise ConfigurationError(f"embedding file not found: {p}")
        return self

    # -- INI ----------------------------------------------------------------

    @classmethod
    def from_ini(cls, source, base: "RunConfig | None" = None) -> "RunConfig":
        """Read an INI file (path) or INI text; unset keys keep *base* values."""
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        root = Path(".")
        from_file = isinstance(source, Path) or (isinstance(source, str) and "\n" not in source)
        if from_file:
            if not Path(source).is_file():
                raise ConfigurationError(f"config file not found: {source}")
            root = Path(source).parent
        try:
            if from_file:
                parser.read(source, encoding="utf-8")
            else:
                parser.read_string(str(source))
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config: {exc}") from None
        known = {"run", "corpus", "split", "taggers", "features", "embeddings", "crf", "blstm", "output"}
        unknown = set(parser.sections()) - known
        if unknown:
            raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
        cfg = base
        if cfg is None:
            preset = parser.get("run", "preset", fallback=None)
            cfg = cls.from_preset(preset) if preset else cls()
        cfg = dataclasses.replace(cfg, taggers=dict(cfg.taggers))

        def path(value):
            p = Path(value)
            return p if p.is_absolute() else root / p

        for key, value in _items(parser, "run", {"preset", "seed", "jobs"}):
            if key == "preset":
                if value not in PRESETS:
                    raise ConfigurationError(f"unknown preset {value!r}; choose from {sorted(PRESETS)}")
                cfg.preset = value
                cfg.taggers = dict(PRESETS[value])
            else:
                setattr(cfg, key, _int(key, value))
        for key, value in _items(parser, "corpus", {"path"}):
            cfg.corpus = path(value)
        for key, value in _items(parser, "output", {"dir"}):
            cfg.output_dir = path(value)
        for key, value in _items(parser, "taggers", {c.value for c in EntityClass}):
            cfg.taggers[EntityClass(key)] = value.strip().lower()
        cfg.split = _apply(parser, "split", cfg.split, exclude={"seed"})
        cfg.features = _apply(parser, "features", cfg.features, allowed=set(_FEATURE_KEYS))
        cfg.embeddings = _apply(parser, "embeddings", cfg.embeddings, paths=path)
        cfg.crf = _apply(parser, "crf", cfg.crf)
        cfg.blstm = _apply(parser, "blstm", cfg.blstm)
        return cfg

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        parser["run"] = {"seed": str(self.seed), "jobs": str(self.jobs)}
        if self.preset:
            parser["run"]["preset"] = self.preset
        if self.corpus is not None:
            parser["corpus"] = {"path": str(self.corpus)}
        parser["split"] = {k: str(getattr(self.split, k)) for k in ("train", "validation", "test", "proportional")}
        parser["taggers"] = {c.value: self.taggers[c] for c in EntityClass if c in self.taggers}
        parser["features"] = {k: str(getattr(self.features, k)) for k in _FEATURE_KEYS}
        parser["embeddings"] = {f.name: str(getattr(self.embeddings, f.name))
                                for f in dataclasses.fields(self.embeddings)
                                if getattr(self.embeddings, f.name) is not None}
        parser["crf"] = {f.name: str(getattr(self.crf, f.name)) for f in dataclasses.fields(self.crf)}
        parser["blstm"] = {f.name: str(getattr(self.blstm, f.name)) for f in dataclasses.fields(self.blstm)}
        if self.output_dir is not None:
            parser["output"] = {"dir": str(self.output_dir)}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def _int(key, value) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigurationError(f"{key}: expected an integer, got {value!r}") from None


def _items(parser, section, allowed):
    if not parser.has_section(section):
        return []
    items = list(parser.items(section))
    bad = [k for k, _ in items if k not in allowed]
    if bad:
        raise ConfigurationError(f"unknown keys in [{section}]: {bad}")
    return items


def _convert(name, value: str, current, annotation):
    kind = type(current) if current is not None else None
    text = value.strip()
    try:
        if kind is bool or annotation in ("bool",):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{name}: cannot parse {value!r}") from None
    return text


def _apply(parser, section, obj, allowed=None, exclude=(), paths=None):
    names = {f.name: f for f in dataclasses.fields(obj)}
    allowed = (allowed or set(names)) - set(exclude)
    changes = {}
    for key, value in _items(parser, section, allowed):
        current = getattr(obj, key)
        if key.endswith("_path"):
            changes[key] = paths(value) if value.strip() else None
        else:
            changes[key] = _convert(f"[{section}] {key}", value, current, names[key].type)
    return dataclasses.replace(obj, **changes)


# ---------------------------------------------------------------------------
# tagger groups


@dataclass(frozen=True)
class TaggerGroup:
    """Classes sharing one tagger; an ML group with several classes is one joint model."""

    stage: str  # "adr" or "related"
    method: str
    classes: tuple

    @property
    def name(self) -> str:
        return f"{self.method}-" + "+".join(c.value for c in self.classes)

    @property
    def labels(self) -> list[str]:
        return label_set(self.classes)


def resolve_groups(taggers: dict) -> list[TaggerGroup]:
    """ADR group first, then related-entity ML groups, then rule taggers.

    Related classes assigned to ``blstm`` share a single joint model; every
    other ML assignment gets one model per class.
    """
    groups = [TaggerGroup("adr", taggers[ADR], (ADR,))]
    for method in METHODS[1:]:
        classes = tuple(c for c in EntityClass if c is not ADR and taggers[c] == method)
        if method == "blstm" and classes:
            groups.append(TaggerGroup("related", method, classes))
        else:
            groups += [TaggerGroup("related", method, (c,)) for c in classes]
    for cls in EntityClass:
        if cls is not ADR and taggers[cls] == "rule":
            groups.append(TaggerGroup("related", "rule", (cls,)))
    return groups


def _split_description(config: RunConfig) -> str:
    sp = config.split
    text = f"{sp.train}/{sp.validation}/{sp.test}"
    if config.corpus is not None and Path(config.corpus).is_dir():
        n = len(list(Path(config.corpus).glob("*.txt")))
        if n >= 3:
            try:
                text += " -> {}/{}/{} of {} documents".format(*split_sizes(n, sp), n)
            except ConfigurationError as exc:
                text += f" (invalid: {exc})"
    return text


def stage_plan(config: RunConfig) -> str:
    """Human-readable resolved plan, printed by ``run --dry-run``."""
    groups = resolve_groups(config.taggers)
    out = [f"preset: {config.preset or '(custom)'}", f"seed: {config.seed}", f"corpus: {config.corpus}",
           f"output: {config.output_dir}", "taggers:"]
    for cls in EntityClass:
        out.append(f"  {cls.value}: {config.taggers[cls]}")
    out.append("stages:")
    steps = [
        "load corpus and drop discontinuous annotations",
        "split documents " + _split_description(config),
        "parse structure (whole elements for ML taggers, sub-elements for rules)",
        "tokenize",
        "embeddings: " + ("load" if config.embeddings.target_path else "train") + " target CBOW, "
        + ("load" if config.embeddings.generic_path else "train") + f" generic CBOW, k-means k={config.embeddings.clusters}",
    ]
    for g in groups:
        if g.method != "rule":
            steps.append(f"train {g.name} on {', '.join(c.value for c in g.classes)}")
    steps.append("tag AdverseReaction with " + groups[0].name)
    for g in groups[1:]:
        steps.append(f"tag {', '.join(c.value for c in g.classes)} with {g.name}")
    steps += ["decode mentions", "write annotations", "evaluate against gold"]
    out += [f"  {k}. {s}" for k, s in enumerate(steps, start=1)]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# per-document preparation


@dataclass
class _Unit:
    unit: TextUnit
    tokens: list[Token]
    vectors: np.ndarray | None = None
    adr_features: list | None = None


def _ml_units(doc: AnnotatedDocument) -> list[_Unit]:
    units = split_document(parse_structure(doc.text), SplitStrategy.WHOLE_ELEMENT)
    out = []
    for u in units:
        toks = tokenize(u)
        if toks:
            out.append(_Unit(u, toks))
    return out


def corpus_sentences(docs: Iterable[AnnotatedDocument], lemmatize: bool) -> list[list[str]]:
    """Token lists of every whole-element unit; lemmatised and lowercased if asked."""
    lem = SuffixLemmatizer()
    out = []
    for doc in docs:
        for u in _ml_units(doc):
            words = [t.surface for t in u.tokens]
            out.append([lem.lemmatize(w) for w in words] if lemmatize else words)
    return out


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# trained system


def _make_estimator(method: str, labels: list[str], crf: CrfSettings, blstm: BlstmSettings, seed: int):
    c = CRFTagger(labels=labels, **dataclasses.asdict(crf))
    b = BLSTMTagger(labels=labels, seed=seed, **dataclasses.asdict(blstm))
    return {"crf": c, "blstm": b, "voting": VotingEnsemble(c, b), "stacked": StackedEnsemble(c, b)}[method]


def _inputs(method: str, feats, vecs):
    if method == "crf":
        return list(feats)
    if method == "blstm":
        return list(vecs)
    return list(zip(feats, vecs))


@dataclass
class TaggingSystem:
    """Trained models plus the resources needed to tag new documents."""

    config: RunConfig
    generic: EmbeddingModel
    target: EmbeddingModel
    clusters: ClusterModel
    harvested: list = field(default_factory=list)  # Lexicon objects built from gold data
    models: dict = field(default_factory=dict)  # group name -> fitted estimator

    @property
    def groups(self) -> list[TaggerGroup]:
        return resolve_groups(self.config.taggers)

    def resources(self, stage: str) -> FeatureResources:
        cache = self.__dict__.setdefault("_resources", {})
        if stage not in cache:
            if stage == "adr":
                cache[stage] = FeatureResources.bundled(("adr",), self.clusters)
            else:
                cache[stage] = FeatureResources.bundled(("adr", "drugclass", "animal"), self.clusters,
                                                        self.harvested)
        return cache[stage]

    def feature_config(self, stage: str) -> FeatureConfig:
        return dataclasses.replace(self.config.features, adr_context_feature=(stage == "related"))

    def prepare(self, doc: AnnotatedDocument) -> list[_Unit]:
        units = _ml_units(doc)
        res, fc = self.resources("adr"), self.feature_config("adr")
        for u in units:
            u.vectors = build_input_vectors(u.tokens, self.generic, self.target)
            u.adr_features = extract_features(u.tokens, fc, res)
        return units

    def related_features(self, units: Sequence[_Unit], adr_mentions: Sequence[MentionAnnotation]):
        res, fc = self.resources("related"), self.feature_config("related")
        return [extract_features(u.tokens, fc, res, project_mentions(u.unit, adr_mentions)) for u in units]

    # -- tagging ------------------------------------------------------------

    def _predict(self, group: TaggerGroup, units: Sequence[_Unit], feats) -> list[MentionAnnotation]:
        if not units:
            return []
        model = self.models[group.name]
        labels = model.predict(_inputs(group.method, feats, [u.vectors for u in units]))
        out = []
        for u, labs in zip(units, labels):
            out += decode_mentions(TaggedSequence(u.unit, u.tokens, labs))
        return out

    def tag_document(self, doc: AnnotatedDocument, units: Sequence[_Unit] | None = None) -> AnnotatedDocument:
        """Predicted annotations for one document (gold annotations are ignored)."""
        units = units if units is not None else self.prepare(doc)
        groups = self.groups
        adr_group = groups[0]
        adr = self._predict(adr_group, units, [u.adr_features for u in units]) if adr_group.method != "rule" else []
        mentions = list(adr)
        related_feats = None
        sub_units = None
        for g in groups[1:]:
            if g.method == "rule":
                if sub_units is None:
                    sub_units = [(u, tokenize(u)) for u in
                                 split_document(parse_structure(doc.text), SplitStrategy.SUB_ELEMENT)]
                for u, toks in sub_units:
                    if not toks:
                        continue
                    if g.classes[0] is EntityClass.NEGATION:
                        mentions += tag_negations(u, toks, project_mentions(u, adr))
                    else:
                        mentions += tag_animals(u, toks)
                continue
            if related_feats is None:
                related_feats = self.related_features(units, adr)
            mentions += self._predict(g, units, related_feats)
        return doc.with_annotations(_renumber(mentions))

    def tag(self, docs: Sequence[AnnotatedDocument], jobs: int = 1) -> list[AnnotatedDocument]:
        def one(doc):
            try:
                return self.tag_document(doc)
            except AdrTagError as exc:
                raise StageError("tag", str(exc), doc.doc_id) from exc
        return _map(one, list(docs), jobs)

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        (root / "config.ini").write_text(self.config.to_ini(), encoding="utf-8")
        save_vectors(self.generic, root / "generic.vec")
        save_vectors(self.target, root / "target.vec")
        self.clusters.save(root / "clusters.tsv")
        for lex in self.harvested:
            lex.to_file(root / f"lexicon-{lex.name}.txt")
        for g in self.groups:
            if g.method == "rule":
                continue
            model = self.models[g.name]
            if g.method in ("crf", "blstm"):
                model.save(root / f"{g.name}.{g.method}")
            else:
                model.crf_.save(root / f"{g.name}.crf")
                model.blstm_.save(root / f"{g.name}.blstm")

    @classmethod
    def load(cls, path) -> "TaggingSystem":
        root = Path(path)
        if not (root / "config.ini").is_file():
            raise ConfigurationError(f"no trained system in {root}")
        config = RunConfig.from_ini((root / "config.ini").read_text(encoding="utf-8"))
        dim = config.embeddings.dim
        system = cls(
            config,
            load_vectors(root / "generic.vec", dim),
            load_vectors(root / "target.vec", dim),
            ClusterModel.load(root / "clusters.tsv"),
            [Lexicon.from_file(p, p.stem[len("lexicon-"):]) for p in sorted(root.glob("lexicon-*.txt"))],
        )
        for g in system.groups:
            if g.method == "crf":
                system.models[g.name] = CRFTagger.load(root / f"{g.name}.crf")
            elif g.method == "blstm":
                system.models[g.name] = BLSTMTagger.load(root / f"{g.name}.blstm")
            elif g.method in ("voting", "stacked"):
                ens = VotingEnsemble if g.method == "voting" else StackedEnsemble
                system.models[g.name] = ens.from_components(CRFTagger.load(root / f"{g.name}.crf"),
                                                            BLSTMTagger.load(root / f"{g.name}.blstm"))
        return system


def _renumber(mentions: Iterable[MentionAnnotation]) -> list[MentionAnnotation]:
    order = {c: k for k, c in enumerate(EntityClass)}
    ranked = sorted(mentions, key=lambda m: (m.spans, order[m.cls]))
    out, seen = [], set()
    for m in ranked:
        if m.key() in seen:
            continue
        seen.add(m.key())
        out.append(MentionAnnotation(f"T{len(out) + 1}", m.cls, m.spans, m.surface))
    return out


# ---------------------------------------------------------------------------
# training


def _embeddings(config: RunConfig, docs: Sequence[AnnotatedDocument]):
    e = config.embeddings
    kw = dict(dim=e.dim, window=e.window, negatives=e.negatives, min_count=e.min_count,
              epochs=e.epochs, learning_rate=e.learning_rate)
    if e.target_path is not None:
        target = load_vectors(e.target_path, e.dim)
    else:
        target = train_cbow(corpus_sentences(docs, lemmatize=True), seed=config.seed, **kw)
    if e.generic_path is not None:
        generic = load_vectors(e.generic_path, e.dim)
    else:
        generic = train_cbow(corpus_sentences(docs, lemmatize=False), seed=config.seed + 1, **kw)
    clusters = kmeans(target, k=min(e.clusters, len(target)), seed=config.seed)
    return generic, target, clusters


def _gold_labels(doc_units, classes) -> list[list[str]]:
    out = []
    for doc, units in doc_units:
        for u in units:
            try:
                out.append(align_all(u.tokens, project_mentions(u.unit, doc.annotations), classes))
            except ValidationError as exc:
                raise StageError("train", str(exc), doc.doc_id) from exc
    return out


def train_system(config: RunConfig, train_docs: Sequence[AnnotatedDocument],
                 val_docs: Sequence[AnnotatedDocument] = ()) -> TaggingSystem:
    """Train embeddings and every ML tagger group on gold annotations."""
    config.validate(check_paths=False)
    if not train_docs:
        raise StageError("train", "no training documents")
    try:
        generic, target, clusters = _embeddings(config, list(train_docs) + list(val_docs))
    except AdrTagError as exc:
        raise StageError("embed", str(exc)) from exc
    harvested = [lex for lex in (harvest_lexicon(train_docs, EntityClass.SEVERITY, "severity"),
                                 harvest_lexicon(train_docs, EntityClass.FACTOR, "factor")) if len(lex)]
    system = TaggingSystem(config, generic, target, clusters, harvested)

    def prep(doc):
        try:
            return doc, system.prepare(doc)
        except AdrTagError as exc:
            raise StageError("prepare", str(exc), doc.doc_id) from exc

    train_units = _map(prep, list(train_docs), config.jobs)
    val_units = _map(prep, list(val_docs), config.jobs)

    def related(doc_units):
        return [f for doc, units in doc_units for f in
                system.related_features(units, [m for m in doc.annotations if m.cls is ADR])]

    for g in system.groups:
        if g.method == "rule":
            continue
        logger.info("training %s", g.name)
        feats = ([u.adr_features for _, us in train_units for u in us] if g.stage == "adr"
                 else related(train_units))
        vecs = [u.vectors for _, us in train_units for u in us]
        y = _gold_labels(train_units, g.classes)
        model = _make_estimator(g.method, g.labels, config.crf, config.blstm, config.seed)
        X = _inputs(g.method, feats, vecs)
        try:
            if g.method == "crf" or not val_units:
                model.fit(X, y)
            else:
                v_feats = ([u.adr_features for _, us in val_units for u in us] if g.stage == "adr"
                           else related(val_units))
                v_vecs = [u.vectors for _, us in val_units for u in us]
                model.fit(X, y, _inputs(g.method, v_feats, v_vecs), _gold_labels(val_units, g.classes))
        except AdrTagError as exc:
            raise StageError("train", f"{g.name}: {exc}") from exc
        system.models[g.name] = model
    return system


# ---------------------------------------------------------------------------
# evaluation


def _class_token_labels(tokens, mentions, cls) -> list[str]:
    mask = token_mask(tokens, [m for m in mentions if m.cls is cls])
    return [f"B-{cls.value}" if hit else "O" for hit in mask]


def evaluate_predictions(gold_docs: Sequence[AnnotatedDocument],
                         pred_docs: Sequence[AnnotatedDocument]) -> dict[str, PrfScores]:
    """Mention scores with and without type plus per-class token scores."""
    gold = {d.doc_id: d for d in gold_docs}
    pred = {d.doc_id: d for d in pred_docs}
    if set(gold) != set(pred):
        missing = sorted(set(gold) ^ set(pred))
        raise ValidationError(f"gold and predicted documents differ: {missing}")
    g_map = {k: list(d.annotations) for k, d in gold.items()}
    p_map = {k: list(d.annotations) for k, d in pred.items()}
    scores = {
        "mention-with-type": mention_prf(g_map, p_map, MatchMode.WITH_TYPE),
        "mention-without-type": mention_prf(g_map, p_map, MatchMode.WITHOUT_TYPE),
    }
    per_class = {}
    for cls in EntityClass:
        g_seqs, p_seqs = [], []
        for doc_id in sorted(gold):
            for u in _ml_units(gold[doc_id]):
                g_seqs.append(_class_token_labels(u.tokens, project_mentions(u.unit, g_map[doc_id]), cls))
                p_seqs.append(_class_token_labels(u.tokens, project_mentions(u.unit, p_map[doc_id]), cls))
        per_class[cls] = token_prf(g_seqs, p_seqs, cls)[cls]
    scores["token"] = PrfScores(per_class)
    return scores


# ---------------------------------------------------------------------------
# end to end


@dataclass
class RunResult:
    predictions: list
    scores: dict
    report: str
    summary: str
    split: tuple


def run_pipeline(config: RunConfig, write: bool = True) -> RunResult:
    """Load, split, train, tag the test split, write annotations and evaluate.

    Outputs go to ``config.output_dir``: ``annotations/*.ann``, ``models/``,
    ``report.txt`` and ``summary.tsv``.  They are built in a scratch
    directory and moved into place only when every stage succeeded.
    """
    config.validate()
    if config.corpus is None:
        raise ConfigurationError("no corpus configured")
    if write and config.output_dir is None:
        raise ConfigurationError("no output directory configured")
    try:
        docs = load_corpus(config.corpus)
    except (OSError, AdrTagError) as exc:
        raise StageError("load", str(exc)) from exc
    docs, dropped = filter_discontinuous(docs)
    if dropped:
        logger.info("dropped %d discontinuous annotations", dropped)
    spec = dataclasses.replace(config.split, seed=config.seed)
    try:
        train, val, test = split_corpus(docs, spec)
    except AdrTagError as exc:
        raise StageError("split", str(exc)) from exc
    system = train_system(config, train, val)
    predictions = system.tag(test, config.jobs)
    scores = evaluate_predictions(test, predictions)
    split_line = ("split: train=" + ",".join(d.doc_id for d in train) + " validation="
                  + ",".join(d.doc_id for d in val) + " test=" + ",".join(d.doc_id for d in test))
    report = split_line + "\n\n" + format_report(scores)
    summary = format_summary(scores)
    result = RunResult(predictions, scores, report, summary, (train, val, test))
    if write:
        _write_outputs(Path(config.output_dir), system, predictions, report, summary)
    return result


def _write_outputs(out: Path, system: TaggingSystem, predictions, report: str, summary: str) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".adrtag-", dir=out.parent))
    try:
        ann_dir = scratch / "annotations"
        ann_dir.mkdir()
        for doc in predictions:
            write_annotations(ann_dir / f"{doc.doc_id}.ann", doc.annotations)
        system.save(scratch / "models")
        (scratch / "report.txt").write_text(report, encoding="utf-8")
        (scratch / "summary.tsv").write_text(summary, encoding="utf-8")
        out.mkdir(exist_ok=True)
        for item in sorted(scratch.iterdir()):
            dest = out / item.name
            if dest.is_dir():
                shutil.rmtree(dest)
            elif dest.exists():
                dest.unlink()
            shutil.move(str(item), str(dest))
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
