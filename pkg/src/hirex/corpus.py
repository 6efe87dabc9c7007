"""Corpus data model, JSONL ingestion, filtering, and synthetic generation.

A corpus is a list of sentences; each sentence carries its tokens and the
gold relation triples annotated over token spans.  The synthetic generator
builds templated sentences with controllable overlap structure so that
extraction models can be exercised end to end without external data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Token",
    "Span",
    "Triple",
    "Sentence",
    "RelationSchema",
    "OverlapClass",
    "SynthConfig",
    "CorpusError",
    "InfeasibleConfigError",
    "load_corpus",
    "save_corpus",
    "load_schema",
    "save_schema",
    "filter_corpus",
    "classify_overlap",
    "generate_synthetic",
    "overlap_histogram",
]

#: Reserved name of the "no relation" option; never a schema member.
NO_RELATION = "NR"


class CorpusError(ValueError):
    """Malformed corpus file or invalid annotation."""


class InfeasibleConfigError(ValueError):
    """Synthetic-corpus configuration that cannot be satisfied."""


@dataclass(frozen=True)
class Token:
    text: str
    index: int

    def __post_init__(self):
        if not self.text:
            raise CorpusError("token text must be non-empty")
        if self.index < 0:
            raise CorpusError(f"token index must be >= 0, got {self.index}")


@dataclass(frozen=True, order=True)
class Span:
    """Half-open token index range [start, end)."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise CorpusError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True, order=True)
class Triple:
    """One extracted/gold relation: (source span, relation id, target span)."""

    source: Span
    relation: int
    target: Span

    def __post_init__(self):
        if self.source.overlaps(self.target):
            raise CorpusError(
                f"source span [{self.source.start},{self.source.end}) and target "
                f"span [{self.target.start},{self.target.end}) must be disjoint"
            )

    def spans(self) -> frozenset[Span]:
        return frozenset((self.source, self.target))


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    gold: tuple[Triple, ...]

    def __post_init__(self):
        for pos, tok in enumerate(self.tokens):
            if tok.index != pos:
                raise CorpusError(
                    f"token indices must be contiguous from 0; "
                    f"got index {tok.index} at position {pos}"
                )
        n = len(self.tokens)
        for triple in self.gold:
            for span in (triple.source, triple.target):
                if span.end > n:
                    raise CorpusError(
                        f"span [{span.start},{span.end}) exceeds sentence length {n}"
                    )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def span_text(self, span: Span) -> list[str]:
        return [t.text for t in self.tokens[span.start : span.end]]

    @classmethod
    def from_texts(cls, texts: Sequence[str], gold: Iterable[Triple] = ()) -> "Sentence":
        tokens = tuple(Token(text, i) for i, text in enumerate(texts))
        return cls(tokens=tokens, gold=tuple(gold))

    def with_gold(self, gold: Iterable[Triple]) -> "Sentence":
        return Sentence(tokens=self.tokens, gold=tuple(gold))


@dataclass(frozen=True)
class RelationSchema:
    """Ordered relation-type names; the option vocabulary appends NR last.

    Relation ids are positions in ``names``; the NR option id is ``len(names)``.
    """

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise CorpusError("relation type names must be unique")
        if NO_RELATION in self.names:
            raise CorpusError(f"{NO_RELATION!r} is reserved and cannot be a relation type")
        if not self.names:
            raise CorpusError("schema needs at least one relation type")

    def __len__(self) -> int:
        return len(self.names)

    @property
    def nr_id(self) -> int:
        return len(self.names)

    @property
    def option_count(self) -> int:
        return len(self.names) + 1

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise CorpusError(f"unknown relation type {name!r}") from None

    def name_of(self, relation_id: int) -> str:
        if relation_id == self.nr_id:
            return NO_RELATION
        return self.names[relation_id]


class OverlapClass(Enum):
    """Per-sentence overlap structure of the gold triples.

    TYPE_I: some triple pair shares exactly one entity span.
    TYPE_II: some pair shares both entity spans (as an unordered pair).
    MIXED: both pair kinds occur.  NONE: neither.
    """

    NONE = "none"
    TYPE_I = "type_i"
    TYPE_II = "type_ii"
    MIXED = "mixed"


def classify_overlap(sentence: Sentence) -> OverlapClass:
    """Classify a sentence by how its gold triples share entity spans."""
    has_one = False
    has_two = False
    gold = sentence.gold
    for i in range(len(gold)):
        for j in range(i + 1, len(gold)):
            shared = len(gold[i].spans() & gold[j].spans())
            if shared == 1:
                has_one = True
            elif shared == 2:
                has_two = True
    if has_one and has_two:
        return OverlapClass.MIXED
    if has_one:
        return OverlapClass.TYPE_I
    if has_two:
        return OverlapClass.TYPE_II
    return OverlapClass.NONE


def overlap_histogram(sentences: Iterable[Sentence]) -> dict[str, int]:
    counts = {cls.value: 0 for cls in OverlapClass}
    for s in sentences:
        counts[classify_overlap(s).value] += 1
    return counts


# ---------------------------------------------------------------------------
# Corpus file I/O.  One JSON object per line:
#   {"tokens": ["w1", ...],
#    "relations": [{"type": "name", "source": [s, e], "target": [s, e]}, ...]}
# ---------------------------------------------------------------------------


def _parse_span(raw, line_no: int) -> Span:
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 2
        or not all(isinstance(v, int) for v in raw)
    ):
        raise CorpusError(f"line {line_no}: span must be a pair of ints, got {raw!r}")
    try:
        return Span(raw[0], raw[1])
    except CorpusError as exc:
        raise CorpusError(f"line {line_no}: {exc}") from None


def load_corpus(path: str | Path, schema: RelationSchema) -> list[Sentence]:
    """Parse a JSONL corpus file, validating spans and relation names."""
    sentences: list[Sentence] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict) or "tokens" not in record:
                raise CorpusError(f"line {line_no}: record must be an object with 'tokens'")
            texts = record["tokens"]
            if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
                raise CorpusError(f"line {line_no}: 'tokens' must be a list of strings")
            triples = []
            for rel in record.get("relations", []):
                name = rel.get("type")
                if not isinstance(name, str) or name not in schema.names:
                    raise CorpusError(f"line {line_no}: unknown relation type {name!r}")
                source = _parse_span(rel.get("source"), line_no)
                target = _parse_span(rel.get("target"), line_no)
                try:
                    triples.append(Triple(source, schema.id_of(name), target))
                except CorpusError as exc:
                    raise CorpusError(f"line {line_no}: {exc}") from None
            try:
                sentences.append(Sentence.from_texts(texts, triples))
            except CorpusError as exc:
                raise CorpusError(f"line {line_no}: {exc}") from None
    return sentences


def sentence_to_record(sentence: Sentence, schema: RelationSchema) -> dict:
    return {
        "tokens": sentence.texts,
        "relations": [
            {
                "type": schema.name_of(t.relation),
                "source": [t.source.start, t.source.end],
                "target": [t.target.start, t.target.end],
            }
            for t in sentence.gold
        ],
    }


def save_corpus(sentences: Iterable[Sentence], schema: RelationSchema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(json.dumps(sentence_to_record(s, schema)) + "\n")


def load_schema(path: str | Path) -> RelationSchema:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    names = data.get("relation_types")
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise CorpusError("schema file must contain a 'relation_types' list of strings")
    return RelationSchema(tuple(names))


def save_schema(schema: RelationSchema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"relation_types": list(schema.names)}, fh)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Corpus filtering
# ---------------------------------------------------------------------------


def filter_corpus(
    train: Sequence[Sentence], test: Sequence[Sentence]
) -> tuple[list[Sentence], list[Sentence]]:
    """Drop train triples whose type never occurs in the test split, then drop
    sentences left without gold triples from both splits."""
    test_kept = [s for s in test if s.gold]
    test_types = {t.relation for s in test_kept for t in s.gold}
    train_kept = []
    for s in train:
        kept = tuple(t for t in s.gold if t.relation in test_types)
        if kept:
            train_kept.append(s if kept == s.gold else s.with_gold(kept))
    return train_kept, test_kept


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the templated synthetic corpus.

    ``proportions`` maps overlap-class names ("none", "type_i", "type_ii",
    "mixed") to fractions that must sum to 1.  Sentence lengths are drawn
    from ``length_range`` inclusive; each entity mention independently
    becomes multi-word with probability ``multiword_prob``.
    """

    vocab_size: int = 60
    n_relation_types: int = 3
    n_sentences: int = 100
    proportions: dict = field(
        default_factory=lambda: {"none": 0.5, "type_i": 0.25, "type_ii": 0.25}
    )
    length_range: tuple[int, int] = (7, 12)
    multiword_prob: float = 0.25

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        kwargs = dict(data)
        if "length_range" in kwargs:
            kwargs["length_range"] = tuple(kwargs["length_range"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "n_relation_types": self.n_relation_types,
            "n_sentences": self.n_sentences,
            "proportions": dict(self.proportions),
            "length_range": list(self.length_range),
            "multiword_prob": self.multiword_prob,
        }


_CLASS_KEYS = ("none", "type_i", "type_ii", "mixed")


def synthetic_schema(config: SynthConfig) -> RelationSchema:
    return RelationSchema(tuple(f"rel{k}" for k in range(config.n_relation_types)))


def _class_counts(config: SynthConfig) -> dict[str, int]:
    """Largest-remainder apportionment of n_sentences over the classes."""
    props = {k: float(config.proportions.get(k, 0.0)) for k in _CLASS_KEYS}
    unknown = set(config.proportions) - set(_CLASS_KEYS)
    if unknown:
        raise InfeasibleConfigError(f"unknown overlap classes in proportions: {sorted(unknown)}")
    total = sum(props.values())
    if any(p < 0 for p in props.values()) or abs(total - 1.0) > 1e-9:
        raise InfeasibleConfigError("overlap proportions must be non-negative and sum to 1")
    n = config.n_sentences
    exact = {k: p * n for k, p in props.items()}
    counts = {k: int(np.floor(v)) for k, v in exact.items()}
    remainder = n - sum(counts.values())
    by_frac = sorted(_CLASS_KEYS, key=lambda k: (counts[k] + 1 - exact[k], k))
    for k in by_frac[:remainder]:
        counts[k] += 1
    return counts


def _token_pools(config: SynthConfig) -> tuple[list[str], list[str], list[list[str]]]:
    """Partition the vocabulary into entity, filler, and per-relation
    indicator pools.  Pools are disjoint so the surface form of a sentence
    carries enough signal to recover its annotation."""
    n_rel = config.n_relation_types
    indicators = [[f"ind{r}a", f"ind{r}b"] for r in range(n_rel)]
    remaining = config.vocab_size - 2 * n_rel
    if remaining < 4:
        raise InfeasibleConfigError(
            f"vocab_size {config.vocab_size} too small for {n_rel} relation types"
        )
    n_entities = max(3, (remaining * 2) // 5)
    n_filler = remaining - n_entities
    entities = [f"ent{i}" for i in range(n_entities)]
    filler = [f"w{i}" for i in range(n_filler)]
    return entities, filler, indicators


def _sentence_plan(cls_key: str, config: SynthConfig, rng: np.random.Generator) -> tuple:
    """Pick relation types and the entity/indicator layout for one sentence.

    Layouts place every relation indicator at or after the later of its
    two entity mentions, and keep at least one filler token between
    consecutive entities so mention boundaries stay visible.
    """
    n_rel = config.n_relation_types
    if cls_key == "none":
        r = int(rng.integers(n_rel))
        # entities A, B; triple (A, r, B); indicator after B
        return (["E", "F", "E", "I"], [("A", r, "B")], {"I": r}, ["A", "B"])
    if cls_key == "type_i":
        if n_rel >= 2:
            r1, r2 = rng.choice(n_rel, size=2, replace=False)
        else:
            r1 = r2 = 0
        # A ... B ind1 ... C ind2 ; triples (A,r1,B), (A,r2,C) share A only
        return (
            ["E", "F", "E", "I1", "F", "E", "I2"],
            [("A", int(r1), "B"), ("A", int(r2), "C")],
            {"I1": int(r1), "I2": int(r2)},
            ["A", "B", "C"],
        )
    if cls_key == "type_ii":
        if n_rel < 2:
            raise InfeasibleConfigError(
                "type_ii sentences need at least 2 relation types for distinct-type pairs"
            )
        r1, r2 = rng.choice(n_rel, size=2, replace=False)
        # A ... B ind1 ind2 ; triples (A,r1,B), (A,r2,B) share both spans
        return (
            ["E", "F", "E", "I1", "I2"],
            [("A", int(r1), "B"), ("A", int(r2), "B")],
            {"I1": int(r1), "I2": int(r2)},
            ["A", "B"],
        )
    if cls_key == "mixed":
        if n_rel < 3:
            raise InfeasibleConfigError("mixed sentences need at least 3 relation types")
        r1, r2, r3 = rng.choice(n_rel, size=3, replace=False)
        # A..B i1 i2 ..C i3: (A,r1,B) & (A,r2,B) share both; (A,r3,C) shares A
        return (
            ["E", "F", "E", "I1", "I2", "F", "E", "I3"],
            [("A", int(r1), "B"), ("A", int(r2), "B"), ("A", int(r3), "C")],
            {"I1": int(r1), "I2": int(r2), "I3": int(r3)},
            ["A", "B", "C"],
        )
    raise InfeasibleConfigError(f"unknown overlap class {cls_key!r}")


def _generate_sentence(
    cls_key: str,
    config: SynthConfig,
    rng: np.random.Generator,
    pools: tuple[list[str], list[str], list[list[str]]],
) -> Sentence:
    entities_pool, filler_pool, indicator_pool = pools
    layout, triple_specs, indicator_rel, entity_names = _sentence_plan(cls_key, config, rng)

    widths = {
        name: (2 if rng.random() < config.multiword_prob else 1) for name in entity_names
    }
    entity_tokens = {
        name: [entities_pool[int(rng.integers(len(entities_pool)))] for _ in range(w)]
        for name, w in widths.items()
    }

    core = sum(widths.values()) + sum(1 for seg in layout if seg.startswith("I"))
    required_filler = sum(1 for seg in layout if seg == "F")
    lo, hi = config.length_range
    min_len = core + required_filler
    if hi < min_len:
        raise InfeasibleConfigError(
            f"length_range {config.length_range} cannot fit a {cls_key} sentence "
            f"needing at least {min_len} tokens"
        )
    target_len = int(rng.integers(max(lo, min_len), hi + 1))

    # Distribute the slack filler tokens over the mandatory inner gaps plus
    # optional leading/trailing runs.
    slack = target_len - core - required_filler
    slots = ["lead"] + [f"gap{i}" for i in range(required_filler)] + ["trail"]
    extra = {name: 0 for name in slots}
    for _ in range(slack):
        extra[slots[int(rng.integers(len(slots)))]] += 1

    def filler_run(count: int) -> list[str]:
        return [filler_pool[int(rng.integers(len(filler_pool)))] for _ in range(count)]

    tokens: list[str] = []
    spans: dict[str, Span] = {}
    gap_index = 0
    tokens.extend(filler_run(extra["lead"]))
    next_entity = iter(entity_names)
    for seg in layout:
        if seg == "E":
            name = next(next_entity)
            start = len(tokens)
            tokens.extend(entity_tokens[name])
            spans[name] = Span(start, len(tokens))
        elif seg == "F":
            tokens.extend(filler_run(1 + extra[f"gap{gap_index}"]))
            gap_index += 1
        else:  # indicator
            rel = indicator_rel[seg]
            variants = indicator_pool[rel]
            tokens.append(variants[int(rng.integers(len(variants)))])
    tokens.extend(filler_run(extra["trail"]))

    gold = tuple(Triple(spans[src], rel, spans[tgt]) for src, rel, tgt in triple_specs)
    return Sentence.from_texts(tokens, gold)


def generate_synthetic(config: SynthConfig, seed: int) -> list[Sentence]:
    """Deterministically generate a synthetic corpus matching the configured
    overlap-class proportions within rounding."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pools = _token_pools(config)
    counts = _class_counts(config)
    plan = [k for k in _CLASS_KEYS for _ in range(counts[k])]
    sentences = [_generate_sentence(k, config, rng, pools) for k in plan]
    order = rng.permutation(len(sentences))
    return [sentences[i] for i in order]
