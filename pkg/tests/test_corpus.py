import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hirex.corpus import (
    CorpusError,
    InfeasibleConfigError,
    OverlapClass,
    RelationSchema,
    Sentence,
    Span,
    SynthConfig,
    Triple,
    classify_overlap,
    filter_corpus,
    generate_synthetic,
    load_corpus,
    load_schema,
    overlap_histogram,
    save_corpus,
    save_schema,
    synthetic_schema,
)

SCHEMA = RelationSchema(("born-in", "works-for", "founded"))


def make_sentence(n_tokens, triples):
    return Sentence.from_texts([f"w{i}" for i in range(n_tokens)], triples)


# ---------------------------------------------------------------------------
# Types and invariants
# ---------------------------------------------------------------------------


def test_span_rejects_empty_and_reversed():
    with pytest.raises(CorpusError):
        Span(3, 3)
    with pytest.raises(CorpusError):
        Span(4, 2)


def test_triple_rejects_identical_and_overlapping_argument_spans():
    with pytest.raises(CorpusError):
        Triple(Span(0, 2), 0, Span(0, 2))
    with pytest.raises(CorpusError):
        Triple(Span(0, 2), 0, Span(1, 3))


def test_sentence_rejects_out_of_bounds_span():
    with pytest.raises(CorpusError):
        make_sentence(3, [Triple(Span(0, 1), 0, Span(2, 4))])


def test_token_text_must_be_nonempty():
    with pytest.raises(CorpusError):
        Sentence.from_texts(["a", ""], [])


def test_schema_rejects_duplicates_and_reserved_name():
    with pytest.raises(CorpusError):
        RelationSchema(("a", "a"))
    with pytest.raises(CorpusError):
        RelationSchema(("a", "NR"))


def test_schema_option_vocabulary():
    assert SCHEMA.option_count == 4
    assert SCHEMA.nr_id == 3
    assert SCHEMA.name_of(SCHEMA.nr_id) == "NR"
    assert SCHEMA.id_of("works-for") == 1


# ---------------------------------------------------------------------------
# load_corpus
# ---------------------------------------------------------------------------


def write_corpus(tmp_path, lines):
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_corpus_two_sentences(tmp_path):
    path = write_corpus(
        tmp_path,
        [
            json.dumps(
                {
                    "tokens": ["anna", "works", "for", "acme"],
                    "relations": [{"type": "works-for", "source": [0, 1], "target": [3, 4]}],
                }
            ),
            json.dumps({"tokens": ["nothing", "here"], "relations": []}),
        ],
    )
    sentences = load_corpus(path, SCHEMA)
    assert len(sentences) == 2
    assert sentences[0].gold[0] == Triple(Span(0, 1), 1, Span(3, 4))
    assert sentences[1].gold == ()


def test_load_corpus_reports_line_for_bad_span(tmp_path):
    path = write_corpus(
        tmp_path,
        [
            json.dumps({"tokens": ["a"], "relations": []}),
            json.dumps(
                {
                    "tokens": ["a", "b"],
                    "relations": [{"type": "born-in", "source": [1, 1], "target": [0, 1]}],
                }
            ),
        ],
    )
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path, SCHEMA)


def test_load_corpus_rejects_unknown_relation(tmp_path):
    path = write_corpus(
        tmp_path,
        [
            json.dumps(
                {
                    "tokens": ["a", "b"],
                    "relations": [{"type": "mystery", "source": [0, 1], "target": [1, 2]}],
                }
            )
        ],
    )
    with pytest.raises(CorpusError, match="mystery"):
        load_corpus(path, SCHEMA)


def test_corpus_roundtrip(tmp_path):
    sentences = [
        make_sentence(5, [Triple(Span(0, 2), 2, Span(3, 5))]),
        make_sentence(3, []),
    ]
    path = tmp_path / "out.jsonl"
    save_corpus(sentences, SCHEMA, path)
    loaded = load_corpus(path, SCHEMA)
    assert loaded == sentences


def test_schema_roundtrip(tmp_path):
    path = tmp_path / "schema.json"
    save_schema(SCHEMA, path)
    assert load_schema(path) == SCHEMA


# ---------------------------------------------------------------------------
# filter_corpus
# ---------------------------------------------------------------------------


def test_filter_drops_train_only_types_and_empty_sentences():
    train = [
        make_sentence(4, [Triple(Span(0, 1), 0, Span(2, 3)), Triple(Span(0, 1), 2, Span(3, 4))]),
        make_sentence(3, [Triple(Span(0, 1), 2, Span(1, 2))]),  # only train-only type
        make_sentence(2, []),
    ]
    test = [
        make_sentence(3, [Triple(Span(0, 1), 0, Span(1, 2))]),
        make_sentence(2, []),
    ]
    train2, test2 = filter_corpus(train, test)
    assert len(train2) == 1
    assert [t.relation for t in train2[0].gold] == [0]
    assert len(test2) == 1


def test_filter_noop_when_all_types_present():
    train = [make_sentence(3, [Triple(Span(0, 1), 0, Span(1, 2))])]
    test = [make_sentence(3, [Triple(Span(0, 1), 0, Span(2, 3))])]
    train2, test2 = filter_corpus(train, test)
    assert train2 == train
    assert test2 == test


def test_filter_is_idempotent():
    train = [
        make_sentence(4, [Triple(Span(0, 1), 0, Span(2, 3)), Triple(Span(1, 2), 1, Span(3, 4))]),
        make_sentence(3, [Triple(Span(0, 1), 2, Span(1, 2))]),
        make_sentence(2, []),
    ]
    test = [make_sentence(3, [Triple(Span(0, 1), 1, Span(1, 2))])]
    once = filter_corpus(train, test)
    twice = filter_corpus(*once)
    assert once == twice


# ---------------------------------------------------------------------------
# classify_overlap
# ---------------------------------------------------------------------------


def test_classify_share_one_entity_is_type_i():
    a, b, c = Span(0, 1), Span(2, 3), Span(4, 5)
    s = make_sentence(6, [Triple(a, 0, b), Triple(a, 1, c)])
    assert classify_overlap(s) is OverlapClass.TYPE_I


def test_classify_share_both_entities_is_type_ii():
    a, b = Span(0, 1), Span(2, 3)
    s = make_sentence(4, [Triple(a, 0, b), Triple(a, 1, b)])
    assert classify_overlap(s) is OverlapClass.TYPE_II


def test_classify_swapped_pair_is_type_ii():
    # the same unordered entity pair with roles reversed still shares both
    a, b = Span(0, 1), Span(2, 3)
    s = make_sentence(4, [Triple(a, 0, b), Triple(b, 1, a)])
    assert classify_overlap(s) is OverlapClass.TYPE_II


def test_classify_single_triple_is_none():
    s = make_sentence(3, [Triple(Span(0, 1), 0, Span(1, 2))])
    assert classify_overlap(s) is OverlapClass.NONE


def test_classify_mixed():
    a, b, c = Span(0, 1), Span(2, 3), Span(4, 5)
    s = make_sentence(6, [Triple(a, 0, b), Triple(a, 1, b), Triple(a, 2, c)])
    assert classify_overlap(s) is OverlapClass.MIXED


@given(st.permutations(range(3)))
def test_classify_is_permutation_invariant(order):
    a, b, c = Span(0, 1), Span(2, 3), Span(4, 5)
    triples = [Triple(a, 0, b), Triple(a, 1, b), Triple(b, 2, c)]
    reference = classify_overlap(make_sentence(6, triples))
    shuffled = make_sentence(6, [triples[i] for i in order])
    assert classify_overlap(shuffled) is reference


# ---------------------------------------------------------------------------
# generate_synthetic
# ---------------------------------------------------------------------------


def test_generation_is_deterministic():
    cfg = SynthConfig(n_sentences=30)
    first = generate_synthetic(cfg, seed=7)
    second = generate_synthetic(cfg, seed=7)
    assert first == second


def test_generation_seed_changes_output():
    cfg = SynthConfig(n_sentences=30)
    assert generate_synthetic(cfg, seed=7) != generate_synthetic(cfg, seed=8)


def test_generation_histogram_matches_proportions():
    cfg = SynthConfig(
        n_sentences=100, proportions={"none": 0.5, "type_i": 0.25, "type_ii": 0.25}
    )
    hist = overlap_histogram(generate_synthetic(cfg, seed=3))
    assert hist == {"none": 50, "type_i": 25, "type_ii": 25, "mixed": 0}


def test_generation_multiword_probability_one():
    cfg = SynthConfig(n_sentences=20, multiword_prob=1.0, length_range=(9, 14))
    for sentence in generate_synthetic(cfg, seed=1):
        for triple in sentence.gold:
            assert len(triple.source) >= 2
            assert len(triple.target) >= 2


def test_generation_spans_and_lengths_are_valid():
    cfg = SynthConfig(
        n_sentences=40,
        proportions={"none": 0.25, "type_i": 0.25, "type_ii": 0.25, "mixed": 0.25},
        length_range=(9, 14),
    )
    for sentence in generate_synthetic(cfg, seed=9):
        assert 9 <= len(sentence) <= 14
        assert sentence.gold
        for triple in sentence.gold:
            assert triple.source.end <= len(sentence)
            assert triple.target.end <= len(sentence)


def test_generation_indicator_not_before_later_entity():
    cfg = SynthConfig(n_sentences=30)
    schema = synthetic_schema(cfg)
    for sentence in generate_synthetic(cfg, seed=4):
        for triple in sentence.gold:
            later = max(triple.source.end, triple.target.end)
            indicator_positions = [
                i
                for i, tok in enumerate(sentence.texts)
                if tok.startswith(f"ind{triple.relation}")
            ]
            assert any(p >= later for p in indicator_positions)


def test_generation_infeasible_type_ii_with_one_relation():
    cfg = SynthConfig(n_relation_types=1, proportions={"type_ii": 1.0}, n_sentences=2)
    with pytest.raises(InfeasibleConfigError):
        generate_synthetic(cfg, seed=0)


def test_generation_infeasible_length_range():
    cfg = SynthConfig(length_range=(3, 4), multiword_prob=1.0, n_sentences=2)
    with pytest.raises(InfeasibleConfigError):
        generate_synthetic(cfg, seed=0)


def test_generation_bad_proportions():
    with pytest.raises(InfeasibleConfigError):
        generate_synthetic(SynthConfig(proportions={"none": 0.7}), seed=0)
    with pytest.raises(InfeasibleConfigError):
        generate_synthetic(SynthConfig(proportions={"bogus": 1.0}), seed=0)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_generated_classes_match_requested_mix(seed):
    cfg = SynthConfig(
        n_sentences=8, proportions={"none": 0.25, "type_i": 0.5, "type_ii": 0.25}
    )
    hist = overlap_histogram(generate_synthetic(cfg, seed=seed))
    assert hist == {"none": 2, "type_i": 4, "type_ii": 2, "mixed": 0}
