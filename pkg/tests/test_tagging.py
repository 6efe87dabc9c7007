import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hirex.corpus import RelationSchema, Sentence, Span, Triple
from hirex.tagging import (
    TAG_COUNT,
    EntityTag,
    TagDecodeError,
    assemble_triple,
    decode_spans,
    gold_tags,
)

T = EntityTag

# A two-relation sentence whose entities overlap on the shared person:
# tokens 0-1 the shared source, 4-5 the child, 8-10 a team mentioned by a
# third annotation, 13 the death place.
TOKENS = (
    "steve belichick whose son bill belichick coached the new england "
    "patriots died in annapolis .".split()
)
STEVE = Span(0, 2)
BILL = Span(4, 6)
PATRIOTS = Span(8, 11)
ANNAPOLIS = Span(13, 14)
SCHEMA = RelationSchema(("parent-children", "place-of-death", "works-for"))
SENTENCE = Sentence.from_texts(
    TOKENS,
    [
        Triple(STEVE, 0, BILL),
        Triple(STEVE, 1, ANNAPOLIS),
        Triple(BILL, 2, PATRIOTS),
    ],
)


def labels(tags):
    return [t.label for t in tags]


def test_tag_space_has_exactly_seven_values():
    assert TAG_COUNT == 7
    assert {t.label for t in EntityTag} == {"B-S", "I-S", "B-T", "I-T", "B-O", "I-O", "N"}


def test_label_roundtrip():
    for tag in EntityTag:
        assert EntityTag.from_label(tag.label) is tag


def test_gold_tags_marks_other_relations_entities_as_not_concerned():
    tags, matched = gold_tags(SENTENCE, SCHEMA.id_of("parent-children"))
    assert matched == 0
    expected = ["N"] * len(TOKENS)
    expected[0:2] = ["B-S", "I-S"]
    expected[4:6] = ["B-T", "I-T"]
    expected[8:11] = ["B-O", "I-O", "I-O"]
    expected[13] = "B-O"
    assert labels(tags) == expected


def test_gold_tags_single_triple_has_one_source_and_one_target():
    s = Sentence.from_texts(["a", "b", "c", "d"], [Triple(Span(0, 1), 0, Span(2, 3))])
    tags, matched = gold_tags(s, 0)
    assert matched == 0
    assert tags.count(T.B_S) == 1
    assert tags.count(T.B_T) == 1
    assert T.I_S not in tags and T.I_T not in tags


def test_gold_tags_consumed_triple_leaves_all_other_entities():
    # 5-token sentence, single triple already consumed: both argument spans
    # fall back to O, nothing matches.
    s = Sentence.from_texts(
        ["w0", "w1", "w2", "w3", "w4"], [Triple(Span(0, 1), 0, Span(3, 4))]
    )
    tags, matched = gold_tags(s, 0, consumed={0})
    assert matched is None
    assert labels(tags) == ["B-O", "N", "N", "B-O", "N"]


def test_gold_tags_same_type_matched_in_document_order():
    s = Sentence.from_texts(
        [f"w{i}" for i in range(8)],
        [Triple(Span(0, 1), 0, Span(2, 3)), Triple(Span(4, 5), 0, Span(6, 7))],
    )
    tags1, matched1 = gold_tags(s, 0)
    assert matched1 == 0
    assert tags1[0] is T.B_S and tags1[4] is T.B_O
    tags2, matched2 = gold_tags(s, 0, consumed={0})
    assert matched2 == 1
    assert tags2[4] is T.B_S and tags2[0] is T.B_O


def test_gold_tags_matched_roles_take_precedence_over_other():
    # the shared entity belongs to the matched triple and to another one;
    # it must keep its S role
    tags, matched = gold_tags(SENTENCE, SCHEMA.id_of("place-of-death"))
    assert matched == 1
    assert labels(tags)[0:2] == ["B-S", "I-S"]
    assert tags[13] is T.B_T
    assert tags[4] is T.B_O  # bill still a not-concerned entity


def test_decode_simple_sequence():
    sources, targets = decode_spans([T.B_S, T.I_S, T.N, T.B_T])
    assert sources == [Span(0, 2)]
    assert targets == [Span(3, 4)]


def test_decode_all_n_is_empty():
    assert decode_spans([T.N, T.N, T.N]) == ([], [])


def test_decode_lenient_orphan_inside_starts_span():
    sources, targets = decode_spans([T.I_S, T.N], strict=False)
    assert sources == [Span(0, 1)]
    assert targets == []


def test_decode_strict_orphan_inside_raises_with_position():
    with pytest.raises(TagDecodeError) as err:
        decode_spans([T.N, T.I_T])
    assert err.value.position == 1


def test_decode_strict_role_switch_raises():
    with pytest.raises(TagDecodeError):
        decode_spans([T.B_S, T.I_T])


def test_decode_lenient_role_switch_closes_and_opens():
    sources, targets = decode_spans([T.B_S, T.I_T, T.I_T], strict=False)
    assert sources == [Span(0, 1)]
    assert targets == [Span(1, 3)]


def test_decode_adjacent_begins_split_spans():
    sources, _ = decode_spans([T.B_S, T.B_S])
    assert sources == [Span(0, 1), Span(1, 2)]


def test_decode_checks_other_role_wellformedness_too():
    with pytest.raises(TagDecodeError):
        decode_spans([T.N, T.I_O])


def test_assemble_direct():
    triple = assemble_triple(2, [Span(0, 2)], [Span(3, 4)])
    assert triple == Triple(Span(0, 2), 2, Span(3, 4))


def test_assemble_missing_role_returns_none():
    assert assemble_triple(0, [], [Span(3, 4)]) is None
    assert assemble_triple(0, [Span(0, 1)], []) is None


def test_assemble_takes_first_span_of_each_role():
    triple = assemble_triple(1, [Span(0, 1), Span(5, 6)], [Span(3, 4)])
    assert triple == Triple(Span(0, 1), 1, Span(3, 4))


# ---------------------------------------------------------------------------
# Round trip: gold_tags -> decode_spans recovers the matched triple
# ---------------------------------------------------------------------------

spans = st.integers(min_value=0, max_value=8).flatmap(
    lambda start: st.integers(min_value=1, max_value=2).map(
        lambda width: Span(start, start + width)
    )
)


@st.composite
def sentences_with_gold(draw):
    n_triples = draw(st.integers(min_value=1, max_value=3))
    triples = []
    for _ in range(n_triples):
        source = draw(spans)
        target = draw(spans.filter(lambda sp, s=source: not sp.overlaps(s)))
        triples.append(Triple(source, draw(st.integers(0, 2)), target))
    length = max(t.target.end for t in triples + triples) + draw(st.integers(0, 2))
    length = max(length, max(max(t.source.end, t.target.end) for t in triples))
    return Sentence.from_texts([f"w{i}" for i in range(length)], triples)


@settings(max_examples=200, deadline=None)
@given(sentences_with_gold(), st.integers(0, 2))
def test_roundtrip_recovers_matched_triple(sentence, relation):
    tags, matched = gold_tags(sentence, relation)
    if matched is None:
        assert all(t.relation != relation for t in sentence.gold)
        return
    sources, targets = decode_spans(tags, strict=True)
    triple = sentence.gold[matched]
    assert triple.source in sources
    assert triple.target in targets
    rebuilt = assemble_triple(relation, sources, targets)
    # decoded S/T spans contain exactly the matched arguments unless another
    # gold triple shares them; the first-span rule still rebuilds the triple
    # when the matched arguments are the only decoded ones
    if sources == [triple.source] and targets == [triple.target]:
        assert rebuilt == triple


def test_roles_never_collide_on_one_token():
    tags, _ = gold_tags(SENTENCE, 0)
    # every position carries exactly one tag by construction; ensure entity
    # positions of the matched triple kept S/T even though shared
    assert tags[0].role == "S" and tags[4].role == "T"
