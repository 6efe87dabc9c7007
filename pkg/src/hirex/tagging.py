"""Entity tag scheme, gold-tag derivation, and span decoding.

Within one entity-extraction subtask every token receives one of seven
tags: begin/inside of the source entity (B-S/I-S), of the target entity
(B-T/I-T), of an entity not participating in the current relation
(B-O/I-O), or N for plain words.  The same mention can therefore carry
different roles across subtasks, which is what makes overlapping
relations expressible.
"""

from __future__ import annotations

from enum import IntEnum
from typing import Iterable, Optional, Sequence

from .corpus import Sentence, Span, Triple

__all__ = [
    "EntityTag",
    "TagDecodeError",
    "gold_tags",
    "decode_spans",
    "assemble_triple",
]


class EntityTag(IntEnum):
    B_S = 0
    I_S = 1
    B_T = 2
    I_T = 3
    B_O = 4
    I_O = 5
    N = 6

    @property
    def label(self) -> str:
        return self.name.replace("_", "-")

    @classmethod
    def from_label(cls, label: str) -> "EntityTag":
        try:
            return cls[label.replace("-", "_")]
        except KeyError:
            raise ValueError(f"unknown entity tag {label!r}") from None

    @property
    def role(self) -> Optional[str]:
        """'S', 'T' or 'O' for entity tags, None for N."""
        if self is EntityTag.N:
            return None
        return self.name[2]

    @property
    def is_begin(self) -> bool:
        return self.name[0] == "B"


#: Number of distinct tags == low-level action head output dimension.
TAG_COUNT = len(EntityTag)

_BEGIN = {"S": EntityTag.B_S, "T": EntityTag.B_T, "O": EntityTag.B_O}
_INSIDE = {"S": EntityTag.I_S, "T": EntityTag.I_T, "O": EntityTag.I_O}


class TagDecodeError(ValueError):
    """Malformed tag sequence in strict decoding."""

    def __init__(self, position: int, message: str):
        super().__init__(f"position {position}: {message}")
        self.position = position


def _write_span(tags: list[EntityTag], span: Span, role: str) -> None:
    tags[span.start] = _BEGIN[role]
    for i in range(span.start + 1, span.end):
        tags[i] = _INSIDE[role]


def gold_tags(
    sentence: Sentence, relation: int, consumed: Iterable[int] = ()
) -> tuple[list[EntityTag], Optional[int]]:
    """Build the gold tag sequence for a subtask over ``relation``.

    Matches the first gold triple of that type (document order) whose index
    is not in ``consumed``; its arguments get S/T roles and every other
    gold entity span gets O.  Without an unconsumed match, all gold entity
    spans are tagged O and no triple is matched.  S/T from the matched
    triple win over O where spans collide.
    """
    consumed = set(consumed)
    matched: Optional[int] = None
    for idx, triple in enumerate(sentence.gold):
        if triple.relation == relation and idx not in consumed:
            matched = idx
            break

    tags = [EntityTag.N] * len(sentence)
    for idx, triple in enumerate(sentence.gold):
        if idx == matched:
            continue
        _write_span(tags, triple.source, "O")
        _write_span(tags, triple.target, "O")
    if matched is not None:
        _write_span(tags, sentence.gold[matched].source, "S")
        _write_span(tags, sentence.gold[matched].target, "T")

    # Entity mentions from different triples may cross; the S/T overwrite can
    # orphan the tail of an O run, so promote any dangling inside tag to a
    # begin tag and keep the sequence decodable in strict mode.
    prev = EntityTag.N
    for i, tag in enumerate(tags):
        if not tag.is_begin and tag is not EntityTag.N and prev.role != tag.role:
            tags[i] = _BEGIN[tag.role]
        prev = tags[i]
    return tags, matched


def decode_spans(
    tags: Sequence[EntityTag], strict: bool = True
) -> tuple[list[Span], list[Span]]:
    """Decode a tag sequence into (source spans, target spans).

    Maximal B-x (I-x)* runs become spans; O runs are validated but not
    returned.  An I-x that does not continue a run of the same role is an
    error in strict mode and starts a fresh span in lenient mode.
    """
    sources: list[Span] = []
    targets: list[Span] = []
    open_role: Optional[str] = None
    open_start = 0

    def close(end: int) -> None:
        nonlocal open_role
        if open_role == "S":
            sources.append(Span(open_start, end))
        elif open_role == "T":
            targets.append(Span(open_start, end))
        open_role = None

    for i, tag in enumerate(tags):
        if tag is EntityTag.N:
            close(i)
        elif tag.is_begin:
            close(i)
            open_role = tag.role
            open_start = i
        else:  # inside tag
            if open_role != tag.role:
                if strict:
                    raise TagDecodeError(i, f"{tag.label} does not continue a {tag.role} span")
                close(i)
                open_role = tag.role
                open_start = i
    close(len(tags))
    return sources, targets


def assemble_triple(
    relation: int, sources: Sequence[Span], targets: Sequence[Span]
) -> Optional[Triple]:
    """Combine decoded spans into one triple, taking the earliest span of
    each role; None when a role is missing."""
    if not sources or not targets:
        return None
    source = min(sources)
    target = min(targets)
    if source.overlaps(target):
        return None
    return Triple(source, relation, target)
