"""Corpus-level scoring: exact-match micro-F1 over triples, type-only
relation detection, per-type breakdowns, and overlap-subset reports.

A predicted triple counts only when its relation type and both entity
spans equal a gold triple; matching is one-to-one per sentence, so
duplicate predictions earn at most one true positive each.  All
aggregation pools TP/FP/FN over the corpus (micro averaging).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import OverlapClass, Sentence, Triple, classify_overlap
from .environment import extract
from .model import Model

__all__ = [
    "PRF",
    "EvalReport",
    "score_triples",
    "score_relation_detection",
    "score_overlap_subsets",
    "evaluate_model",
    "evaluate_predictions",
]


@dataclass
class PRF:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def add(self, other: "PRF") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def _check_aligned(pred: Sequence, gold: Sequence) -> None:
    if len(pred) != len(gold):
        raise ValueError(
            f"prediction and gold lists must align: {len(pred)} vs {len(gold)} sentences"
        )


def _multiset_prf(pred_items: Sequence, gold_items: Sequence) -> PRF:
    pred_c, gold_c = Counter(pred_items), Counter(gold_items)
    tp = sum((pred_c & gold_c).values())
    return PRF(tp=tp, fp=len(pred_items) - tp, fn=len(gold_items) - tp)


def score_triples(
    pred: Sequence[Sequence[Triple]], gold: Sequence[Sequence[Triple]]
) -> PRF:
    """Exact-match micro scores: one-to-one matching of identical
    (source span, type, target span) triples within each sentence."""
    _check_aligned(pred, gold)
    total = PRF()
    for p, g in zip(pred, gold):
        total.add(_multiset_prf(list(p), list(g)))
    return total


def score_relation_detection(
    pred: Sequence[Sequence[Triple]], gold: Sequence[Sequence[Triple]]
) -> PRF:
    """Type-only micro scores: a predicted triple counts when its relation
    type matches a gold one, entities ignored."""
    _check_aligned(pred, gold)
    total = PRF()
    for p, g in zip(pred, gold):
        total.add(_multiset_prf([t.relation for t in p], [t.relation for t in g]))
    return total


def score_overlap_subsets(
    pred: Sequence[Sequence[Triple]],
    gold: Sequence[Sequence[Triple]],
    classes: Sequence[OverlapClass],
) -> tuple[Optional[PRF], Optional[PRF]]:
    """Full-triple scores restricted to the overlap-bearing sentences:
    type-I plus mixed, and type-II plus mixed.  A subset with no sentences
    reports None."""
    _check_aligned(pred, gold)
    if len(classes) != len(gold):
        raise ValueError("classes must align with the sentence lists")
    reports = []
    for members in (
        (OverlapClass.TYPE_I, OverlapClass.MIXED),
        (OverlapClass.TYPE_II, OverlapClass.MIXED),
    ):
        indices = [i for i, c in enumerate(classes) if c in members]
        if not indices:
            reports.append(None)
            continue
        reports.append(
            score_triples([pred[i] for i in indices], [gold[i] for i in indices])
        )
    return reports[0], reports[1]


def _per_relation(
    pred: Sequence[Sequence[Triple]], gold: Sequence[Sequence[Triple]]
) -> dict[int, PRF]:
    scores: dict[int, PRF] = {}
    for p, g in zip(pred, gold):
        pred_c, gold_c = Counter(p), Counter(g)
        matched = pred_c & gold_c
        relations = {t.relation for t in p} | {t.relation for t in g}
        for r in relations:
            prf = scores.setdefault(r, PRF())
            prf.tp += sum(c for t, c in matched.items() if t.relation == r)
            prf.fp += sum(c for t, c in pred_c.items() if t.relation == r) - sum(
                c for t, c in matched.items() if t.relation == r
            )
            prf.fn += sum(c for t, c in gold_c.items() if t.relation == r) - sum(
                c for t, c in matched.items() if t.relation == r
            )
    return scores


@dataclass
class EvalReport:
    overall: PRF
    relation_detection: PRF
    type_i: Optional[PRF]
    type_ii: Optional[PRF]
    per_relation: dict[str, PRF] = field(default_factory=dict)
    n_sentences: int = 0

    def to_dict(self) -> dict:
        return {
            "n_sentences": self.n_sentences,
            "overall": self.overall.to_dict(),
            "relation_detection": self.relation_detection.to_dict(),
            "type_i": self.type_i.to_dict() if self.type_i else None,
            "type_ii": self.type_ii.to_dict() if self.type_ii else None,
            "per_relation": {k: v.to_dict() for k, v in sorted(self.per_relation.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        rows = [
            ("overall", self.overall),
            ("relation-only", self.relation_detection),
            ("type-I subset", self.type_i),
            ("type-II subset", self.type_ii),
        ]
        rows += [(f"  {name}", prf) for name, prf in sorted(self.per_relation.items())]
        width = max(len(name) for name, _ in rows) + 2
        lines = [f"{'':<{width}}  Prec    Rec     F1      TP    FP    FN"]
        for name, prf in rows:
            if prf is None:
                lines.append(f"{name:<{width}}  (no sentences in subset)")
            else:
                lines.append(
                    f"{name:<{width}}  {prf.precision:<6.3f}  {prf.recall:<6.3f}"
                    f"  {prf.f1:<6.3f}  {prf.tp:<4d}  {prf.fp:<4d}  {prf.fn:<4d}"
                )
        return "\n".join(lines)


def evaluate_predictions(
    pred: Sequence[Sequence[Triple]],
    sentences: Sequence[Sentence],
    schema=None,
) -> EvalReport:
    """Assemble the full report from already-extracted triples."""
    gold = [list(s.gold) for s in sentences]
    classes = [classify_overlap(s) for s in sentences]
    type_i, type_ii = score_overlap_subsets(pred, gold, classes)
    per_rel_ids = _per_relation(pred, gold)
    per_relation = {
        (schema.name_of(r) if schema is not None else str(r)): prf
        for r, prf in per_rel_ids.items()
    }
    return EvalReport(
        overall=score_triples(pred, gold),
        relation_detection=score_relation_detection(pred, gold),
        type_i=type_i,
        type_ii=type_ii,
        per_relation=per_relation,
        n_sentences=len(sentences),
    )


def evaluate_model(model: Model, sentences: Sequence[Sentence]) -> EvalReport:
    """Greedy extraction over the corpus followed by full scoring."""
    pred = [extract(s, model) for s in sentences]
    return evaluate_predictions(pred, sentences, schema=model.schema)
