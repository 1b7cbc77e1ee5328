"""Top-K verb classification metrics. Recall and F1 are macro-averaged over verbs seen in GT."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class VerbEvalRecord:
    clip_id: str
    gt: tuple[int, ...]
    topk: tuple[int, ...]

    def __post_init__(self):
        if not self.gt:
            raise ValueError(f"{self.clip_id}: empty ground-truth verb set")
        if not self.topk:
            raise ValueError(f"{self.clip_id}: no predicted verbs")


def _check_k(records: Sequence[VerbEvalRecord], k: int) -> None:
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    short = [r.clip_id for r in records if len(r.topk) < k]
    if short:
        raise ValueError(f"records {short[:3]} carry fewer than K={k} predictions")


def acc_at_k(records: Sequence[VerbEvalRecord], k: int) -> float:
    if not records:
        return 0.0
    _check_k(records, k)
    hits = sum(1 for r in records if set(r.topk[:k]) & set(r.gt))
    return hits / len(records)


def per_verb_counts(records: Sequence[VerbEvalRecord], k: int = 5) -> dict[int, dict[str, int]]:
    """gt / predicted / hit clip counts for each verb."""
    _check_k(records, k)
    counts: dict[int, dict[str, int]] = defaultdict(lambda: {"gt": 0, "pred": 0, "hit": 0})
    for r in records:
        gt, pred = set(r.gt), set(r.topk[:k])
        for v in gt:
            counts[v]["gt"] += 1
        for v in pred:
            counts[v]["pred"] += 1
        for v in gt & pred:
            counts[v]["hit"] += 1
    return dict(counts)


def per_verb_scores(records: Sequence[VerbEvalRecord], k: int = 5) -> dict[int, dict[str, float]]:
    out = {}
    for v, c in per_verb_counts(records, k).items():
        if c["gt"] == 0:
            continue
        recall = c["hit"] / c["gt"]
        precision = c["hit"] / c["pred"] if c["pred"] else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out[v] = {"gt": c["gt"], "pred": c["pred"], "hit": c["hit"],
                  "precision": precision, "recall": recall, "f1": f1}
    return out


def rec_at_5(records: Sequence[VerbEvalRecord]) -> float:
    scores = per_verb_scores(records, 5)
    return sum(s["recall"] for s in scores.values()) / len(scores) if scores else 0.0


def f1_at_5(records: Sequence[VerbEvalRecord]) -> float:
    scores = per_verb_scores(records, 5)
    return sum(s["f1"] for s in scores.values()) / len(scores) if scores else 0.0
