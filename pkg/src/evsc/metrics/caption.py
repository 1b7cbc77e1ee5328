"""CIDEr-D and ROUGE-L over role phrases.

Conventions follow the common caption-evaluation toolkit: n = 1..4, document
frequency counted once per record over its reference set, log-count of
records as the reference length, clipped tf-idf products, Gaussian length
penalty with sigma 6, scaled by 10. Length for the penalty is the token count.
"""
from __future__ import annotations

import math
import string
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

CIDER_N = 4
CIDER_SIGMA = 6.0
ROUGE_BETA = 1.2
GROUPINGS = ("micro", "by-verb", "by-arg")

_PUNCT = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> list[str]:
    return text.lower().translate(_PUNCT).split()


@dataclass(frozen=True)
class RoleEvalRecord:
    clip_id: str
    role: str
    candidate: str
    references: tuple[str, ...]
    verb: int

    def __post_init__(self):
        if not self.references:
            raise ValueError(f"{self.clip_id}/{self.role}: empty reference set")


def ngram_counts(tokens: Sequence[str], n_max: int = CIDER_N) -> list[Counter]:
    return [Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)) for n in range(1, n_max + 1)]


class _CiderIndex:
    def __init__(self, records: Sequence[RoleEvalRecord]):
        self.df: Counter = Counter()
        for r in records:
            seen = set()
            for ref in r.references:
                for c in ngram_counts(tokenize(ref)):
                    seen.update(c)
            self.df.update(seen)
        self.ref_len = math.log(float(len(records)))

    def vec(self, counts: list[Counter]):
        vecs, norms = [], []
        for c in counts:
            v = {g: tf * (self.ref_len - math.log(max(1.0, self.df[g]))) for g, tf in c.items()}
            vecs.append(v)
            norms.append(math.sqrt(sum(x * x for x in v.values())))
        return vecs, norms

    def score(self, record: RoleEvalRecord) -> float:
        cand = tokenize(record.candidate)
        vh, nh = self.vec(ngram_counts(cand))
        total = 0.0
        for ref in record.references:
            rt = tokenize(ref)
            vr, nr = self.vec(ngram_counts(rt))
            penalty = math.exp(-((len(cand) - len(rt)) ** 2) / (2 * CIDER_SIGMA ** 2))
            per_n = 0.0
            for n in range(CIDER_N):
                dot = sum(min(w, vr[n].get(g, 0.0)) * vr[n].get(g, 0.0) for g, w in vh[n].items())
                if nh[n] != 0 and nr[n] != 0:
                    dot /= nh[n] * nr[n]
                per_n += dot * penalty
            total += per_n / CIDER_N
        return 10.0 * total / len(record.references)


def cider_d_scores(records: Sequence[RoleEvalRecord]) -> list[float]:
    if not records:
        return []
    index = _CiderIndex(records)
    return [index.score(r) for r in records]


def _grouped_mean(records, scores, key) -> float:
    groups: dict = defaultdict(list)
    for r, s in zip(records, scores):
        groups[key(r)].append(s)
    means = [sum(v) / len(v) for _, v in sorted(groups.items())]
    return sum(means) / len(means)


def cider_d(records: Sequence[RoleEvalRecord], grouping: str = "micro") -> float:
    if grouping not in GROUPINGS:
        raise ValueError(f"unknown grouping {grouping!r}; expected one of {GROUPINGS}")
    if not records:
        return 0.0
    scores = cider_d_scores(records)
    if grouping == "micro":
        return sum(scores) / len(scores)
    key = (lambda r: r.verb) if grouping == "by-verb" else (lambda r: r.role)
    return _grouped_mean(records, scores, key)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_score(candidate: str, references: Sequence[str], beta: float = ROUGE_BETA) -> float:
    """Max precision and max recall over references, then F_beta."""
    cand = tokenize(candidate)
    if not cand:
        return 0.0
    precs, recs = [], []
    for ref in references:
        rt = tokenize(ref)
        lcs = lcs_length(cand, rt)
        precs.append(lcs / len(cand))
        recs.append(lcs / len(rt) if rt else 0.0)
    p, r = max(precs), max(recs)
    if p == 0 or r == 0:
        return 0.0
    return (1 + beta ** 2) * p * r / (r + beta ** 2 * p)


def rouge_l(records: Sequence[RoleEvalRecord]) -> float:
    if not records:
        return 0.0
    return sum(rouge_l_score(r.candidate, r.references) for r in records) / len(records)
