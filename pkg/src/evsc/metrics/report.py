"""Metric report files: one JSON of headline numbers, one CSV per verb."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

PER_VERB_FIELDS = ("verb_id", "verb", "gt", "pred", "hit", "precision", "recall", "f1")


def write_metrics_json(path, metrics: Mapping[str, object]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(dict(metrics), indent=2, sort_keys=True))
    return p


def write_per_verb_csv(path, scores: Mapping[int, Mapping[str, float]], names: Sequence[str]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=PER_VERB_FIELDS)
        w.writeheader()
        for v in sorted(scores):
            row = {"verb_id": v, "verb": names[v] if v < len(names) else str(v)}
            row.update({k: scores[v][k] for k in PER_VERB_FIELDS[2:]})
            w.writerow(row)
    return p
