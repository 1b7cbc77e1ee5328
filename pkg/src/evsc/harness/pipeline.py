"""End-to-end runs behind the CLI: data loading, training, evaluation, ablation, inspection."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

from ..embed.state import PATHWAYS, clip_states
from ..metrics import (RoleEvalRecord, VerbEvalRecord, acc_at_k, cider_d, f1_at_5, per_verb_scores,
                       rec_at_5, rouge_l, write_metrics_json, write_per_verb_csv)
from ..model.encoder import EncoderConfig, topk_verbs, variant_flags
from ..model.roles import (RoleConfig, RoleDecoder, RoleVocab, cache_video, greedy_decode, prediction_records,
                           serialize_target, write_predictions)
from ..model.verb import VerbModel
from ..synth.generate import generate_dataset
from ..synth.io import read_dataset, write_dataset
from ..synth.ontology import default_ontology
from .config import O_MAX_CHOICES, ExperimentConfig
from .train import predict_all, train_role, train_verb

log = logging.getLogger(__name__)

CONFIG_FILE = "config.json"
DATA_REF_FILE = "data_ref.json"
ROLE_INDEX_FILE = "role_model.json"


# -- provenance --------------------------------------------------------------------
def source_hash() -> str:
    root = Path(__file__).resolve().parents[1]
    h = hashlib.sha256()
    for p in sorted(root.rglob("*.py")):
        h.update(str(p.relative_to(root)).encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def params_digest(params) -> str:
    h = hashlib.sha256()
    for name, t in params.items():
        h.update(name.encode())
        h.update(np.ascontiguousarray(t.data).tobytes())
    return h.hexdigest()


def write_report(directory, report: dict) -> Path:
    """Append-only: the file name is the hash of its content."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    body = json.dumps(report, indent=2, sort_keys=True)
    path = d / f"report-{hashlib.sha256(body.encode()).hexdigest()[:16]}.json"
    if not path.exists():
        path.write_text(body)
    return path


def seed_summary(values: Sequence[float]) -> dict[str, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(np.mean(arr)), "std": std}


# -- data ----------------------------------------------------------------------------
def encoder_config(cfg: ExperimentConfig) -> EncoderConfig:
    d, m = cfg.dataset.dims, cfg.model
    return EncoderConfig(d1=d.d1, d2=d.d2, d_c=m.d_c, d_m=m.d_m, heads=m.heads,
                         n_verbs=len(default_ontology()), variant=m.variant,
                         aggregator=m.aggregator, o_max=m.o_max)


def states_for(clips, packs, enc: EncoderConfig):
    with_oie = variant_flags(enc.variant)[1]
    return [clip_states(c, packs[c.clip_id], o_max=enc.o_max, with_interaction=with_oie) for c in clips]


def load_splits(data_dir, enc: EncoderConfig) -> dict[str, tuple[list, list]]:
    clips, packs = read_dataset(data_dir)
    out = {}
    for split in ("train", "val"):
        sel = [c for c in clips if c.split == split]
        out[split] = (sel, states_for(sel, packs, enc))
    return out


def group_videos(clips) -> dict[str, list]:
    groups = defaultdict(list)
    for c in clips:
        groups[c.video_id].append(c)
    return {vid: sorted(cs, key=lambda c: c.clip_index) for vid, cs in sorted(groups.items())}


# -- verb ------------------------------------------------------------------------------
def verb_records(probs: np.ndarray, clips, k: int = 5) -> list[VerbEvalRecord]:
    k = min(k, probs.shape[1])
    return [VerbEvalRecord(c.clip_id, tuple(c.gt_verbs), tuple(topk_verbs(p, k))) for p, c in zip(probs, clips)]


def verb_metrics(records: Sequence[VerbEvalRecord]) -> dict[str, float]:
    out = {"acc@1": acc_at_k(records, 1), "n_clips": len(records)}
    if records and min(len(r.topk) for r in records) >= 5:
        out.update({"acc@5": acc_at_k(records, 5), "rec@5": rec_at_5(records), "f1@5": f1_at_5(records)})
    return out


def subset_accuracy(probs: np.ndarray, clips, verbs: Sequence[int]) -> float:
    sel = [(p, c) for p, c in zip(probs, clips) if c.annotation.verb in verbs]
    if not sel:
        return float("nan")
    return float(np.mean([int(np.argmax(p) == c.annotation.verb) for p, c in sel]))


def run_generate(cfg: ExperimentConfig, out_dir) -> Path:
    clips = generate_dataset(cfg.dataset)
    root = write_dataset(out_dir, clips)
    (root / "dataset.json").write_text(json.dumps({"dataset": cfg.to_dict()["dataset"]}, indent=2, sort_keys=True))
    return root


def fit_verb_model(cfg: ExperimentConfig, splits) -> tuple[VerbModel, object]:
    enc = encoder_config(cfg)
    model = VerbModel(enc, seed=cfg.seed)
    clips, states = splits["train"]
    curve = train_verb(model, states, [c.annotation.verb for c in clips], lr=cfg.optim.lr,
                       epochs=cfg.optim.epochs, batch_size=cfg.optim.batch_size, seed=cfg.seed)
    return model, curve


def run_train_verb(cfg: ExperimentConfig, data_dir, out_dir, splits=None) -> tuple[dict, Path]:
    start = time.perf_counter()
    splits = splits or load_splits(data_dir, encoder_config(cfg))
    model, curve = fit_verb_model(cfg, splits)
    out = Path(out_dir)
    model.save(out)
    (out / CONFIG_FILE).write_text(cfg.to_json())
    (out / DATA_REF_FILE).write_text(json.dumps({"data": str(Path(data_dir).resolve())}))
    val_clips, val_states = splits["val"]
    metrics = {}
    if val_clips:
        probs = predict_all(model, val_states)
        ont = default_ontology()
        metrics = verb_metrics(verb_records(probs, val_clips))
        for channel in ("displacement", "texture", "interaction"):
            metrics[f"acc@1[{channel}]"] = subset_accuracy(probs, val_clips, ont.pair_subset(channel))
    report = {
        "kind": "train-verb",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "losses": {"steps": curve.steps, "epochs": curve.epochs},
        "metrics": metrics,
        "wall_clock_s": time.perf_counter() - start,
        "source_hash": source_hash(),
    }
    return report, write_report(out / "reports", report)


# -- roles -----------------------------------------------------------------------------
def role_inputs(verb_model: VerbModel, clips, states, vocab: RoleVocab):
    by_id = {s.clip_id: s for s in states}
    videos, targets, groups = [], [], []
    for vid, cs in group_videos(clips).items():
        videos.append(cache_video(verb_model, vid, [by_id[c.clip_id] for c in cs]))
        targets.append([serialize_target(c.annotation, vocab) for c in cs])
        groups.append(cs)
    return videos, targets, groups


def role_config(verb_model: VerbModel, cfg: ExperimentConfig) -> RoleConfig:
    enc = verb_model.config
    return RoleConfig(d_event=enc.d_event, d_object=enc.d_object, d_m=cfg.model.d_m, heads=cfg.model.heads)


def decode_videos(decoder: RoleDecoder, videos, groups, verb_source):
    """verb_source(clip) gives the conditioning verb of each clip."""
    records, preds = [], []
    for video, cs in zip(videos, groups):
        verbs = [verb_source(c) for c in cs]
        decoded = greedy_decode(decoder, video, verbs)
        preds.extend(prediction_records(video, [c.clip_index for c in cs], verbs, decoded, decoder.vocab))
        for c, d in zip(cs, decoded):
            for role, _ in c.annotation.roles:
                records.append(RoleEvalRecord(c.clip_id, role, d.roles.get(role, ""),
                                              tuple(c.references[role]), c.annotation.verb))
    return records, preds


def verb_source(verb_model: VerbModel, clips, states, predicted: bool):
    """Conditioning verb per clip: gold by default, argmax of the verb head on request."""
    if not predicted:
        return lambda c: c.annotation.verb
    by_id = {s.clip_id: int(np.argmax(verb_model.predict_probs(s))) for s in states}
    return lambda c: by_id[c.clip_id]


def caption_metrics(records) -> dict[str, float]:
    return {"cider": cider_d(records, "micro"), "cider_verb": cider_d(records, "by-verb"),
            "cider_arg": cider_d(records, "by-arg"), "rouge_l": rouge_l(records)}


def run_train_role(cfg: ExperimentConfig, data_dir, verb_model_dir, out_dir) -> tuple[dict, Path]:
    start = time.perf_counter()
    verb_model = VerbModel.load(verb_model_dir)
    verb_model.freeze()
    before = params_digest(verb_model.params)
    splits = load_splits(data_dir, verb_model.config)
    vocab = RoleVocab()
    train_v, train_t, _ = role_inputs(verb_model, *splits["train"], vocab)
    val_v, _, val_groups = role_inputs(verb_model, *splits["val"], vocab)
    conditioning = verb_source(verb_model, *splits["val"], cfg.role.predicted_verbs)
    steps = cfg.role.epochs * math.ceil(len(train_v) / cfg.role.batch_videos)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_seed, losses = [], {}
    for seed in cfg.eval_seeds:
        decoder = RoleDecoder(role_config(verb_model, cfg), vocab, seed=seed)
        curve = train_role(decoder, train_v, train_t, lr=cfg.role.lr, steps=steps, seed=seed,
                           batch_videos=cfg.role.batch_videos)
        decoder.save(out / f"role_seed{seed}")
        losses[str(seed)] = curve.epochs
        if val_v:
            records, preds = decode_videos(decoder, val_v, val_groups, conditioning)
            write_predictions(out / f"predictions_seed{seed}.jsonl", preds)
            per_seed.append({"seed": seed, **caption_metrics(records)})
    after = params_digest(verb_model.params)
    if after != before:
        raise RuntimeError("event encoder parameters changed during role training")
    (out / ROLE_INDEX_FILE).write_text(json.dumps(
        {"verb_model": str(Path(verb_model_dir).resolve()), "seeds": list(cfg.eval_seeds)}, indent=2))
    (out / CONFIG_FILE).write_text(cfg.to_json())
    summary = {}
    if per_seed:
        for key in ("cider", "cider_verb", "cider_arg", "rouge_l"):
            summary[key] = seed_summary([r[key] for r in per_seed])
    report = {
        "kind": "train-role",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "eval_seeds": list(cfg.eval_seeds),
        "losses": losses,
        "per_seed": per_seed,
        "summary": summary,
        "encoder_digest": {"before": before, "after": after},
        "wall_clock_s": time.perf_counter() - start,
        "source_hash": source_hash(),
    }
    return report, write_report(out / "reports", report)


# -- evaluation --------------------------------------------------------------------------
def read_verb_predictions(path) -> dict[str, list[int]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            if "clip_id" not in row or "topk" not in row:
                raise ValueError(f"{path}:{n}: prediction rows need clip_id and topk")
            out[row["clip_id"]] = [int(v) for v in row["topk"]]
    return out


def run_eval(model_path, data_dir, split: str, report_path) -> dict:
    model_path = Path(model_path)
    clips_all, packs = read_dataset(data_dir)
    clips = [c for c in clips_all if c.split == split]
    if not clips:
        raise ValueError(f"{data_dir} has no clips in split {split!r}")
    names = default_ontology().senses
    metrics: dict = {"split": split}
    if model_path.is_file():
        preds = read_verb_predictions(model_path)
        missing = [c.clip_id for c in clips if c.clip_id not in preds]
        if missing:
            raise ValueError(f"predictions missing for {len(missing)} clips, e.g. {missing[0]}")
        records = [VerbEvalRecord(c.clip_id, tuple(c.gt_verbs), tuple(preds[c.clip_id])) for c in clips]
    else:
        role_index = model_path / ROLE_INDEX_FILE
        verb_dir = Path(json.loads(role_index.read_text())["verb_model"]) if role_index.exists() else model_path
        model = VerbModel.load(verb_dir)
        states = states_for(clips, packs, model.config)
        records = verb_records(predict_all(model, states), clips)
        if role_index.exists():
            model.freeze()
            vocab = RoleVocab()
            videos, _, groups = role_inputs(model, clips, states, vocab)
            role_cfg = ExperimentConfig.load(model_path / CONFIG_FILE)
            conditioning = verb_source(model, clips, states, role_cfg.role.predicted_verbs)
            per_seed = []
            for seed in json.loads(role_index.read_text())["seeds"]:
                decoder = RoleDecoder.load(model_path / f"role_seed{seed}", vocab)
                recs, _ = decode_videos(decoder, videos, groups, conditioning)
                per_seed.append({"seed": seed, **caption_metrics(recs)})
            metrics["per_seed"] = per_seed
            for key in ("cider", "cider_verb", "cider_arg", "rouge_l"):
                s = seed_summary([r[key] for r in per_seed])
                metrics[key], metrics[f"{key}_std"] = s["mean"], s["std"]
    metrics.update(verb_metrics(records))
    report_path = Path(report_path)
    write_metrics_json(report_path, metrics)
    k = min(5, min(len(r.topk) for r in records))
    write_per_verb_csv(report_path.with_name(report_path.stem + ".per_verb.csv"),
                       per_verb_scores(records, k), names)
    return metrics


# -- ablation ----------------------------------------------------------------------------
ABLATION_VARIANTS = ("OSE-pixel+OME", "OSE-pixel/disp+OME", "OSE-pixel/disp+OME+OIE")
ABLATION_AGGREGATORS = ("mean", "lstm")


def ablation_grid(cfg: ExperimentConfig) -> list[ExperimentConfig]:
    return [replace(cfg, model=replace(cfg.model, variant=v, aggregator=a, o_max=o))
            for v, a, o in product(ABLATION_VARIANTS, ABLATION_AGGREGATORS, O_MAX_CHOICES)]


def _run_cell(args) -> str:
    cfg_dict, data_dir, out_dir = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    _, path = run_train_verb(cfg, data_dir, out_dir)
    return str(path)


def ablation_threads() -> int:
    raw = os.environ.get("EVSC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"EVSC_THREADS={raw!r} is not an integer") from None
    if n < 1:
        raise ValueError(f"EVSC_THREADS={n} must be >= 1")
    return n


def run_ablation(cfg: ExperimentConfig, data_dir, out_dir) -> list[Path]:
    out = Path(out_dir)
    jobs = []
    for c in ablation_grid(cfg):
        tag = f"{c.model.variant.replace('/', '-').replace('+', '_')}__{c.model.aggregator}__o{c.model.o_max}"
        jobs.append((c.to_dict(), str(data_dir), str(out / tag)))
    threads = ablation_threads()
    if threads == 1:
        paths = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            paths = list(pool.map(_run_cell, jobs))
    index = [{"config": j[0]["model"], "report": p} for j, p in zip(jobs, paths)]
    (out / "ablation.json").write_text(json.dumps(index, indent=2, sort_keys=True))
    return [Path(p) for p in paths]


# -- inspection -------------------------------------------------------------------------
def run_inspect(model_dir, clip_id: str, attention_path, data_dir=None) -> tuple[Path, Path]:
    model_dir = Path(model_dir)
    model = VerbModel.load(model_dir)
    if data_dir is None:
        ref = model_dir / DATA_REF_FILE
        if not ref.exists():
            raise FileNotFoundError(f"{model_dir} records no dataset; pass --data")
        data_dir = json.loads(ref.read_text())["data"]
    clips, packs = read_dataset(data_dir)
    match = [c for c in clips if c.clip_id == clip_id]
    if not match:
        raise KeyError(f"clip {clip_id!r} not found in {data_dir}")
    clip = match[0]
    st = states_for([clip], packs, model.config)[0]
    enc = model.encode(st)
    attention_path = Path(attention_path)
    attention_path.parent.mkdir(parents=True, exist_ok=True)
    labels = enc.tokens.labels
    with open(attention_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["query", *labels])
        for label, row in zip(labels, enc.attention):
            w.writerow([label, *(repr(float(x)) for x in row)])
    ose_path = attention_path.with_name(attention_path.stem + ".ose.csv")
    w_c = model.encoder.w_c.data
    with open(ose_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        d_max = max(model.config.d1, model.config.d2)
        w.writerow(["object_id", "pathway", "frame", "x0", "y0", "x1", "y1",
                    *(f"p{i}" for i in range(d_max)), *(f"c{i}" for i in range(w_c.shape[0]))])
        for obj in st.objects:
            for pw in PATHWAYS:
                seq = obj[pw]
                coords = seq.coords @ w_c.T if model.encoder.use_disp else np.zeros((len(seq), w_c.shape[0]))
                for k, box, p, c in zip(seq.frames, seq.boxes, seq.pooled, coords):
                    pooled = list(p) + [""] * (d_max - len(p))
                    w.writerow([seq.object_id, pw, k, *box.as_tuple(), *pooled, *c])
    return attention_path, ose_path
