"""Dataset on disk: ``clips.jsonl`` plus one EVGF file per clip and pathway.

EVGF layout: ``b"EVGF1"`` | u32 little-endian header length | JSON header
``{"shape", "dtype": "f32", "order": "row-major", "pathway"}`` | raw
little-endian float32 payload.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .generate import ClipRecord, Dims, EventAnnotation, ObjectScript
from .render import GridFeaturePack, render_grid_features

EVGF_MAGIC = b"EVGF1"


class EVGFError(ValueError):
    pass


def write_evgf(path, array: np.ndarray, pathway: str) -> None:
    header = json.dumps({"shape": list(array.shape), "dtype": "f32", "order": "row-major",
                         "pathway": pathway}, sort_keys=True).encode()
    payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(EVGF_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)


def read_evgf(path) -> tuple[np.ndarray, dict]:
    raw = Path(path).read_bytes()
    if raw[:5] != EVGF_MAGIC:
        raise EVGFError(f"{path}: bad EVGF magic at byte offset 0")
    if len(raw) < 9:
        raise EVGFError(f"{path}: truncated header length at byte offset 5")
    (hlen,) = struct.unpack("<I", raw[5:9])
    if len(raw) < 9 + hlen:
        raise EVGFError(f"{path}: truncated JSON header at byte offset 9 (need {hlen} bytes)")
    try:
        header = json.loads(raw[9 : 9 + hlen])
    except json.JSONDecodeError as exc:
        raise EVGFError(f"{path}: unreadable JSON header at byte offset 9: {exc}") from None
    if header.get("dtype") != "f32" or header.get("order") != "row-major":
        raise EVGFError(f"{path}: unsupported layout {header} at byte offset 9")
    shape = tuple(int(s) for s in header["shape"])
    start = 9 + hlen
    need = int(np.prod(shape)) * 4
    have = len(raw) - start
    if have != need:
        raise EVGFError(f"{path}: payload at byte offset {start} has {have} bytes, shape {shape} needs {need}")
    arr = np.frombuffer(raw, dtype="<f4", count=need // 4, offset=start).reshape(shape)
    return arr.copy(), header


# -- clip records ------------------------------------------------------------
def clip_to_json(clip: ClipRecord) -> dict:
    return {
        "clip_id": clip.clip_id,
        "video_id": clip.video_id,
        "clip_index": clip.clip_index,
        "split": clip.split,
        "dims": asdict(clip.dims),
        "sigma_bg": clip.sigma_bg,
        "noise_seed": clip.noise_seed,
        "objects": [o.to_json() for o in clip.objects],
        "annotation": {"verb": clip.annotation.verb, "roles": [list(r) for r in clip.annotation.roles]},
        "gt_verbs": list(clip.gt_verbs),
        "references": {k: list(v) for k, v in clip.references.items()},
        "features": dict(clip.features),
    }


def clip_from_json(d: dict) -> ClipRecord:
    dims = Dims(**d["dims"])
    frame = (float(dims.W), float(dims.H))
    return ClipRecord(
        clip_id=d["clip_id"],
        video_id=d["video_id"],
        clip_index=int(d["clip_index"]),
        split=d["split"],
        dims=dims,
        sigma_bg=float(d["sigma_bg"]),
        noise_seed=int(d["noise_seed"]),
        objects=[ObjectScript.from_json(o, frame, dims.F2) for o in d["objects"]],
        annotation=EventAnnotation(verb=int(d["annotation"]["verb"]),
                                   roles=[tuple(r) for r in d["annotation"]["roles"]]),
        gt_verbs=[int(v) for v in d["gt_verbs"]],
        references={k: list(v) for k, v in d["references"].items()},
        features=dict(d.get("features", {})),
    )


def write_dataset(path, clips, packs: dict[str, GridFeaturePack] | None = None) -> Path:
    """Write clips.jsonl and features; renders any pack not supplied."""
    root = Path(path)
    (root / "features").mkdir(parents=True, exist_ok=True)
    with open(root / "clips.jsonl", "w", encoding="utf-8") as fh:
        for clip in clips:
            fh.write(json.dumps(clip_to_json(clip), sort_keys=True) + "\n")
    for clip in clips:
        pack = (packs or {}).get(clip.clip_id) or render_grid_features(clip)
        write_evgf(root / clip.features["slow"], pack.slow, "slow")
        write_evgf(root / clip.features["fast"], pack.fast, "fast")
    return root


def read_clips(path) -> list[ClipRecord]:
    root = Path(path)
    with open(root / "clips.jsonl", encoding="utf-8") as fh:
        return [clip_from_json(json.loads(line)) for line in fh if line.strip()]


def read_features(path, clip: ClipRecord) -> GridFeaturePack:
    root = Path(path)
    slow, hs = read_evgf(root / clip.features["slow"])
    fast, hf = read_evgf(root / clip.features["fast"])
    if hs["pathway"] != "slow" or hf["pathway"] != "fast":
        raise EVGFError(f"{clip.clip_id}: pathway tags {hs['pathway']}/{hf['pathway']} swapped")
    d = clip.dims
    if slow.shape != (d.F1, d.Wg, d.Hg, d.d1) or fast.shape != (d.F2, d.Wg, d.Hg, d.d2):
        raise EVGFError(f"{clip.clip_id}: feature shapes {slow.shape}/{fast.shape} disagree with dims {d}")
    return GridFeaturePack(slow.astype(np.float64), fast.astype(np.float64), d.stride)


def read_dataset(path) -> tuple[list[ClipRecord], dict[str, GridFeaturePack]]:
    clips = read_clips(path)
    return clips, {c.clip_id: read_features(path, c) for c in clips}
