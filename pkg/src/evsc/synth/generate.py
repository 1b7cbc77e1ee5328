"""Procedural clip generator.

A clip is two scripted objects (agent ``A`` and second participant ``B``,
ranked by a synthetic detector confidence) plus optional static distractors.
The verb decides the texture and trajectory programs; role phrases follow
from the object phrases, the motion direction and a per-video scene.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..embed.geometry import BBox, project_bbox_to_grid
from . import ontology as onto
from .ontology import VerbOntology, default_ontology, phrase_signature, reference_variants

CLIPS_PER_VIDEO = 5
MAX_TRIES = 200


@dataclass(frozen=True)
class Dims:
    F1: int = 4
    F2: int = 16
    W: int = 64
    H: int = 64
    Wg: int = 8
    Hg: int = 8
    d1: int = 32
    d2: int = 8

    def validate(self) -> "Dims":
        if not 0 < self.F1 < self.F2:
            raise ValueError(f"need 0 < F1 < F2, got F1={self.F1} F2={self.F2}")
        if self.F2 % self.F1:
            raise ValueError(f"F2={self.F2} must be a multiple of F1={self.F1}")
        if min(self.W, self.H, self.Wg, self.Hg, self.d1, self.d2) <= 0:
            raise ValueError(f"all dims must be positive: {self}")
        return self

    @property
    def stride(self) -> int:
        return self.F2 // self.F1

    @property
    def d_sig(self) -> int:
        return max(self.d1, self.d2)


@dataclass
class DatasetConfig:
    clips_per_verb: int = 250
    val_clips_per_verb: int = 50
    seed: int = 42
    sigma_bg: float = 0.05
    distractors: int = 0
    dims: Dims = field(default_factory=Dims)


@dataclass
class ObjectScript:
    object_id: int
    noun_phrase: str
    t_start: int
    t_end: int
    keyframes: list[list[float]]  # [t, x, y] control points of a piecewise-linear path
    size: tuple[float, float]
    texture: dict
    base_signature: list[float]
    detector_confidence: float
    frame: tuple[float, float] = (64.0, 64.0)
    n_frames: int = 16

    def centres(self) -> np.ndarray:
        kf = np.asarray(self.keyframes, dtype=np.float64)
        ts = np.arange(self.t_start, self.t_end + 1, dtype=np.float64)
        return np.stack([np.interp(ts, kf[:, 0], kf[:, 1]), np.interp(ts, kf[:, 0], kf[:, 2])], axis=1)

    def visible(self, t: int) -> bool:
        return self.t_start <= t <= self.t_end

    def bbox(self, t: int) -> BBox:
        if not self.visible(t):
            raise ValueError(f"object {self.object_id} not visible at frame {t}")
        cx, cy = self.centres()[t - self.t_start]
        w, h = self.size
        W, H = self.frame
        return BBox(max(0.0, cx - w / 2), max(0.0, cy - h / 2), min(W, cx + w / 2), min(H, cy + h / 2))

    def texture_signal(self, t: int) -> float:
        mode = self.texture["mode"]
        if mode == "static":
            return 1.0
        if mode == "oscillate":
            return self.texture["amplitude"] * math.sin(self.texture["omega"] * t)
        if mode == "morph":
            return 1.0 - self.texture["rate"] * t / max(1, self.n_frames - 1)
        raise ValueError(f"unknown texture mode {mode!r}")

    def to_json(self) -> dict:
        return {
            "object_id": self.object_id,
            "noun_phrase": self.noun_phrase,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "keyframes": [list(map(float, k)) for k in self.keyframes],
            "size": [float(s) for s in self.size],
            "texture": dict(self.texture),
            "base_signature": [float(s) for s in self.base_signature],
            "detector_confidence": float(self.detector_confidence),
        }

    @classmethod
    def from_json(cls, d: dict, frame, n_frames: int) -> "ObjectScript":
        return cls(
            object_id=int(d["object_id"]),
            noun_phrase=d["noun_phrase"],
            t_start=int(d["t_start"]),
            t_end=int(d["t_end"]),
            keyframes=[list(k) for k in d["keyframes"]],
            size=tuple(d["size"]),
            texture=dict(d["texture"]),
            base_signature=list(d["base_signature"]),
            detector_confidence=float(d["detector_confidence"]),
            frame=tuple(frame),
            n_frames=int(n_frames),
        )


@dataclass
class EventAnnotation:
    verb: int
    roles: list[tuple[str, str]]

    def role_dict(self) -> dict[str, str]:
        return dict(self.roles)

    def validate(self, ontology: VerbOntology) -> None:
        allowed = ontology.role_set(self.verb)
        names = [r for r, _ in self.roles]
        if not set(names) <= set(allowed):
            raise ValueError(f"roles {names} not in R({ontology.names[self.verb]}) = {allowed}")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate roles in {names}")


@dataclass
class ClipRecord:
    clip_id: str
    video_id: str
    clip_index: int
    split: str
    dims: Dims
    sigma_bg: float
    noise_seed: int
    objects: list[ObjectScript]
    annotation: EventAnnotation
    gt_verbs: list[int]
    references: dict[str, list[str]]
    features: dict[str, str] = field(default_factory=dict)

    def ranked_objects(self) -> list[ObjectScript]:
        return sorted(self.objects, key=lambda o: (-o.detector_confidence, o.object_id))


# -- trajectory samplers --------------------------------------------------------
def _box_size(rng, dims: Dims) -> tuple[float, float]:
    lo, hi = onto.BOX_FRAC
    return (float(rng.uniform(lo, hi) * dims.W), float(rng.uniform(lo, hi) * dims.H))


def _band_y(rng, band, dims: Dims) -> float:
    return float(rng.uniform(band[0], band[1]) * dims.H)


def _x_range(w: float, dims: Dims) -> tuple[float, float]:
    return w / 2, dims.W - w / 2


def _static(t0, t1, x, y):
    return [[float(t0), x, y], [float(t1), x, y]]


def _sample_converge(rng, dims, sa, sb):
    F = dims.F2
    y = _band_y(rng, onto.MID_BAND, dims)
    gap_far = float(rng.uniform(0.55, 0.7) * dims.W)
    half = 0.5 * (sa[0] + sb[0])
    meet_gap = 0.6 * half
    lo = max(_x_range(sa[0], dims)[0], _x_range(sb[0], dims)[0])
    hi = min(_x_range(sa[0], dims)[1], _x_range(sb[0], dims)[1])
    left0 = float(rng.uniform(lo, hi - gap_far))
    right0 = left0 + gap_far
    mid = float(rng.uniform(left0 + meet_gap / 2 + 1, right0 - meet_gap / 2 - 1))
    tm = int(rng.integers(int(0.55 * F), int(0.75 * F) + 1))
    l_path = [[0.0, left0, y], [float(tm), mid - meet_gap / 2, y], [float(F - 1), mid - meet_gap / 2, y]]
    r_path = [[0.0, right0, y], [float(tm), mid + meet_gap / 2, y], [float(F - 1), mid + meet_gap / 2, y]]
    return (l_path, r_path) if rng.random() < 0.5 else (r_path, l_path)


def _sample_diverge(rng, dims, sa, sb):
    F = dims.F2
    y = _band_y(rng, onto.MID_BAND, dims)
    half = 0.5 * (sa[0] + sb[0])
    start_gap = 0.5 * half
    gap_far = float(rng.uniform(0.55, 0.7) * dims.W)
    lo = max(_x_range(sa[0], dims)[0], _x_range(sb[0], dims)[0])
    hi = min(_x_range(sa[0], dims)[1], _x_range(sb[0], dims)[1])
    left1 = float(rng.uniform(lo, hi - gap_far))
    right1 = left1 + gap_far
    mid = float(rng.uniform(left1 + start_gap / 2 + 1, right1 - start_gap / 2 - 1))
    te = int(rng.integers(int(0.4 * F), int(0.6 * F) + 1))
    l_path = [[0.0, mid - start_gap / 2, y], [float(te), left1, y], [float(F - 1), left1, y]]
    r_path = [[0.0, mid + start_gap / 2, y], [float(te), right1, y], [float(F - 1), right1, y]]
    return (l_path, r_path) if rng.random() < 0.5 else (r_path, l_path)


def _sample_vertical(rng, dims, sa, sb, band):
    F = dims.F2
    xa = float(rng.uniform(*_x_range(sa[0], dims)))
    y0 = _band_y(rng, onto.MID_BAND, dims)
    y1 = _band_y(rng, band, dims)
    y1 = min(max(y1, sa[1] / 2), dims.H - sa[1] / 2)
    tf = int(rng.integers(max(1, int(0.15 * F)), int(0.3 * F) + 1))
    a_path = [[0.0, xa, y0], [float(tf), xa, y1], [float(F - 1), xa, y1]]
    xb = float(rng.uniform(*_x_range(sb[0], dims)))
    yb = _band_y(rng, onto.MID_BAND, dims)
    return a_path, _static(0, F - 1, xb, yb)


def _grid_columns_disjoint(xa: float, wa: float, xb: float, wb: float, dims: Dims) -> bool:
    def cols(x, w):
        box = BBox(max(0.0, x - w / 2), 0.0, min(float(dims.W), x + w / 2), float(dims.H))
        g = project_bbox_to_grid(box, dims.W, dims.H, dims.Wg, dims.Hg)
        return g.x0, g.x1
    a0, a1 = cols(xa, wa)
    b0, b1 = cols(xb, wb)
    return a1 <= b0 or b1 <= a0


def _sample_stationary(rng, dims, sa, sb, far: bool):
    F = dims.F2
    ya = _band_y(rng, onto.MID_BAND, dims)
    if far:
        yb = _band_y(rng, onto.MID_BAND, dims)
    else:
        yb = min(max(ya + float(rng.uniform(-0.1, 0.1) * dims.H), onto.MID_BAND[0] * dims.H),
                 onto.MID_BAND[1] * dims.H)
    ra, rb = _x_range(sa[0], dims), _x_range(sb[0], dims)
    for _ in range(MAX_TRIES):
        xa = float(rng.uniform(*ra))
        if far:
            xb = float(rng.uniform(*rb))
            ok = abs(xa - xb) >= onto.FAR_GAP * dims.W
        else:
            # adjacent without sharing a grid column, so neither in-box pool sees the other object
            gap = 0.5 * (sa[0] + sb[0]) + float(rng.uniform(0.0, onto.NEAR_EDGE)) * dims.W
            xb = xa + gap * (1 if rng.random() < 0.5 else -1)
            ok = rb[0] <= xb <= rb[1] and _grid_columns_disjoint(xa, sa[0], xb, sb[0], dims)
        if ok:
            return _static(0, F - 1, xa, ya), _static(0, F - 1, xb, yb)
    raise RuntimeError("stationary placement failed")


def _sample_parallel(rng, dims, sa, sb):
    F = dims.F2
    y = _band_y(rng, onto.MID_BAND, dims)
    gap = onto.TOUCH * 0.5 * (sa[0] + sb[0])
    travel = float(rng.uniform(0.3, 0.45) * dims.W)
    direction = 1 if rng.random() < 0.5 else -1
    span = gap + travel
    lo = max(sa[0], sb[0]) / 2
    hi = dims.W - max(sa[0], sb[0]) / 2
    start_lo, start_hi = (lo, hi - span) if direction > 0 else (lo + span, hi)
    if start_hi <= start_lo:
        raise RuntimeError("frame too narrow for carry motion")
    # A leads in the travel direction, B trails right behind
    b0 = float(rng.uniform(start_lo, start_hi))
    a0 = b0 + direction * gap
    a_path = [[0.0, a0, y], [float(F - 1), a0 + direction * travel, y]]
    b_path = [[0.0, b0, y], [float(F - 1), b0 + direction * travel, y]]
    return a_path, b_path, ("right" if direction > 0 else "left")


# -- textures ------------------------------------------------------------------
def _texture(rng, mode: str) -> dict:
    if mode == "static":
        return {"mode": "static"}
    if mode == "oscillate":
        return {"mode": "oscillate", "omega": float(rng.uniform(0.8, 2.0)),
                "amplitude": float(rng.uniform(0.8, 1.0))}
    if mode == "morph":
        return {"mode": "morph", "rate": float(rng.uniform(0.5, 0.8))}
    raise ValueError(mode)


def _noun_phrase(rng, pool: Sequence[str]) -> str:
    noun = pool[int(rng.integers(len(pool)))]
    if rng.random() < 0.6:
        return f"{onto.ADJECTIVES[int(rng.integers(len(onto.ADJECTIVES)))]} {noun}"
    return noun


def _phrases(rng, d_sig: int, n: int) -> list[str]:
    """Agent phrase plus n-1 others whose signatures stay below 0.5 cosine."""
    for _ in range(MAX_TRIES):
        out = [_noun_phrase(rng, onto.ANIMATE)]
        sigs = [phrase_signature(out[0], d_sig)]
        for _k in range(n - 1):
            for _ in range(MAX_TRIES):
                p = _noun_phrase(rng, onto.NOUNS)
                s = phrase_signature(p, d_sig)
                if p.split()[-1] not in {q.split()[-1] for q in out} and all(s @ q < 0.5 for q in sigs):
                    out.append(p)
                    sigs.append(s)
                    break
        if len(out) == n:
            return out
    raise RuntimeError("could not draw dissimilar object phrases")


def _location(rng, verb: str) -> str:
    if verb == "fall":
        return ["on the ground", "on the floor"][int(rng.integers(2))]
    if verb == "rise":
        return "in the air"
    return ["on the floor", "on the ground", "on the table"][int(rng.integers(3))]


def sample_clip_objects(verb: str, rng: np.random.Generator, dims: Dims, n_distractors: int = 0):
    """Draw object scripts and role phrases for one clip of ``verb``."""
    ontology = default_ontology()
    verb_def = ontology.verbs[ontology.index(verb)]
    sa, sb = _box_size(rng, dims), _box_size(rng, dims)
    extra = {}
    prog = verb_def.trajectory_program
    if prog == "converge":
        pa, pb = _sample_converge(rng, dims, sa, sb)
    elif prog == "diverge":
        pa, pb = _sample_diverge(rng, dims, sa, sb)
    elif prog == "vertical:down":
        pa, pb = _sample_vertical(rng, dims, sa, sb, onto.LOW_BAND)
    elif prog == "vertical:up":
        pa, pb = _sample_vertical(rng, dims, sa, sb, onto.HIGH_BAND)
    elif prog.startswith("stationary:"):
        pa, pb = _sample_stationary(rng, dims, sa, sb, far=prog.endswith("far"))
    elif prog == "parallel":
        pa, pb, direction = _sample_parallel(rng, dims, sa, sb)
        extra["Arg2"] = f"to the {direction}"
    else:
        raise ValueError(prog)

    n_obj = 2 + n_distractors
    phrases = _phrases(rng, dims.d_sig, n_obj)
    conf_a = float(rng.uniform(0.7, 1.0))
    conf_b = float(rng.uniform(0.4, conf_a - 0.05))
    confs = [conf_a, conf_b]
    for _ in range(n_distractors):
        confs.append(float(rng.uniform(0.05, confs[-1] - 0.01)))
    textures = [_texture(rng, verb_def.texture_program[0]), _texture(rng, verb_def.texture_program[1])]
    paths = [pa, pb]
    sizes = [sa, sb]
    for _ in range(n_distractors):
        s = _box_size(rng, dims)
        x = float(rng.uniform(*_x_range(s[0], dims)))
        y = float(rng.uniform(s[1] / 2, dims.H - s[1] / 2))
        paths.append(_static(0, dims.F2 - 1, x, y))
        sizes.append(s)
        textures.append({"mode": "static"})

    objects = [
        ObjectScript(
            object_id=k,
            noun_phrase=phrases[k],
            t_start=0,
            t_end=dims.F2 - 1,
            keyframes=paths[k],
            size=sizes[k],
            texture=textures[k],
            base_signature=phrase_signature(phrases[k], dims.d_sig).tolist(),
            detector_confidence=confs[k],
            frame=(float(dims.W), float(dims.H)),
            n_frames=dims.F2,
        )
        for k in range(n_obj)
    ]
    role_phrase = {"Arg0": phrases[0], "Arg1": phrases[1], **extra}
    return objects, role_phrase


def _split_code(split: str) -> int:
    return {"train": 0, "val": 1}[split]


def _balanced_verbs(rng, n_verbs: int, per_verb: int) -> list[int]:
    labels = np.repeat(np.arange(n_verbs), per_verb)
    rng.shuffle(labels)
    return labels.tolist()


def generate_dataset(config: DatasetConfig, seed: int | None = None,
                     ontology: VerbOntology | None = None) -> list[ClipRecord]:
    ontology = ontology or default_ontology()
    ontology.check_channel_separation()
    dims = config.dims.validate()
    seed = config.seed if seed is None else int(seed)
    _check_feasible(dims, ontology)
    clips: list[ClipRecord] = []
    for split, per_verb in (("train", config.clips_per_verb), ("val", config.val_clips_per_verb)):
        if per_verb <= 0:
            continue
        total = per_verb * len(ontology)
        if total % CLIPS_PER_VIDEO:
            raise ValueError(f"{split}: {total} clips is not a multiple of {CLIPS_PER_VIDEO}")
        order_rng = np.random.default_rng([seed, _split_code(split), 0])
        verbs = _balanced_verbs(order_rng, len(ontology), per_verb)
        for vid in range(total // CLIPS_PER_VIDEO):
            video_id = f"{split}{vid:05d}"
            scene = onto.SCENES[int(order_rng.integers(len(onto.SCENES)))]
            for k in range(CLIPS_PER_VIDEO):
                idx = vid * CLIPS_PER_VIDEO + k
                clips.append(_make_clip(ontology, dims, config, seed, split, idx, video_id, k + 1,
                                        verbs[idx], scene))
    return clips


def _make_clip(ontology, dims, config, seed, split, idx, video_id, clip_index, verb_id, scene):
    verb = ontology.names[verb_id]
    rng = np.random.default_rng([seed, _split_code(split), 1, idx])
    for _ in range(MAX_TRIES):
        objects, role_phrase = sample_clip_objects(verb, rng, dims, config.distractors)
        if ontology.classify(objects) == [verb_id]:
            break
    else:
        raise RuntimeError(f"verb {verb!r}: predicate unsatisfiable under {dims}")
    role_phrase["AScn"] = f"in the {scene}"
    if "ALoc" in ontology.role_set(verb_id):
        role_phrase["ALoc"] = _location(rng, verb)
    roles = [(r, role_phrase[r]) for r in onto.ROLES if r in ontology.role_set(verb_id)]
    ann = EventAnnotation(verb=verb_id, roles=roles)
    ann.validate(ontology)
    if split == "train":
        gt = [verb_id]
        refs = {r: [p] for r, p in roles}
    else:
        gt = [verb_id, *ontology.synonym_ids(verb_id)]
        refs = {r: reference_variants(p) for r, p in roles}
    clip_id = f"{video_id}_c{clip_index}"
    return ClipRecord(
        clip_id=clip_id,
        video_id=video_id,
        clip_index=clip_index,
        split=split,
        dims=dims,
        sigma_bg=float(config.sigma_bg),
        noise_seed=int(np.random.default_rng([seed, _split_code(split), 2, idx]).integers(2**62)),
        objects=objects,
        annotation=ann,
        gt_verbs=gt,
        references=refs,
        features={"slow": f"features/{clip_id}.slow.evgf", "fast": f"features/{clip_id}.fast.evgf"},
    )


def _check_feasible(dims: Dims, ontology: VerbOntology) -> None:
    # two max-size boxes plus the far gap must fit side by side
    widest = onto.BOX_FRAC[1] * dims.W
    if onto.FAR_GAP * dims.W + widest > dims.W:
        far = [v.name for v in ontology.verbs if v.trajectory_program.endswith(":far")]
        raise ValueError(f"verb {far[0]!r}: frame width {dims.W} too small for far placement")
    if dims.Wg < 2 or dims.Hg < 2:
        raise ValueError(f"verb {ontology.names[0]!r}: grid {dims.Wg}x{dims.Hg} cannot separate objects")
