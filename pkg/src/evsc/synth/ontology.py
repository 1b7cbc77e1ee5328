"""Desk-scale verb ontology, phrase vocabulary and verb predicates.

Every verb is defined twice: a sampler (in ``generate``) that writes object
scripts, and a predicate here that decides the verb from those scripts alone.
The generator re-checks the predicate for every clip it emits.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ROLES = ("Arg0", "Arg1", "Arg2", "ALoc", "AScn")

ADJECTIVES = ("gray", "red", "white", "black", "old", "young", "small", "big")
ANIMATE = ("man", "woman", "boy", "girl", "dog", "bull", "horse")
THINGS = ("ball", "bread", "apple", "cup", "box")
NOUNS = ANIMATE + THINGS
LOCATIONS = ("ground", "air", "left", "right", "floor", "table")
FUNCTION_WORDS = ("on", "in", "the", "to")
SCENES = ("street", "kitchen", "field", "park", "room", "beach", "yard", "office", "market", "garden")
PHRASE_TOKENS = ADJECTIVES + NOUNS + LOCATIONS + FUNCTION_WORDS + SCENES
assert len(PHRASE_TOKENS) == len(set(PHRASE_TOKENS)) == 40

# channel-separation pairs: which evidence channel alone separates them
DISPLACEMENT_PAIRS = (("fall", "rise"),)
TEXTURE_PAIRS = (("talk-static-oscillate", "idle"),)
INTERACTION_PAIRS = (("chew-interaction-oscillate", "talk-static-oscillate"),)

# geometry as fractions of the raw frame
BOX_FRAC = (0.19, 0.25)
LOW_BAND = (0.12, 0.20)
MID_BAND = (0.40, 0.60)
HIGH_BAND = (0.80, 0.88)
FAR_GAP = 0.6
NEAR_EDGE = 0.2  # max free space between adjacent boxes, as a fraction of frame width
TOUCH = 0.9  # centre gap as a fraction of the half-width sum for touching boxes


@dataclass(frozen=True)
class Verb:
    name: str
    roles: tuple[str, ...]
    synonyms: tuple[str, str]
    texture_program: tuple[str, str]
    trajectory_program: str
    predicate: Callable[[Sequence], bool]


@dataclass
class VerbOntology:
    verbs: list[Verb]

    def __len__(self) -> int:
        return len(self.verbs)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.verbs]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def role_set(self, verb_id: int) -> tuple[str, ...]:
        return self.verbs[verb_id].roles

    @property
    def senses(self) -> list[str]:
        """Primary verbs first (ids 0..V-1), then their synonym senses."""
        out = self.names[:]
        for v in self.verbs:
            out.extend(v.synonyms)
        return out

    def synonym_ids(self, verb_id: int) -> tuple[int, int]:
        base = len(self.verbs) + 2 * verb_id
        return base, base + 1

    def sense_to_verb(self, sense_id: int) -> int:
        n = len(self.verbs)
        return sense_id if sense_id < n else (sense_id - n) // 2

    def classify(self, scripts: Sequence) -> list[int]:
        return [i for i, v in enumerate(self.verbs) if v.predicate(scripts)]

    def check_channel_separation(self) -> dict[str, list[tuple[str, str]]]:
        """Structural check of the three single-channel verb pairs."""
        by_name = {v.name: v for v in self.verbs}
        report: dict[str, list[tuple[str, str]]] = {"displacement": [], "texture": [], "interaction": []}
        for a, b in DISPLACEMENT_PAIRS:
            va, vb = by_name[a], by_name[b]
            if va.texture_program != vb.texture_program or va.trajectory_program == vb.trajectory_program:
                raise AssertionError(f"{a}/{b} must differ only in trajectory")
            report["displacement"].append((a, b))
        for a, b in TEXTURE_PAIRS:
            va, vb = by_name[a], by_name[b]
            if va.trajectory_program != vb.trajectory_program or va.texture_program == vb.texture_program:
                raise AssertionError(f"{a}/{b} must differ only in texture")
            report["texture"].append((a, b))
        for a, b in INTERACTION_PAIRS:
            va, vb = by_name[a], by_name[b]
            ta, tb = va.trajectory_program.split(":"), vb.trajectory_program.split(":")
            # same per-object program family, different relative placement
            if va.texture_program != vb.texture_program or ta[0] != tb[0] or ta[1] == tb[1]:
                raise AssertionError(f"{a}/{b} must differ only in object interaction")
            report["interaction"].append((a, b))
        return report

    def pair_subset(self, channel: str) -> list[int]:
        pairs = {"displacement": DISPLACEMENT_PAIRS, "texture": TEXTURE_PAIRS,
                 "interaction": INTERACTION_PAIRS}[channel]
        return sorted({self.index(n) for pair in pairs for n in pair})


# -- predicate helpers --------------------------------------------------------
def _tex(obj) -> str:
    return obj.texture["mode"]


def _centres(obj) -> np.ndarray:
    return np.asarray(obj.centres(), dtype=np.float64)


def _stationary(obj) -> bool:
    c = _centres(obj)
    return bool(np.all(np.abs(c - c[0]) < 1e-9))


def _full_slot(obj, n_frames: int) -> bool:
    return obj.t_start == 0 and obj.t_end == n_frames - 1


def _boxes_overlap(a, b, t: int) -> bool:
    return a.bbox(t).overlaps(b.bbox(t))


def _frame_h(obj) -> float:
    return obj.frame[1]


def _frame_w(obj) -> float:
    return obj.frame[0]


def _in_band(y: float, band: tuple[float, float], h: float) -> bool:
    return band[0] * h - 1e-9 <= y <= band[1] * h + 1e-9


def _pair(scripts):
    ranked = sorted(scripts, key=lambda o: (-o.detector_confidence, o.object_id))
    if len(ranked) < 2:
        return None
    a, b = ranked[0], ranked[1]
    n = a.n_frames
    if not (_full_slot(a, n) and _full_slot(b, n)):
        return None
    return a, b


def _gap(a, b) -> np.ndarray:
    return np.linalg.norm(_centres(a) - _centres(b), axis=1)


def _approach_hit(scripts) -> bool:
    p = _pair(scripts)
    if p is None:
        return False
    a, b = p
    if (_tex(a), _tex(b)) != ("static", "morph"):
        return False
    gap = _gap(a, b)
    touching = [_boxes_overlap(a, b, t) for t in range(a.n_frames)]
    if touching[0] or not any(touching):
        return False
    first = touching.index(True)
    return bool(np.all(np.diff(gap[: first + 1]) < 0))


def _recede(scripts) -> bool:
    p = _pair(scripts)
    if p is None:
        return False
    a, b = p
    if (_tex(a), _tex(b)) != ("morph", "morph"):
        return False
    gap = _gap(a, b)
    return (_boxes_overlap(a, b, 0) and not _boxes_overlap(a, b, a.n_frames - 1)
            and bool(np.all(np.diff(gap) >= -1e-9)))


def _vertical(scripts, band) -> bool:
    p = _pair(scripts)
    if p is None:
        return False
    a, b = p
    if (_tex(a), _tex(b)) != ("static", "static"):
        return False
    ca = _centres(a)
    h = _frame_h(a)
    if not (_in_band(ca[0, 1], MID_BAND, h) and _in_band(ca[-1, 1], band, h)):
        return False
    if np.any(np.abs(ca[:, 0] - ca[0, 0]) > 1e-9):
        return False
    dy = np.diff(ca[:, 1])
    monotone = np.all(dy <= 1e-9) if band is LOW_BAND else np.all(dy >= -1e-9)
    return bool(monotone and _stationary(b) and _in_band(_centres(b)[0, 1], MID_BAND, h))


def _fall(scripts) -> bool:
    return _vertical(scripts, LOW_BAND)


def _rise(scripts) -> bool:
    return _vertical(scripts, HIGH_BAND)


def _static_pair(scripts, textures, far: bool) -> bool:
    p = _pair(scripts)
    if p is None:
        return False
    a, b = p
    if (_tex(a), _tex(b)) != textures or not (_stationary(a) and _stationary(b)):
        return False
    h, w = _frame_h(a), _frame_w(a)
    ya, yb = _centres(a)[0, 1], _centres(b)[0, 1]
    if not (_in_band(ya, MID_BAND, h) and _in_band(yb, MID_BAND, h)):
        return False
    dx = abs(_centres(a)[0, 0] - _centres(b)[0, 0])
    if far:
        return dx >= FAR_GAP * w - 1e-9
    edge = dx - 0.5 * (a.size[0] + b.size[0])
    return not _boxes_overlap(a, b, 0) and edge <= NEAR_EDGE * w + 1e-9


def _talk(scripts) -> bool:
    return _static_pair(scripts, ("oscillate", "static"), far=True)


def _chew(scripts) -> bool:
    return _static_pair(scripts, ("oscillate", "static"), far=False)


def _idle(scripts) -> bool:
    return _static_pair(scripts, ("static", "static"), far=True)


def _carry(scripts) -> bool:
    p = _pair(scripts)
    if p is None:
        return False
    a, b = p
    if (_tex(a), _tex(b)) != ("static", "static"):
        return False
    ca, cb = _centres(a), _centres(b)
    if _stationary(a) or np.any(np.abs(np.diff(ca, axis=0) - np.diff(cb, axis=0)) > 1e-9):
        return False
    dx = np.abs(ca[:, 0] - cb[:, 0])
    return bool(np.all(dx <= 0.5 * (a.size[0] + b.size[0]) + 1e-9))


def default_ontology() -> VerbOntology:
    return VerbOntology([
        Verb("approach-hit", ("Arg0", "Arg1", "AScn"), ("collide", "bump"),
             ("static", "morph"), "converge", _approach_hit),
        Verb("recede", ("Arg0", "Arg1", "AScn"), ("withdraw", "separate"),
             ("morph", "morph"), "diverge", _recede),
        Verb("fall", ("Arg0", "ALoc", "AScn"), ("drop", "tumble"),
             ("static", "static"), "vertical:down", _fall),
        Verb("rise", ("Arg0", "ALoc", "AScn"), ("lift", "ascend"),
             ("static", "static"), "vertical:up", _rise),
        Verb("talk-static-oscillate", ("Arg0", "Arg1", "AScn"), ("speak", "chat"),
             ("oscillate", "static"), "stationary:far", _talk),
        Verb("chew-interaction-oscillate", ("Arg0", "Arg1", "AScn"), ("eat", "bite"),
             ("oscillate", "static"), "stationary:near", _chew),
        Verb("carry-parallel-motion", ("Arg0", "Arg1", "Arg2", "AScn"), ("transport", "haul"),
             ("static", "static"), "parallel", _carry),
        Verb("idle", ("Arg0", "ALoc", "AScn"), ("rest", "wait"),
             ("static", "static"), "stationary:far", _idle),
    ])


# -- phrase signatures -------------------------------------------------------
_SIGNATURE_SEED = 20221212


def token_vector(token: str, dim: int) -> np.ndarray:
    rng = np.random.default_rng([_SIGNATURE_SEED, PHRASE_TOKENS.index(token), dim])
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def phrase_signature(phrase: str, dim: int) -> np.ndarray:
    """Unit feature direction of a noun phrase: head noun plus half its adjective."""
    words = phrase.split()
    v = token_vector(words[-1], dim)
    if len(words) > 1:
        v = v + 0.5 * token_vector(words[0], dim)
    return v / np.linalg.norm(v)


def reference_variants(phrase: str) -> list[str]:
    """Three annotator phrasings of one canonical phrase."""
    words = phrase.split()
    if words[0] in ("on", "in", "to") and len(words) == 3:
        prep, _, head = words
        return [phrase, head, f"{prep} {head}"]
    head = words[-1]
    if len(words) > 1:
        return [phrase, head, f"the {head}"]
    return [phrase, f"the {head}", head]
