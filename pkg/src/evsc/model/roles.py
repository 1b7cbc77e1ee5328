"""Clip contextualisation and sequence generation of semantic roles.

A target is ``BOS verb [Arg0] tokens [Arg1] tokens ... EOS`` with roles in
canonical order. The event encoder is frozen before any of this runs; its
per-clip outputs are cached as plain arrays so nothing here can reach it.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..synth.ontology import PHRASE_TOKENS, ROLES, VerbOntology, default_ontology
from ..tensor import ParamStore, Tensor, add, concat, cross_entropy, embedding, reshape, slice_axis
from .encoder import EncodedClip
from .nn import DecoderLayer, EncoderLayer, Linear, causal_mask
from .verb import VerbModel

CLIPS_PER_VIDEO = 5
MAX_LEN = 24
PAD, BOS, EOS = "<pad>", "<bos>", "<eos>"


def role_marker(role: str) -> str:
    return f"[{role}]"


class RoleVocab:
    """Specials, one token per verb, one per role marker, then phrase tokens."""

    def __init__(self, ontology: VerbOntology | None = None, phrase_tokens: Sequence[str] = PHRASE_TOKENS):
        ontology = ontology or default_ontology()
        self.verb_names = list(ontology.names)
        self.tokens = [PAD, BOS, EOS, *self.verb_names, *(role_marker(r) for r in ROLES), *phrase_tokens]
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens collide")
        self.ids = {t: i for i, t in enumerate(self.tokens)}
        self.pad, self.bos, self.eos = self.ids[PAD], self.ids[BOS], self.ids[EOS]
        self.marker_ids = {self.ids[role_marker(r)]: r for r in ROLES}

    def __len__(self) -> int:
        return len(self.tokens)

    def verb_id(self, verb: int) -> int:
        return self.ids[self.verb_names[verb]]

    def encode(self, token: str) -> int:
        try:
            return self.ids[token]
        except KeyError:
            raise ValueError(f"token {token!r} is not in the role vocabulary") from None

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[int(i)] for i in ids]


def serialize_target(annotation, vocab: RoleVocab) -> list[int]:
    roles = dict(annotation.roles)
    out = [vocab.bos, vocab.verb_id(annotation.verb)]
    for role in ROLES:
        if role in roles:
            out.append(vocab.encode(role_marker(role)))
            out.extend(vocab.encode(t) for t in roles[role].split())
    out.append(vocab.eos)
    return out


def parse_decoded(tokens: Sequence, vocab: RoleVocab) -> dict[str, str]:
    """Per-role phrases from generated tokens (ids or strings); never raises."""
    words = [vocab.tokens[t] if isinstance(t, (int, np.integer)) and 0 <= t < len(vocab) else str(t)
             for t in tokens]
    markers = {role_marker(r): r for r in ROLES}
    phrases: dict[str, list[str]] = {}
    current: str | None = None
    for w in words:
        if w == EOS:
            break
        if w in markers:
            role = markers[w]
            current = None if role in phrases else role
            if current is not None:
                phrases[current] = []
            continue
        if w in (PAD, BOS) or current is None:
            continue
        phrases[current].append(w)
    return {r: " ".join(phrases.get(r, [])) for r in ROLES}


# -- cached encoder outputs ------------------------------------------------------
@dataclass
class CachedClip:
    clip_id: str
    e: np.ndarray                  # d1 + d2
    motions: np.ndarray            # n_objects x d_object
    interaction: np.ndarray | None


@dataclass
class CachedVideo:
    video_id: str
    clips: list[CachedClip]
    encoder_frozen: bool
    include_interaction: bool


def cache_clip(clip_id: str, enc: EncodedClip, d_object: int) -> CachedClip:
    motions = np.stack([m.data for m in enc.motions]) if enc.motions else np.zeros((0, d_object))
    inter = None if enc.interaction is None else enc.interaction.data.copy()
    return CachedClip(clip_id, enc.e.data.copy(), motions, inter)


def cache_video(verb_model: VerbModel, video_id: str, states: Sequence) -> CachedVideo:
    if not verb_model.frozen:
        raise RuntimeError("event encoder must be frozen before caching clip embeddings for role training")
    if len(states) != CLIPS_PER_VIDEO:
        raise ValueError(f"video {video_id} has {len(states)} clips, expected {CLIPS_PER_VIDEO}")
    d_obj = verb_model.config.d_object
    clips = [cache_clip(s.clip_id, verb_model.encode(s), d_obj) for s in states]
    return CachedVideo(video_id, clips, True, verb_model.encoder.use_oie)


def augmented_embedding(clip: CachedClip, include_interaction: bool) -> np.ndarray:
    """[e, mean of object motions and (optionally) the interaction embedding]."""
    parts = list(clip.motions)
    if include_interaction and clip.interaction is not None:
        parts.append(clip.interaction)
    d_obj = clip.motions.shape[1]
    pooled = np.mean(parts, axis=0) if parts else np.zeros(d_obj)
    return np.concatenate([clip.e, pooled])


# -- model -----------------------------------------------------------------------
@dataclass
class RoleConfig:
    d_event: int = 40
    d_object: int = 296
    d_m: int = 64
    heads: int = 4
    ffn_mult: int = 4
    max_len: int = MAX_LEN


class RoleDecoder:
    def __init__(self, config: RoleConfig, vocab: RoleVocab, seed: int = 0):
        self.config, self.vocab, self.seed = config, vocab, seed
        c = config
        p = self.params = ParamStore(seed)
        self.proj_clip = Linear(p, "ctx.proj", c.d_event + c.d_object, c.d_m)
        self.clip_pos = p.normal("ctx.pos", (CLIPS_PER_VIDEO, c.d_m), std=0.1)
        self.ctx_layer = EncoderLayer(p, "ctx.layer", c.d_m, c.heads, c.ffn_mult * c.d_m)
        self.tok_embed = p.normal("dec.embed", (len(vocab), c.d_m), std=0.1)
        self.tok_pos = p.normal("dec.pos", (c.max_len + 1, c.d_m), std=0.1)
        self.dec_layer = DecoderLayer(p, "dec.layer", c.d_m, c.heads, c.ffn_mult * c.d_m)
        self.out = Linear(p, "dec.out", c.d_m, len(vocab))

    def contextualize(self, video: CachedVideo) -> Tensor:
        """5 x d_m contextual clip embeddings."""
        if len(video.clips) != CLIPS_PER_VIDEO:
            raise ValueError(f"video {video.video_id} has {len(video.clips)} clips, expected {CLIPS_PER_VIDEO}")
        aug = np.stack([augmented_embedding(c, video.include_interaction) for c in video.clips])
        x = add(self.proj_clip(Tensor(aug)), self.clip_pos)
        out, _ = self.ctx_layer(x)
        return out

    def logits(self, context: Tensor, inputs: np.ndarray) -> Tensor:
        """inputs: n_clips x L token ids; returns n_clips x L x |vocab| logits."""
        n, length = inputs.shape
        if length > self.config.max_len + 1:
            raise ValueError(f"sequence length {length} exceeds max_len {self.config.max_len}")
        x = add(embedding(self.tok_embed, inputs), slice_axis(self.tok_pos, 0, 0, length))
        memory = reshape(context, (n, 1, self.config.d_m))
        h = self.dec_layer(x, memory, causal_mask(length))
        return self.out(h)

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.params.save(d / "role_params.npz")
        (d / "role.json").write_text(json.dumps({"role": asdict(self.config), "seed": self.seed},
                                                indent=2, sort_keys=True))
        return d

    @classmethod
    def load(cls, directory, vocab: RoleVocab | None = None) -> "RoleDecoder":
        d = Path(directory)
        meta = json.loads((d / "role.json").read_text())
        dec = cls(RoleConfig(**meta["role"]), vocab or RoleVocab(), seed=int(meta["seed"]))
        dec.params.load(d / "role_params.npz")
        return dec


def pad_targets(seqs: Sequence[Sequence[int]], pad: int) -> np.ndarray:
    width = max(len(s) for s in seqs)
    out = np.full((len(seqs), width), pad, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
    return out


def teacher_forced_loss(decoder: RoleDecoder, video: CachedVideo, targets: Sequence[Sequence[int]]) -> Tensor:
    """Mean token cross-entropy over the 5 clips, PAD targets masked."""
    if not video.encoder_frozen:
        raise RuntimeError(f"video {video.video_id}: event encoder is not frozen; role training refused")
    if len(targets) != len(video.clips):
        raise ValueError(f"{len(targets)} target sequences for {len(video.clips)} clips")
    seq = pad_targets(targets, decoder.vocab.pad)
    inputs, gold = seq[:, :-1], seq[:, 1:]
    logits = decoder.logits(decoder.contextualize(video), inputs)
    n, length, v = logits.shape
    weights = (gold != decoder.vocab.pad).astype(np.float64).reshape(-1)
    return cross_entropy(reshape(logits, (n * length, v)), gold.reshape(-1), weights)


@dataclass
class DecodedClip:
    tokens: list[int]              # generated after BOS, verb first, EOS excluded
    truncated: bool
    roles: dict[str, str] = field(default_factory=dict)


def greedy_decode(decoder: RoleDecoder, video: CachedVideo, verbs: Sequence[int],
                  max_len: int | None = None) -> list[DecodedClip]:
    """Argmax decoding conditioned on the given verb of each clip."""
    max_len = decoder.config.max_len if max_len is None else max_len
    vocab = decoder.vocab
    context = decoder.contextualize(video)
    n = len(video.clips)
    seqs = np.array([[vocab.bos, vocab.verb_id(v)] for v in verbs], dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    while seqs.shape[1] - 1 < max_len and not done.all():
        step = decoder.logits(context, seqs).data[:, -1, :]
        nxt = step.argmax(axis=-1)
        nxt[done] = vocab.pad
        done |= nxt == vocab.eos
        seqs = np.concatenate([seqs, nxt[:, None]], axis=1)
    out = []
    for row in seqs:
        gen = [int(t) for t in row[1:]]
        truncated = vocab.eos not in gen
        if not truncated:
            gen = gen[: gen.index(vocab.eos)]
        out.append(DecodedClip(gen, truncated, parse_decoded(gen[1:], vocab)))
    return out


def prediction_records(video: CachedVideo, clip_indices: Sequence[int], verbs: Sequence[int],
                       decoded: Sequence[DecodedClip], vocab: RoleVocab) -> list[dict]:
    return [{"video_id": video.video_id, "clip_index": int(ci), "verb": vocab.verb_names[v],
             "roles": dict(d.roles)} for ci, v, d in zip(clip_indices, verbs, decoded)]


def write_predictions(path, records: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_predictions(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
