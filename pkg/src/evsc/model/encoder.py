"""Argument interaction encoder and verb classifier.

Tokens are the whole-video mean feature, one motion embedding per retained
object (confidence order) and optionally the interaction embedding. Each kind
has its own projection into the model width; there is no positional encoding,
so the readout at the video token is invariant to object order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..embed.state import PATHWAYS, ClipStates, LSTMAggregator, state_agg
from ..tensor import ParamStore, Tensor, add, concat, matmul, relu, reshape, slice_axis, softmax, stack, transpose
from .nn import EncoderLayer, Linear

VARIANTS = ("OSE-pixel+OME", "OSE-pixel/disp+OME", "OSE-pixel/disp+OME+OIE")
AGGREGATORS = ("mean", "lstm")


def variant_flags(variant: str) -> tuple[bool, bool]:
    """(use displacement, use interaction) for a variant name."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return "disp" in variant, variant.endswith("+OIE")


@dataclass
class EncoderConfig:
    d1: int = 32
    d2: int = 8
    d_c: int = 128
    d_m: int = 64
    heads: int = 4
    ffn_mult: int = 4
    n_verbs: int = 8
    variant: str = "OSE-pixel/disp+OME+OIE"
    aggregator: str = "mean"
    o_max: int = 8

    def __post_init__(self):
        variant_flags(self.variant)
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        if (self.d1 + self.d2) % 2:
            raise ValueError("d1 + d2 must be even for the (d1 + d2) / 2 bottleneck")

    @property
    def d_event(self) -> int:
        return self.d1 + self.d2

    @property
    def d_object(self) -> int:
        return self.d1 + self.d2 + 2 * self.d_c


def video_mean_feature(pack) -> np.ndarray:
    """Per pathway mean over frames and cells, slow then fast."""
    return np.concatenate([pack.slow.mean(axis=(0, 1, 2)), pack.fast.mean(axis=(0, 1, 2))])


@dataclass
class TokenSequence:
    vectors: Tensor                 # L x d_m
    kinds: list[str]
    object_ids: list[int] = field(default_factory=list)

    @property
    def labels(self) -> list[str]:
        out, k = [], 0
        for kind in self.kinds:
            if kind == "object":
                out.append(f"object{self.object_ids[k]}")
                k += 1
            else:
                out.append(kind)
        return out


@dataclass
class EncodedClip:
    e: Tensor
    attention: np.ndarray
    motions: list[Tensor]
    interaction: Tensor | None
    tokens: TokenSequence


class EventEncoder:
    def __init__(self, config: EncoderConfig, params: ParamStore):
        self.config = config
        self.params = params
        c = config
        self.use_disp, self.use_oie = variant_flags(c.variant)
        self.w_c = params.xavier("enc.W_c", (c.d_c, 4))
        self.proj_video = Linear(params, "enc.proj_video", c.d_event, c.d_m)
        self.proj_object = Linear(params, "enc.proj_object", c.d_object, c.d_m)
        self.proj_inter = Linear(params, "enc.proj_inter", c.d_object, c.d_m) if self.use_oie else None
        self.layer = EncoderLayer(params, "enc.layer", c.d_m, c.heads, c.ffn_mult * c.d_m)
        self.proj_out = Linear(params, "enc.proj_out", c.d_m, c.d_event)
        self.state_lstm: dict[str, LSTMAggregator] = {}
        self.inter_lstm: dict[str, LSTMAggregator] = {}
        if c.aggregator == "lstm":
            for pw, d in zip(PATHWAYS, (c.d1, c.d2)):
                self.state_lstm[pw] = LSTMAggregator(params, f"enc.state_agg.{pw}", d + c.d_c)
                if self.use_oie:
                    self.inter_lstm[pw] = LSTMAggregator(params, f"enc.inter_agg.{pw}", d + c.d_c)

    # -- embeddings ------------------------------------------------------
    def _aggregate(self, seqs, lstms) -> Tensor:
        parts = []
        for pw in PATHWAYS:
            s = seqs[pw].states(self.w_c, self.use_disp)
            parts.append(state_agg(s, self.config.aggregator, lstms.get(pw)))
        return concat(parts, axis=0)

    def motion_embedding(self, seqs) -> Tensor:
        return self._aggregate(seqs, self.state_lstm)

    def interaction_embedding(self, seqs) -> Tensor:
        return self._aggregate(seqs, self.inter_lstm)

    # -- encoder -----------------------------------------------------------
    def assemble_tokens(self, g_bar, motions: list[Tensor], interaction: Tensor | None,
                        object_ids: list[int] | None = None) -> TokenSequence:
        motions = motions[: self.config.o_max]
        if not isinstance(g_bar, Tensor):
            g_bar = Tensor(np.asarray(g_bar, dtype=np.float64))
        rows = [reshape(self.proj_video(g_bar), (1, self.config.d_m))]
        kinds = ["video"]
        if motions:
            rows.append(self.proj_object(stack(motions, axis=0)))
            kinds += ["object"] * len(motions)
        if interaction is not None:
            if self.proj_inter is None:
                raise ValueError(f"variant {self.config.variant} has no interaction token")
            rows.append(reshape(self.proj_inter(interaction), (1, self.config.d_m)))
            kinds.append("interaction")
        ids = list(object_ids[: len(motions)]) if object_ids is not None else list(range(len(motions)))
        return TokenSequence(concat(rows, axis=0) if len(rows) > 1 else rows[0], kinds, ids)

    def encode_event(self, tokens: TokenSequence) -> tuple[Tensor, np.ndarray]:
        out, attention = self.layer(tokens.vectors)
        e = self.proj_out(reshape(slice_axis(out, 0, 0, 1), (self.config.d_m,)))
        return e, attention

    def encode_clip(self, states: ClipStates) -> EncodedClip:
        n = min(len(states.objects), self.config.o_max)
        motions = [self.motion_embedding(s) for s in states.objects[:n]]
        inter = None
        if self.use_oie and states.interaction is not None:
            inter = self.interaction_embedding(states.interaction)
        tokens = self.assemble_tokens(Tensor(states.video_mean), motions, inter, states.object_ids[:n])
        e, attention = self.encode_event(tokens)
        return EncodedClip(e, attention, motions, inter, tokens)


class VerbHead:
    """softmax(W2 relu(W1 e + b1) + b2) with bottleneck (d1 + d2) / 2."""

    def __init__(self, params: ParamStore, d_event: int, n_verbs: int):
        hidden = d_event // 2
        self.w1 = params.xavier("head.W1", (hidden, d_event))
        self.b1 = params.zeros("head.b1", (hidden,))
        self.w2 = params.xavier("head.W2", (n_verbs, hidden))
        self.b2 = params.zeros("head.b2", (n_verbs,))

    def logits(self, e: Tensor) -> Tensor:
        x = e if e.ndim == 2 else reshape(e, (1, e.shape[0]))
        h = relu(add(matmul(x, transpose(self.w1)), self.b1))
        out = add(matmul(h, transpose(self.w2)), self.b2)
        return out if e.ndim == 2 else reshape(out, (out.shape[1],))


def classify_verb(e: Tensor, head: VerbHead) -> Tensor:
    return softmax(head.logits(e))


def topk_verbs(probs, k: int) -> list[int]:
    p = np.asarray(probs.data if isinstance(probs, Tensor) else probs, dtype=np.float64)
    if not 1 <= k <= p.shape[0]:
        raise ValueError(f"K={k} outside [1, {p.shape[0]}]")
    order = np.lexsort((np.arange(p.shape[0]), -p))
    return [int(i) for i in order[:k]]
