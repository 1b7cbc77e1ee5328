"""Training loops. All randomness comes from explicit seeds."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..embed.state import ClipStates
from ..model.verb import VerbModel
from ..tensor import AdamState, ParamStore, adam_step, add, backward, cross_entropy, mul, reshape

log = logging.getLogger(__name__)


@dataclass
class LossCurve:
    steps: list[float] = field(default_factory=list)
    epochs: list[float] = field(default_factory=list)


def fill_missing_grads(params: ParamStore) -> None:
    """Parameters untouched by a batch (e.g. no interaction token) get a zero gradient."""
    for _, t in params.items():
        if t.grad is None:
            t.grad = np.zeros_like(t.data)


def batch_order(n: int, seed: int, epoch: int, batch_size: int) -> list[np.ndarray]:
    perm = np.random.default_rng([seed, epoch]).permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def train_verb(model: VerbModel, states: Sequence[ClipStates], labels: Sequence[int], *, lr: float,
               epochs: int, batch_size: int = 8, seed: int = 0,
               on_epoch: Callable[[int, float], None] | None = None) -> LossCurve:
    if model.frozen:
        raise RuntimeError("verb model is frozen; refusing to train it")
    if len(states) != len(labels):
        raise ValueError(f"{len(states)} clips but {len(labels)} labels")
    opt = AdamState.for_params(model.params, lr=lr)
    curve = LossCurve()
    y = np.asarray(labels, dtype=np.int64)
    for epoch in range(epochs):
        total, count = 0.0, 0
        for idx in batch_order(len(states), seed, epoch, batch_size):
            loss = None
            for i in idx:
                li = cross_entropy(reshape(model.logits(states[i]), (1, model.config.n_verbs)), y[i : i + 1])
                loss = li if loss is None else add(loss, li)
            loss = mul(loss, 1.0 / len(idx))
            backward(loss)
            fill_missing_grads(model.params)
            adam_step(model.params, opt)
            curve.steps.append(loss.item())
            total += loss.item() * len(idx)
            count += len(idx)
        curve.epochs.append(total / count)
        log.info("epoch %d loss %.5f", epoch, curve.epochs[-1])
        if on_epoch is not None:
            on_epoch(epoch, curve.epochs[-1])
    return curve


def predict_all(model: VerbModel, states: Sequence[ClipStates]) -> np.ndarray:
    return np.stack([model.predict_probs(s) for s in states])


def train_role(decoder, videos: Sequence, targets: Sequence[Sequence[Sequence[int]]], *, lr: float,
               steps: int, seed: int = 0, batch_videos: int = 1) -> LossCurve:
    """Adam on the decoder only; ``videos`` are cached, so the encoder cannot change."""
    from ..model.roles import teacher_forced_loss

    if len(videos) != len(targets):
        raise ValueError(f"{len(videos)} videos but {len(targets)} target groups")
    opt = AdamState.for_params(decoder.params, lr=lr)
    curve = LossCurve()
    epoch, queue = 0, []
    epoch_losses: list[float] = []
    for _ in range(steps):
        if not queue:
            if epoch_losses:
                curve.epochs.append(float(np.mean(epoch_losses)))
                epoch_losses = []
            queue = list(batch_order(len(videos), seed, epoch, batch_videos))
            epoch += 1
        idx = queue.pop(0)
        loss = None
        for i in idx:
            li = teacher_forced_loss(decoder, videos[i], targets[i])
            loss = li if loss is None else add(loss, li)
        loss = mul(loss, 1.0 / len(idx))
        backward(loss)
        fill_missing_grads(decoder.params)
        adam_step(decoder.params, opt)
        curve.steps.append(loss.item())
        epoch_losses.append(loss.item())
    if epoch_losses:
        curve.epochs.append(float(np.mean(epoch_losses)))
    return curve
