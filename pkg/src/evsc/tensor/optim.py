from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamStore

PRETRAINED_LR_SCALE = 0.1


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    step: int = 0
    lr_scale: dict[str, float] = field(default_factory=dict)
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamStore, lr: float = 1e-4, **kw) -> "AdamState":
        state = cls(lr=lr, **kw)
        for name, t in params.items():
            state.lr_scale[name] = PRETRAINED_LR_SCALE if params.is_pretrained(name) else 1.0
            state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        return state


def _check_trainable(params: ParamStore) -> None:
    if params.frozen:
        raise RuntimeError("optimizer step on a frozen parameter store")
    for name, t in params.items():
        if t.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient")


def adam_step(params: ParamStore, state: AdamState) -> None:
    """One bias-corrected Adam update; zeroes every gradient afterwards."""
    _check_trainable(params)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, t in params.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
            state.lr_scale.setdefault(name, PRETRAINED_LR_SCALE if params.is_pretrained(name) else 1.0)
        g = t.grad
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        lr = state.lr * state.lr_scale[name]
        t.data = t.data - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        t.zero_grad()


def sgd_step(params: ParamStore, lr: float) -> None:
    _check_trainable(params)
    for name, t in params.items():
        scale = PRETRAINED_LR_SCALE if params.is_pretrained(name) else 1.0
        t.data = t.data - lr * scale * t.grad
        t.zero_grad()
