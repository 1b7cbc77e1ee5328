from __future__ import annotations

from typing import Callable

import numpy as np

from .core import Tensor, backward


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """Max over coordinates of |analytic - central difference| / max(1, |analytic|).

    ``f`` maps ``x`` to a scalar tensor. It is evaluated twice at the base
    point; differing outputs mean ``f`` is not deterministic and the check is
    meaningless, so that raises.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    base = x.data.copy()

    probe = Tensor(base, requires_grad=True)
    out = f(probe)
    again = f(Tensor(base)).item()
    if out.item() != again:
        raise RuntimeError(f"f is not deterministic: {out.item()!r} vs {again!r}")
    backward(out)
    analytic = probe.grad if probe.grad is not None else np.zeros_like(base)

    numeric = np.zeros_like(base)
    flat = numeric.reshape(-1)
    for k in range(base.size):
        plus = base.copy().reshape(-1)
        minus = base.copy().reshape(-1)
        plus[k] += h
        minus[k] -= h
        fp = f(Tensor(plus.reshape(base.shape))).item()
        fm = f(Tensor(minus.reshape(base.shape))).item()
        flat[k] = (fp - fm) / (2.0 * h)

    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    return float(err.max()) if err.size else 0.0


def finite_diff_check_params(loss_fn: Callable[[], Tensor], params, h: float = 1e-5,
                             names: list[str] | None = None) -> dict[str, float]:
    """Per-parameter version of :func:`finite_diff_check` for a whole module.

    ``loss_fn`` rebuilds the scalar loss from the current parameter values;
    every coordinate of every selected parameter is perturbed in place.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    params.zero_grad()
    out = loss_fn()
    if loss_fn().item() != out.item():
        raise RuntimeError("loss_fn is not deterministic")
    backward(out)
    errors = {}
    for name in names if names is not None else params.names():
        t = params[name]
        analytic = t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        numeric = np.zeros(flat.size)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = loss_fn().item()
            flat[k] = orig - h
            fm = loss_fn().item()
            flat[k] = orig
            numeric[k] = (fp - fm) / (2.0 * h)
        a = analytic.reshape(-1)
        errors[name] = float((np.abs(a - numeric) / np.maximum(1.0, np.abs(a))).max()) if a.size else 0.0
    params.zero_grad()
    return errors
