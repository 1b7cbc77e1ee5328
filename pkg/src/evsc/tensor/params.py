from __future__ import annotations

import zlib
from typing import Iterator

import numpy as np

from .core import Tensor


def _rng_for(seed: int, name: str) -> np.random.Generator:
    # per-name streams keep a parameter's init independent of which others exist
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())])


class ParamStore:
    """Named learnable tensors, iterated in lexicographic order."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._entries: dict[str, Tensor] = {}
        self._pretrained: set[str] = set()
        self.frozen = False

    # -- creation ------------------------------------------------------
    def _add(self, name: str, data: np.ndarray, pretrained: bool) -> Tensor:
        if name in self._entries:
            raise KeyError(f"parameter {name!r} already exists")
        if self.frozen:
            raise RuntimeError("cannot add parameters to a frozen store")
        t = Tensor(data, requires_grad=True, name=name)
        self._entries[name] = t
        if pretrained:
            self._pretrained.add(name)
        return t

    def xavier(self, name: str, shape: tuple[int, int], pretrained: bool = False) -> Tensor:
        fan_out, fan_in = shape
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return self._add(name, _rng_for(self.seed, name).uniform(-bound, bound, size=shape), pretrained)

    def zeros(self, name: str, shape, pretrained: bool = False) -> Tensor:
        return self._add(name, np.zeros(shape), pretrained)

    def ones(self, name: str, shape, pretrained: bool = False) -> Tensor:
        return self._add(name, np.ones(shape), pretrained)

    def normal(self, name: str, shape, std: float, pretrained: bool = False) -> Tensor:
        return self._add(name, _rng_for(self.seed, name).normal(0.0, std, size=shape), pretrained)

    def constant(self, name: str, data, pretrained: bool = False) -> Tensor:
        return self._add(name, np.array(data, dtype=np.float64), pretrained)

    # -- access --------------------------------------------------------
    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return sorted(self._entries)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._entries[name]

    def is_pretrained(self, name: str) -> bool:
        return name in self._pretrained

    def mark_pretrained(self, name: str) -> None:
        if name not in self._entries:
            raise KeyError(name)
        self._pretrained.add(name)

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self._entries.values())

    def zero_grad(self) -> None:
        for t in self._entries.values():
            t.zero_grad()

    def freeze(self) -> None:
        """Detach every entry from future tapes; values can no longer be trained."""
        self.frozen = True
        for t in self._entries.values():
            t.requires_grad = False
            t.grad = None

    # -- (de)serialisation -----------------------------------------------
    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.items()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        missing = set(self._entries) - set(state)
        unexpected = set(state) - set(self._entries)
        if strict and (missing or unexpected):
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, arr in state.items():
            if name not in self._entries:
                continue
            t = self._entries[name]
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != t.shape:
                raise ValueError(f"{name}: stored shape {arr.shape} != parameter shape {t.shape}")
            t.data = arr.copy()

    def save(self, path) -> None:
        np.savez(path, **self.state_dict())

    def load(self, path, strict: bool = True) -> None:
        with np.load(path) as z:
            self.load_state_dict({k: z[k] for k in z.files}, strict=strict)
