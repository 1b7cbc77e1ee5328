"""Encoder plus verb head as one saveable unit."""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..embed.state import ClipStates
from ..tensor import ParamStore, Tensor
from .encoder import EncodedClip, EncoderConfig, EventEncoder, VerbHead, classify_verb

PARAMS_FILE = "params.npz"
CONFIG_FILE = "model.json"


class VerbModel:
    def __init__(self, config: EncoderConfig, seed: int = 0, params: ParamStore | None = None):
        self.config = config
        self.seed = seed
        self.params = params if params is not None else ParamStore(seed)
        self.encoder = EventEncoder(config, self.params)
        self.head = VerbHead(self.params, config.d_event, config.n_verbs)

    @property
    def frozen(self) -> bool:
        return self.params.frozen

    def freeze(self) -> None:
        self.params.freeze()

    def encode(self, states: ClipStates) -> EncodedClip:
        return self.encoder.encode_clip(states)

    def logits(self, states: ClipStates) -> Tensor:
        return self.head.logits(self.encode(states).e)

    def predict_probs(self, states: ClipStates) -> np.ndarray:
        return classify_verb(self.encode(states).e, self.head).data

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.params.save(d / PARAMS_FILE)
        meta = {"encoder": asdict(self.config), "seed": self.seed, "frozen": self.frozen}
        (d / CONFIG_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True))
        return d

    @classmethod
    def load(cls, directory) -> "VerbModel":
        d = Path(directory)
        meta_path = d / CONFIG_FILE
        if not meta_path.exists():
            raise FileNotFoundError(f"{d} has no {CONFIG_FILE}; not a verb model directory")
        meta = json.loads(meta_path.read_text())
        model = cls(EncoderConfig(**meta["encoder"]), seed=int(meta["seed"]))
        model.params.load(d / PARAMS_FILE)
        if meta.get("frozen"):
            model.freeze()
        return model
