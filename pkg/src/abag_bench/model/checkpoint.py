"""Checkpoint container: one .npz with a JSON config header and flat arrays.

Arrays are stored raw, so save -> load -> save round-trips exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from ..errors import ParseError
from .encoder import ModelConfig, PairEncoder

FORMAT_NAME = "abag-bench-checkpoint"
FORMAT_VERSION = 1

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def save_checkpoint(model: PairEncoder, path: str | Path) -> None:
    state = model.state_dict()
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "model_config": model.cfg.to_dict(),
        "dtype": str(model.dtype).removeprefix("torch."),
        "params": list(state.keys()),
    }
    arrays = {f"param/{name}": tensor.detach().numpy() for name, tensor in state.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
                 **arrays)


def load_checkpoint(path: str | Path) -> PairEncoder:
    with np.load(path) as payload:
        if "__meta__" not in payload:
            raise ParseError(f"{path}: not an abag-bench checkpoint")
        meta = json.loads(payload["__meta__"].tobytes().decode("utf-8"))
        if meta.get("format") != FORMAT_NAME:
            raise ParseError(f"{path}: unexpected checkpoint format {meta.get('format')!r}")
        if meta.get("version") != FORMAT_VERSION:
            raise ParseError(f"{path}: unsupported checkpoint version {meta.get('version')!r}")
        cfg = ModelConfig.from_dict(meta["model_config"])
        dtype = _DTYPES.get(meta["dtype"])
        if dtype is None:
            raise ParseError(f"{path}: unsupported dtype {meta['dtype']!r}")
        model = PairEncoder(cfg, dtype=dtype)
        state = {name: torch.from_numpy(payload[f"param/{name}"]) for name in meta["params"]}
    model.load_state_dict(state)
    model.eval()
    return model
