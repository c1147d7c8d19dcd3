"""Pair-scoring transformer encoder.

Pre-norm encoder blocks over token embeddings plus fixed sinusoidal position
encodings; PAD positions are excluded from attention everywhere. The binary
classifier is a single linear readout of the CLS position; the masked-token
head is the transpose of the residue rows of the embedding matrix (tied).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError, NumericFaultError
from ..rng import SplitMix64
from .vocab import FIRST_RESIDUE_ID, NUM_RESIDUES, VOCAB_SIZE, PAD


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 256
    max_input_len: int = 900
    dropout: float = 0.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigError("d_model must be divisible by n_heads")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "d_model": self.d_model,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_ff": self.d_ff,
            "max_input_len": self.max_input_len,
            "dropout": self.dropout,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(**d)


def sinusoidal_positions(length: int, d_model: int, dtype=torch.float32) -> torch.Tensor:
    """Fixed non-learned position table, the original interleaved layout."""
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    div = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float64) * (-math.log(10000.0) / d_model))
    angles = position * div
    table = torch.zeros(length, d_model, dtype=torch.float64)
    table[:, 0::2] = torch.sin(angles)
    table[:, 1::2] = torch.cos(angles[:, : d_model // 2])
    return table.to(dtype)


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.dropout = dropout

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        # pad_mask: (B, T) True where PAD
        b, t, d = x.shape
        h, dh = self.n_heads, self.d_head

        def split(proj):
            return proj(x).view(b, t, h, dh).transpose(1, 2)

        q, k, v = split(self.q_proj), split(self.k_proj), split(self.v_proj)
        keep = ~pad_mask[:, None, None, :]
        drop = self.dropout if self.training else 0.0
        out = F.scaled_dot_product_attention(q, k, v, attn_mask=keep, dropout_p=drop)
        out = out.transpose(1, 2).reshape(b, t, d)
        return self.out_proj(out)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.attn_norm = nn.LayerNorm(cfg.d_model)
        self.attn = MultiHeadSelfAttention(cfg.d_model, cfg.n_heads, cfg.dropout)
        self.ff_norm = nn.LayerNorm(cfg.d_model)
        self.ff_in = nn.Linear(cfg.d_model, cfg.d_ff)
        self.ff_out = nn.Linear(cfg.d_ff, cfg.d_model)
        self.dropout = cfg.dropout

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.attn_norm(x), pad_mask)
        hidden = self.ff_out(F.gelu(self.ff_in(self.ff_norm(x))))
        if self.dropout > 0 and self.training:
            hidden = F.dropout(hidden, p=self.dropout)
        return x + hidden


class PairEncoder(nn.Module):
    """Encoder plus CLS classification head and tied masked-token head."""

    def __init__(self, cfg: ModelConfig, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        self.token_emb = nn.Embedding(VOCAB_SIZE, cfg.d_model)
        self.register_buffer(
            "pos_table", sinusoidal_positions(cfg.max_input_len, cfg.d_model), persistent=False
        )
        self.layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.n_layers))
        self.final_norm = nn.LayerNorm(cfg.d_model)
        self.cls_head = nn.Linear(cfg.d_model, 1)
        if dtype is not torch.float32:
            self.to(dtype)

    def encode(self, tokens: torch.Tensor) -> torch.Tensor:
        """Hidden states (B, T, d_model); raises NumericFaultError on overflow."""
        b, t = tokens.shape
        if t > self.cfg.max_input_len:
            raise ConfigError(f"prompt length {t} exceeds max_input_len {self.cfg.max_input_len}")
        pad_mask = tokens.eq(PAD)
        if pad_mask.all(dim=1).any():
            raise ConfigError("prompt consisting only of padding")
        # sqrt(d_model) keeps token content comparable to the unit-scale
        # position encodings.
        scale = math.sqrt(self.cfg.d_model)
        x = self.token_emb(tokens) * scale + self.pos_table[:t].to(self.token_emb.weight.dtype)
        for idx, layer in enumerate(self.layers):
            x = layer(x, pad_mask)
            if not torch.isfinite(x).all():
                raise NumericFaultError(f"non-finite activation in encoder layer {idx}", idx)
        x = self.final_norm(x)
        if not torch.isfinite(x).all():
            raise NumericFaultError("non-finite activation in final norm", self.cfg.n_layers)
        return x

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        """Per-item pair logit from the CLS position."""
        hidden = self.encode(tokens)
        return self.cls_head(hidden[:, 0, :]).squeeze(-1)

    def mlm_logits(self, hidden: torch.Tensor) -> torch.Tensor:
        """Residue-vocabulary logits via the tied embedding projection."""
        residue_rows = self.token_emb.weight[FIRST_RESIDUE_ID : FIRST_RESIDUE_ID + NUM_RESIDUES]
        return hidden @ residue_rows.T

    @property
    def dtype(self) -> torch.dtype:
        return self.token_emb.weight.dtype


def _fill_uniform(tensor: torch.Tensor, rng: SplitMix64, bound: float) -> None:
    values = rng.uniform_array(tensor.numel(), -bound, bound)
    with torch.no_grad():
        tensor.copy_(torch.from_numpy(values.reshape(tensor.shape)).to(tensor.dtype))


def init_parameters(model: PairEncoder, seed: int) -> PairEncoder:
    """Xavier-style scaled-uniform init, fully determined by the seed.

    Parameter order follows ``named_parameters()``, which is fixed by module
    construction order, so a seed reproduces the exact same weights.
    """
    rng = SplitMix64(seed).derive("init")
    with torch.no_grad():
        for name, param in model.named_parameters():
            if name.endswith(".bias"):
                param.zero_()
            elif "norm" in name:
                param.fill_(1.0)
            elif param.dim() == 2:
                fan_out, fan_in = param.shape
                _fill_uniform(param, rng, math.sqrt(6.0 / (fan_in + fan_out)))
            else:
                _fill_uniform(param, rng, math.sqrt(3.0 / param.shape[-1]))
        model.token_emb.weight[PAD].zero_()
    return model


def new_model(cfg: ModelConfig, seed: int, dtype: torch.dtype = torch.float32) -> PairEncoder:
    model = PairEncoder(cfg, dtype=dtype)
    return init_parameters(model, seed)


def reinit_head(model: PairEncoder, seed: int) -> None:
    """Fresh classification head (used when fine-tuning pretrained weights)."""
    rng = SplitMix64(seed).derive("head")
    with torch.no_grad():
        fan_out, fan_in = model.cls_head.weight.shape
        _fill_uniform(model.cls_head.weight, rng, math.sqrt(6.0 / (fan_in + fan_out)))
        model.cls_head.bias.zero_()


def predict_logits(model: PairEncoder, prompts: list[np.ndarray], batch_size: int = 32,
                   pad_width: int | None = None) -> np.ndarray:
    """Deterministic batched logits; fixed pad width keeps results independent
    of batch composition."""
    from .vocab import pad_batch

    width = pad_width if pad_width is not None else max(len(p) for p in prompts)
    out = np.empty(len(prompts), dtype=np.float64)
    model.eval()
    with torch.no_grad():
        for start in range(0, len(prompts), batch_size):
            chunk = prompts[start : start + batch_size]
            tokens = torch.from_numpy(pad_batch(chunk, width))
            out[start : start + len(chunk)] = model(tokens).to(torch.float64).numpy()
    return out
