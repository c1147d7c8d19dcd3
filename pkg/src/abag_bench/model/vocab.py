"""Token vocabulary and the fixed pair-prompt layout.

Prompt layout: ``[CLS, AB_HC, hc..., AB_LC, lc..., AG, ag...]``. When the
combined length exceeds ``max_len`` the antigen tail is truncated first; the
antibody chains are never cut.
"""

from __future__ import annotations

import numpy as np

from ..dataset import CANONICAL_RESIDUES, Antibody, Antigen
from ..errors import ConfigError

PAD, MASK, CLS, AB_HC, AB_LC, AG = 0, 1, 2, 3, 4, 5
_SPECIALS = {"<pad>": PAD, "<mask>": MASK, "<cls>": CLS, "<hc>": AB_HC, "<lc>": AB_LC, "<ag>": AG}

RESIDUE_ORDER = CANONICAL_RESIDUES + "X"
FIRST_RESIDUE_ID = len(_SPECIALS)
VOCAB_SIZE = FIRST_RESIDUE_ID + len(RESIDUE_ORDER)
NUM_RESIDUES = len(RESIDUE_ORDER)

_TOKEN_TO_ID = dict(_SPECIALS)
for _i, _ch in enumerate(RESIDUE_ORDER):
    _TOKEN_TO_ID[_ch] = FIRST_RESIDUE_ID + _i
_ID_TO_TOKEN = {v: k for k, v in _TOKEN_TO_ID.items()}

_ENCODE_TABLE = np.full(128, -1, dtype=np.int64)
for _i, _ch in enumerate(RESIDUE_ORDER):
    _ENCODE_TABLE[ord(_ch)] = FIRST_RESIDUE_ID + _i


class Vocabulary:
    """Stable token <-> id bijection; ids never change across runs."""

    size = VOCAB_SIZE
    residue_ids = tuple(range(FIRST_RESIDUE_ID, FIRST_RESIDUE_ID + NUM_RESIDUES))

    @staticmethod
    def token_to_id(token: str) -> int:
        return _TOKEN_TO_ID[token]

    @staticmethod
    def id_to_token(token_id: int) -> str:
        return _ID_TO_TOKEN[token_id]

    @staticmethod
    def encode_residues(seq: str) -> np.ndarray:
        ids = _ENCODE_TABLE[np.frombuffer(seq.encode("ascii"), dtype=np.uint8)]
        if (ids < 0).any():
            bad = seq[int(np.argmax(ids < 0))]
            raise ConfigError(f"residue {bad!r} not in vocabulary")
        return ids

    @staticmethod
    def is_residue_id(token_id: int) -> bool:
        return token_id >= FIRST_RESIDUE_ID


def tokenize_pair(
    antibody: Antibody,
    antigen: Antigen,
    max_len: int = 900,
) -> np.ndarray:
    """Deterministic prompt ids for one antibody-antigen pair (no padding)."""
    return tokenize_sequences(antibody.heavy_var, antibody.light_var, antigen.sequence, max_len)


def tokenize_sequences(heavy: str, light: str, antigen: str, max_len: int = 900) -> np.ndarray:
    hc = Vocabulary.encode_residues(heavy)
    lc = Vocabulary.encode_residues(light)
    ag = Vocabulary.encode_residues(antigen)
    fixed = 4 + len(hc) + len(lc)  # CLS + three markers + both chains
    if fixed > max_len:
        raise ConfigError(
            f"antibody chains ({len(hc)}+{len(lc)} residues) do not fit max_input_len {max_len}"
        )
    ag_budget = max_len - fixed
    if len(ag) > ag_budget:
        ag = ag[:ag_budget]
    parts = [
        np.array([CLS, AB_HC], dtype=np.int64),
        hc,
        np.array([AB_LC], dtype=np.int64),
        lc,
        np.array([AG], dtype=np.int64),
        ag,
    ]
    return np.concatenate(parts)


def tokenize_single(kind: str, seq: str, max_len: int = 900) -> np.ndarray:
    """Single-sequence prompt for masked-token pretraining: [CLS, marker, seq]."""
    markers = {"hc": AB_HC, "lc": AB_LC, "ag": AG}
    if kind not in markers:
        raise ConfigError(f"unknown sequence kind {kind!r}")
    ids = Vocabulary.encode_residues(seq)
    budget = max_len - 2
    if len(ids) > budget:
        ids = ids[:budget]
    return np.concatenate([np.array([CLS, markers[kind]], dtype=np.int64), ids])


def pad_batch(prompts: list[np.ndarray], width: int | None = None) -> np.ndarray:
    """Stack prompts into a PAD-filled (batch, width) int64 matrix."""
    longest = max(len(p) for p in prompts)
    width = longest if width is None else width
    if width < longest:
        raise ConfigError("pad width smaller than longest prompt")
    out = np.full((len(prompts), width), PAD, dtype=np.int64)
    for i, p in enumerate(prompts):
        out[i, : len(p)] = p
    return out
