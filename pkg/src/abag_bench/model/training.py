"""Masked-token pretraining, supervised fine-tuning, and batched prediction.

All randomness (shuffling, masking, init) flows from the run seed through
named splitmix streams, so training is a deterministic function of
(dataset, fold assignment, fold id, configs, seed): two runs with the same
inputs produce bit-identical parameter trajectories and logs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..dataset import Assay, Dataset, LabeledPair
from ..errors import ConfigError
from ..rng import SplitMix64
from ..splits import FoldAssignment
from .encoder import ModelConfig, PairEncoder, new_model, predict_logits, reinit_head
from .optim import AdamState, TrainingConfig, adamw_step, clip_gradients, lr_at
from .vocab import MASK, NUM_RESIDUES, FIRST_RESIDUE_ID, pad_batch, tokenize_pair, tokenize_single

MLM_MASK_RATE = 0.15
_MASK_AS_MASK, _MASK_AS_RANDOM = 0.8, 0.9  # cumulative 80/10/10 action split


@dataclass(frozen=True)
class TrainingLog:
    rows: tuple[tuple[int, float, float], ...]  # (step, lr, loss)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "lr", "loss"])
            for step, lr, loss in self.rows:
                writer.writerow([step, repr(lr), repr(loss)])

    @property
    def final_loss(self) -> float | None:
        return self.rows[-1][2] if self.rows else None


def loss_and_grad(
    model: PairEncoder,
    tokens: torch.Tensor,
    labels: torch.Tensor,
    pos_weight: float | None = None,
) -> tuple[float, dict[str, torch.Tensor]]:
    """Mean binary cross-entropy on pair logits plus fresh gradients."""
    model.zero_grad(set_to_none=True)
    logits = model(tokens)
    weight = None
    if pos_weight is not None:
        weight = torch.tensor(pos_weight, dtype=logits.dtype)
    loss = F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype), pos_weight=weight)
    loss.backward()
    grads = {
        n: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p))
        for n, p in model.named_parameters()
    }
    return float(loss.detach()), grads


def build_pair_prompts(dataset: Dataset, pairs: list[LabeledPair] | tuple[LabeledPair, ...],
                       max_len: int) -> list[np.ndarray]:
    return [
        tokenize_pair(dataset.antibodies[p.antibody_id], dataset.antigens[p.antigen_id], max_len)
        for p in pairs
    ]


def _epoch_order(n: int, rng: SplitMix64) -> list[int]:
    idx = list(range(n))
    rng.shuffle(idx)
    return idx


def _optimizer_loop(model, batches, cfg: TrainingConfig, step_fn) -> TrainingLog:
    """Shared step loop: schedule, clip, AdamW, log."""
    params = dict(model.named_parameters())
    state = AdamState.for_params(params)
    rows = []
    for step in range(1, cfg.total_steps + 1):
        loss, grads = step_fn(next(batches))
        clip_gradients(grads, cfg.clip_norm)
        lr = lr_at(step, cfg)
        adamw_step(params, grads, state, step, lr, cfg)
        rows.append((step, lr, loss))
    return TrainingLog(rows=tuple(rows))


def _batch_stream(n_items: int, batch_size: int, rng: SplitMix64):
    """Cycle seeded epoch shuffles, yielding index lists of batch_size."""
    epoch = 0
    while True:
        order = _epoch_order(n_items, rng.derive(f"epoch/{epoch}"))
        for start in range(0, n_items, batch_size):
            chunk = order[start : start + batch_size]
            if len(chunk) == batch_size or n_items < batch_size:
                yield chunk
        epoch += 1


def train(
    dataset: Dataset,
    folds: FoldAssignment,
    fold_id: int,
    model_cfg: ModelConfig,
    train_cfg: TrainingConfig,
    init: str = "random",
    pretrained: PairEncoder | None = None,
    dtype: torch.dtype = torch.float32,
) -> tuple[PairEncoder, TrainingLog]:
    """Fine-tune a pair classifier on all folds except ``fold_id``.

    ``init="random"`` draws fresh weights from the training seed;
    ``init="pretrained"`` copies the given encoder and re-initializes only
    the classification head. Runs exactly ``total_steps`` optimizer steps.
    """
    if fold_id < 0 or fold_id >= folds.k:
        raise ConfigError(f"fold_id {fold_id} outside [0, {folds.k})")
    if init == "pretrained":
        if pretrained is None:
            raise ConfigError("init='pretrained' requires pretrained weights")
        model = PairEncoder(model_cfg, dtype=dtype)
        model.load_state_dict(pretrained.state_dict())
        if dtype is not pretrained.dtype:
            model.to(dtype)
        reinit_head(model, train_cfg.seed)
    elif init == "random":
        model = new_model(model_cfg, train_cfg.seed, dtype=dtype)
    else:
        raise ConfigError(f"unknown init {init!r}")

    train_pairs = [
        p for p in dataset.pairs(folds.task) if folds.fold_of[p.pair_id] != fold_id
    ]
    if not train_pairs:
        raise ConfigError(f"empty training partition for fold {fold_id}")
    if train_cfg.total_steps == 0:
        return model, TrainingLog(rows=())

    prompts = build_pair_prompts(dataset, train_pairs, model_cfg.max_input_len)
    labels = np.array([p.label for p in train_pairs], dtype=np.float32)
    rng = SplitMix64(train_cfg.seed).derive("train-shuffle")
    batches = _batch_stream(len(train_pairs), train_cfg.batch_size, rng)

    model.train()

    def step_fn(batch_idx):
        tokens = torch.from_numpy(pad_batch([prompts[i] for i in batch_idx]))
        target = torch.from_numpy(labels[batch_idx])
        return loss_and_grad(model, tokens, target, train_cfg.pos_weight)

    log = _optimizer_loop(model, batches, train_cfg, step_fn)
    model.eval()
    return model, log


def predict(model: PairEncoder, dataset: Dataset, pairs, batch_size: int = 32) -> np.ndarray:
    """Pair scores in [0, 1]; batch composition never changes a score."""
    prompts = build_pair_prompts(dataset, pairs, model.cfg.max_input_len)
    logits = predict_logits(model, prompts, batch_size=batch_size)
    return 1.0 / (1.0 + np.exp(-logits))


# --------------------------------------------------------------------------
# Masked-token pretraining


def mask_prompt(prompt: np.ndarray, rng: SplitMix64,
                rate: float = MLM_MASK_RATE) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """BERT-style corruption of residue positions.

    Selects max(1, round(rate * n_residues)) residue positions; of those 80%
    become MASK, 10% a random residue, 10% stay unchanged. Returns the
    corrupted prompt, selected positions, and target residue indices (0-based
    within the residue vocabulary).
    """
    residue_positions = np.flatnonzero(prompt >= FIRST_RESIDUE_ID)
    n_pick = max(1, round(rate * residue_positions.size))
    picked = residue_positions[rng.sample_indices(residue_positions.size, n_pick)]
    picked.sort()
    corrupted = prompt.copy()
    targets = prompt[picked] - FIRST_RESIDUE_ID
    for pos in picked:
        action = rng.random()
        if action < _MASK_AS_MASK:
            corrupted[pos] = MASK
        elif action < _MASK_AS_RANDOM:
            corrupted[pos] = FIRST_RESIDUE_ID + rng.randrange(NUM_RESIDUES)
    return corrupted, picked, targets


def _mlm_batch_loss(model: PairEncoder, prompts: list[np.ndarray], rng: SplitMix64):
    corrupted, rows, cols, targets = [], [], [], []
    for i, prompt in enumerate(prompts):
        c, picked, tgt = mask_prompt(prompt, rng)
        corrupted.append(c)
        rows.extend([i] * len(picked))
        cols.extend(picked.tolist())
        targets.extend(tgt.tolist())
    tokens = torch.from_numpy(pad_batch(corrupted))
    hidden = model.encode(tokens)
    logits = model.mlm_logits(hidden[rows, cols])
    target_t = torch.tensor(targets, dtype=torch.long)
    return F.cross_entropy(logits, target_t), logits, target_t


def pretrain_mlm(
    corpus: list[tuple[str, str]],
    model_cfg: ModelConfig,
    train_cfg: TrainingConfig,
    dtype: torch.dtype = torch.float32,
) -> tuple[PairEncoder, TrainingLog]:
    """Masked-token pretraining over (kind, sequence) items, kind in hc/lc/ag.

    With total_steps = 0 the seeded random initialization is returned
    unchanged. The classification head is untouched here; fine-tuning
    replaces it anyway.
    """
    if not corpus:
        raise ConfigError("pretraining corpus is empty")
    model = new_model(model_cfg, train_cfg.seed, dtype=dtype)
    if train_cfg.total_steps == 0:
        return model, TrainingLog(rows=())
    prompts = [tokenize_single(kind, seq, model_cfg.max_input_len) for kind, seq in corpus]
    shuffle_rng = SplitMix64(train_cfg.seed).derive("mlm-shuffle")
    mask_root = SplitMix64(train_cfg.seed).derive("mlm-mask")
    batches = _batch_stream(len(prompts), train_cfg.batch_size, shuffle_rng)
    model.train()

    step_counter = {"n": 0}

    def step_fn(batch_idx):
        step_counter["n"] += 1
        rng = mask_root.derive(f"step/{step_counter['n']}")
        model.zero_grad(set_to_none=True)
        loss, _, _ = _mlm_batch_loss(model, [prompts[i] for i in batch_idx], rng)
        loss.backward()
        grads = {
            n: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p))
            for n, p in model.named_parameters()
        }
        return float(loss.detach()), grads

    log = _optimizer_loop(model, batches, train_cfg, step_fn)
    model.eval()
    return model, log


def mlm_accuracy(model: PairEncoder, corpus: list[tuple[str, str]], seed: int,
                 batch_size: int = 16) -> float:
    """Masked-position argmax accuracy under a fixed masking seed."""
    prompts = [tokenize_single(kind, seq, model.cfg.max_input_len) for kind, seq in corpus]
    rng = SplitMix64(seed).derive("mlm-eval")
    correct = 0
    total = 0
    model.eval()
    with torch.no_grad():
        for start in range(0, len(prompts), batch_size):
            chunk = prompts[start : start + batch_size]
            _, logits, targets = _mlm_batch_loss(model, chunk, rng)
            correct += int((logits.argmax(dim=-1) == targets).sum())
            total += targets.shape[0]
    return correct / total if total else 0.0
