"""Training schedule and optimizer: linear warmup + cosine decay, global-norm
gradient clipping, and decoupled AdamW with bias correction.

The update for each parameter theta with gradient g at 1-based step t:

    m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g^2
    m_hat = m / (1 - b1^t)        v_hat = v / (1 - b2^t)
    theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)

Weight decay applies to weight matrices only, never to biases or layer-norm
gains, per standard decoupled-AdamW practice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from ..errors import ConfigError

ADAM_EPS = 1e-8


def default_warmup(total_steps: int) -> int:
    # The upstream recipe's 2K warmup exceeds short runs; cap at 10% of total.
    return min(total_steps // 10, 2000)


@dataclass(frozen=True)
class TrainingConfig:
    max_lr: float = 1e-3
    total_steps: int = 1000
    batch_size: int = 8
    warmup_steps: int | None = None
    final_lr_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    clip_norm: float = 1.0
    seed: int = 0
    pos_weight: float | None = None

    def __post_init__(self):
        if self.total_steps < 0 or self.batch_size < 1:
            raise ConfigError("total_steps must be >= 0 and batch_size >= 1")
        warmup = self.resolved_warmup
        if self.total_steps > 0 and warmup >= self.total_steps:
            raise ConfigError(
                f"warmup_steps {warmup} must be below total_steps {self.total_steps}"
            )
        if not (0.0 <= self.final_lr_fraction <= 1.0):
            raise ConfigError("final_lr_fraction must be in [0, 1]")

    @property
    def resolved_warmup(self) -> int:
        return default_warmup(self.total_steps) if self.warmup_steps is None else self.warmup_steps

    def to_dict(self) -> dict:
        return {
            "max_lr": self.max_lr,
            "total_steps": self.total_steps,
            "batch_size": self.batch_size,
            "warmup_steps": self.warmup_steps,
            "final_lr_fraction": self.final_lr_fraction,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "weight_decay": self.weight_decay,
            "clip_norm": self.clip_norm,
            "seed": self.seed,
            "pos_weight": self.pos_weight,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainingConfig":
        return TrainingConfig(**d)


def lr_at(step: int, cfg: TrainingConfig) -> float:
    """Learning rate at a 0-based optimizer step, step in [0, total_steps]."""
    if not 0 <= step <= cfg.total_steps:
        raise ConfigError(f"step {step} outside [0, {cfg.total_steps}]")
    warmup = cfg.resolved_warmup
    if step <= warmup:
        if warmup == 0:
            return cfg.max_lr
        return cfg.max_lr * step / warmup
    progress = (step - warmup) / (cfg.total_steps - warmup)
    f = cfg.final_lr_fraction
    return cfg.max_lr * (f + (1.0 - f) * 0.5 * (1.0 + math.cos(math.pi * progress)))


def global_grad_norm(grads: dict[str, torch.Tensor]) -> float:
    total = 0.0
    for g in grads.values():
        total += float((g.to(torch.float64) ** 2).sum())
    return math.sqrt(total)


def clip_gradients(grads: dict[str, torch.Tensor], clip_norm: float) -> dict[str, torch.Tensor]:
    """Scale all gradients by clip_norm / ||g|| when the global norm exceeds it."""
    norm = global_grad_norm(grads)
    if norm > clip_norm and norm > 0.0:
        scale = clip_norm / norm
        for g in grads.values():
            g.mul_(scale)
    return grads


def decay_applies(name: str) -> bool:
    return not (name.endswith(".bias") or "norm" in name)


@dataclass
class AdamState:
    m: dict[str, torch.Tensor] = field(default_factory=dict)
    v: dict[str, torch.Tensor] = field(default_factory=dict)

    @staticmethod
    def for_params(params: dict[str, torch.Tensor]) -> "AdamState":
        return AdamState(
            m={n: torch.zeros_like(p) for n, p in params.items()},
            v={n: torch.zeros_like(p) for n, p in params.items()},
        )


def adamw_step(
    params: dict[str, torch.Tensor],
    grads: dict[str, torch.Tensor],
    state: AdamState,
    step: int,
    lr: float,
    cfg: TrainingConfig,
) -> None:
    """One in-place decoupled AdamW update; ``step`` is 1-based."""
    if step < 1:
        raise ConfigError("adamw_step expects a 1-based step")
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1**step
    bc2 = 1.0 - b2**step
    with torch.no_grad():
        for name, p in params.items():
            g = grads[name]
            m = state.m[name]
            v = state.v[name]
            m.mul_(b1).add_(g, alpha=1.0 - b1)
            v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
            m_hat = m / bc1
            v_hat = v / bc2
            update = m_hat / (v_hat.sqrt() + ADAM_EPS)
            if cfg.weight_decay != 0.0 and decay_applies(name):
                update = update + cfg.weight_decay * p
            p.add_(update, alpha=-lr)
