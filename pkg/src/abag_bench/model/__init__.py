from .checkpoint import load_checkpoint, save_checkpoint
from .encoder import ModelConfig, PairEncoder, init_parameters, new_model, sinusoidal_positions
from .optim import AdamState, TrainingConfig, adamw_step, clip_gradients, lr_at
from .training import (
    TrainingLog,
    build_pair_prompts,
    loss_and_grad,
    mlm_accuracy,
    pretrain_mlm,
    predict,
    train,
)
from .vocab import Vocabulary, pad_batch, tokenize_pair, tokenize_sequences, tokenize_single

__all__ = [
    "AdamState",
    "ModelConfig",
    "PairEncoder",
    "TrainingConfig",
    "TrainingLog",
    "Vocabulary",
    "adamw_step",
    "build_pair_prompts",
    "clip_gradients",
    "init_parameters",
    "load_checkpoint",
    "loss_and_grad",
    "lr_at",
    "mlm_accuracy",
    "new_model",
    "pad_batch",
    "predict",
    "pretrain_mlm",
    "save_checkpoint",
    "sinusoidal_positions",
    "tokenize_pair",
    "tokenize_sequences",
    "tokenize_single",
    "train",
]
