"""Desk-scale benchmark harness for antibody-antigen activity prediction:
dataset ingestion and binarization, leakage-aware cross-validation splits,
greedy sequence clustering, transformer pair classification with masked-token
pretraining, metric evaluation, subgroup analysis, and breadth-of-protection
scoring."""

__version__ = "0.1.0"
