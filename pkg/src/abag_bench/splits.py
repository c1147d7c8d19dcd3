"""Leakage-aware stratified k-fold construction and validation.

Each strategy maps a pair to a grouping key; a group lives in exactly one
fold. Groups are assigned greedily in descending pair-count order (ties
broken by a seeded shuffle); each group goes to the fold minimizing, in
order,

    1. the fold's post-addition size deviation (realized as smallest
       post-addition total, which keeps sizes within one group of each
       other), then
    2. the fold's post-addition positive-count deviation from the
       rate-implied target for its size, |pos' - rate * total'|.

The greedy pass is sequential and pure in (dataset, config, clusters), so
repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .dataset import Assay, Dataset, LabeledPair
from .errors import ConfigError, InfeasibleSplitError, IntegrityError
from .identity import ClusterAssignment
from .rng import SplitMix64


class SplitStrategy(str, Enum):
    LENIENT = "lenient"
    HA_EXCLUSIVE = "ha_exclusive"
    MAB_EXCLUSIVE = "mab_exclusive"
    MAB_CLUSTER_EXCLUSIVE = "mab_cluster_exclusive"


@dataclass(frozen=True)
class SplitConfig:
    strategy: SplitStrategy
    k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("fold count must be at least 2")


@dataclass(frozen=True)
class FoldAssignment:
    task: Assay
    strategy: SplitStrategy
    k: int
    fold_of: dict[str, int]

    def fold_pairs(self, dataset: Dataset, fold: int) -> list[LabeledPair]:
        return [p for p in dataset.pairs(self.task) if self.fold_of[p.pair_id] == fold]


def group_key(pair: LabeledPair, strategy: SplitStrategy,
              rep_of: dict[str, str] | None) -> str:
    if strategy is SplitStrategy.LENIENT:
        return pair.pair_id
    if strategy is SplitStrategy.HA_EXCLUSIVE:
        return pair.antigen_id
    if strategy is SplitStrategy.MAB_EXCLUSIVE:
        return pair.antibody_id
    assert rep_of is not None
    try:
        return rep_of[pair.antibody_id]
    except KeyError:
        raise IntegrityError(f"antibody {pair.antibody_id!r} missing from cluster assignment")


def make_folds(
    dataset: Dataset,
    task: Assay,
    config: SplitConfig,
    clusters: ClusterAssignment | None = None,
) -> FoldAssignment:
    """Stratified group-exclusive fold assignment for one task."""
    if config.strategy is SplitStrategy.MAB_CLUSTER_EXCLUSIVE and clusters is None:
        raise ConfigError("cluster-exclusive split requires a cluster assignment")
    pairs = dataset.pairs(task)
    if not pairs:
        raise IntegrityError(f"dataset has no pairs for task {task.value}")
    rep_of = clusters.representative_of() if clusters is not None else None

    groups: dict[str, list[LabeledPair]] = {}
    for pair in pairs:
        groups.setdefault(group_key(pair, config.strategy, rep_of), []).append(pair)
    if len(groups) < config.k:
        raise InfeasibleSplitError(
            f"{config.strategy.value}: {len(groups)} groups cannot fill {config.k} folds"
        )

    # Descending pair count; equal-size groups ordered most-label-extreme
    # first (most constrained placements while folds still have slack), with
    # the seeded shuffle breaking remaining ties.
    rate = sum(p.label for p in pairs) / len(pairs)

    def extremeness(key: str) -> float:
        members = groups[key]
        return abs(sum(p.label for p in members) - rate * len(members))

    keys = sorted(groups)
    rng = SplitMix64(config.seed).derive(f"folds/{task.value}/{config.strategy.value}")
    rng.shuffle(keys)
    keys.sort(key=lambda g: (-len(groups[g]), -extremeness(g)))

    # Size balance strictly first: the fold with the smallest post-addition
    # total differs from its share the least while any fold is still below
    # it. Among size ties, minimize the positive-count deviation from the
    # rate-implied target for the fold's new size; the global rate is the
    # stratification target. Lowest index breaks exact ties, keeping the
    # pass exactly reproducible.
    k = config.k
    fold_total = [0] * k
    fold_pos = [0] * k

    fold_of: dict[str, int] = {}
    for key in keys:
        members = groups[key]
        g_tot = len(members)
        g_pos = sum(p.label for p in members)
        best_fold = 0
        best_key = None
        for f in range(k):
            new_total = fold_total[f] + g_tot
            new_pos = fold_pos[f] + g_pos
            score = (new_total, abs(new_pos - rate * new_total), f)
            if best_key is None or score < best_key:
                best_key = score
                best_fold = f
        fold_total[best_fold] += g_tot
        fold_pos[best_fold] += g_pos
        for pair in members:
            fold_of[pair.pair_id] = best_fold
    return FoldAssignment(task=task, strategy=config.strategy, k=k, fold_of=fold_of)


@dataclass(frozen=True)
class FoldStats:
    size: int
    positives: int

    @property
    def positivity(self) -> float:
        return self.positives / self.size if self.size else 0.0


@dataclass(frozen=True)
class ValidationReport:
    strategy: SplitStrategy
    violations: tuple[str, ...]
    fold_stats: tuple[FoldStats, ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def positivity_spread(self) -> float:
        rates = [f.positivity for f in self.fold_stats if f.size]
        return max(rates) - min(rates) if rates else 0.0

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "passed": self.passed,
            "violations": list(self.violations),
            "folds": [
                {"size": f.size, "positives": f.positives, "positivity": f.positivity}
                for f in self.fold_stats
            ],
            "positivity_spread": self.positivity_spread,
        }


def validate_folds(
    dataset: Dataset,
    assignment: FoldAssignment,
    strategy: SplitStrategy | None = None,
    clusters: ClusterAssignment | None = None,
) -> ValidationReport:
    """Leakage and stratification report; never raises on violations."""
    strategy = strategy or assignment.strategy
    pairs = dataset.pairs(assignment.task)
    missing = [p.pair_id for p in pairs if p.pair_id not in assignment.fold_of]
    if missing or len(assignment.fold_of) != len(pairs):
        raise IntegrityError("assignment does not cover the dataset exactly")

    rep_of = clusters.representative_of() if clusters is not None else None
    group_folds: dict[str, set[int]] = {}
    fold_total = [0] * assignment.k
    fold_pos = [0] * assignment.k
    for pair in pairs:
        fold = assignment.fold_of[pair.pair_id]
        fold_total[fold] += 1
        fold_pos[fold] += int(pair.label)
        if strategy is not SplitStrategy.LENIENT:
            group_folds.setdefault(group_key(pair, strategy, rep_of), set()).add(fold)

    violations = tuple(sorted(g for g, folds in group_folds.items() if len(folds) > 1))
    stats = tuple(FoldStats(size=t, positives=p) for t, p in zip(fold_total, fold_pos))
    return ValidationReport(strategy=strategy, violations=violations, fold_stats=stats)


def write_assignment_csv(assignment: FoldAssignment, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "fold"])
        for pair_id in sorted(assignment.fold_of):
            writer.writerow([pair_id, assignment.fold_of[pair_id]])


def write_validation_json(report: ValidationReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
