"""Experiment orchestration: the task x split x init matrix, subgroup AUROC
tables, breadth tables, and init comparisons.

Fold partitions depend on (task, strategy, seed) only, never on the init
mode, and per-fold training seeds are shared between the two init modes, so
the random-vs-pretrained contrast is genuinely paired. Cell failures are
isolated: a failing cell is recorded with its cause and the rest of the
matrix continues.
"""

from __future__ import annotations

import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .breadth import breadth_metrics, compute_breadth
from .dataset import Assay, Dataset, Subtype
from .errors import AbagBenchError, ConfigError
from .identity import ClusterAssignment
from .metrics import CvAggregate, aggregate_cv, auprc, auroc, one_sided_paired_t_test
from .model import ModelConfig, PairEncoder, TrainingConfig, predict, train
from .rng import SplitMix64
from .splits import FoldAssignment, SplitConfig, SplitStrategy, make_folds, validate_folds

INIT_MODES = ("random", "pretrained")

# Display names for subgroup labels, matching the report figure convention.
CHARACTERISTIC_LABELS = {
    "host": "mAb_host",
    "year_category": "HA_year",
    "subtype": "HA_subtype",
    "lc_isotype": "mAb_LC_ISO",
    "hc_isotype": "mAb_HC_ISO",
    "epitope": "mAb_epitope",
}


@dataclass(frozen=True)
class ExperimentSpec:
    task: Assay
    strategy: SplitStrategy
    init: str
    k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}")

    @property
    def cell_key(self) -> str:
        return f"{self.task.value}/{self.strategy.value}/{self.init}"


def full_matrix(k: int = 5, seed: int = 0,
                tasks=tuple(Assay), strategies=tuple(SplitStrategy),
                inits=INIT_MODES) -> list[ExperimentSpec]:
    return [
        ExperimentSpec(task=t, strategy=s, init=i, k=k, seed=seed)
        for t in tasks
        for s in strategies
        for i in inits
    ]


@dataclass(frozen=True)
class CellResult:
    task: Assay
    strategy: SplitStrategy
    init: str
    seed: int
    k: int
    fold_auroc: tuple[float, ...]
    fold_auprc: tuple[float, ...]
    auroc_agg: CvAggregate
    auprc_agg: CvAggregate
    predictions: dict[str, float]     # pair_id -> validation score
    fold_of: dict[str, int]           # pair_id -> validation fold

    @property
    def cell_key(self) -> str:
        return f"{self.task.value}/{self.strategy.value}/{self.init}"


def fold_training_seed(spec: ExperimentSpec, fold: int) -> int:
    # Shared between init modes on purpose; see module docstring.
    return SplitMix64(spec.seed).derive(
        f"train/{spec.task.value}/{spec.strategy.value}/{fold}"
    ).seed


def run_cell(
    dataset: Dataset,
    spec: ExperimentSpec,
    model_cfg: ModelConfig,
    train_cfg: TrainingConfig,
    clusters: ClusterAssignment | None = None,
    pretrained: PairEncoder | None = None,
) -> CellResult:
    """Train and evaluate all k folds for one matrix cell."""
    folds = make_folds(
        dataset, spec.task,
        SplitConfig(strategy=spec.strategy, k=spec.k, seed=spec.seed),
        clusters,
    )
    report = validate_folds(dataset, folds, clusters=clusters)
    if not report.passed:
        raise AbagBenchError(
            f"fold leakage in {spec.cell_key}: {report.violations[:3]}"
        )
    fold_auroc: list[float] = []
    fold_auprc: list[float] = []
    predictions: dict[str, float] = {}
    for fold in range(spec.k):
        cfg = replace(train_cfg, seed=fold_training_seed(spec, fold))
        model, _ = train(
            dataset, folds, fold, model_cfg, cfg,
            init=spec.init, pretrained=pretrained,
        )
        val_pairs = folds.fold_pairs(dataset, fold)
        scores = predict(model, dataset, val_pairs)
        labels = [p.label for p in val_pairs]
        fold_auroc.append(auroc(scores, labels))
        fold_auprc.append(auprc(scores, labels))
        for pair, score in zip(val_pairs, scores):
            predictions[pair.pair_id] = float(score)
    return CellResult(
        task=spec.task,
        strategy=spec.strategy,
        init=spec.init,
        seed=spec.seed,
        k=spec.k,
        fold_auroc=tuple(fold_auroc),
        fold_auprc=tuple(fold_auprc),
        auroc_agg=aggregate_cv(fold_auroc),
        auprc_agg=aggregate_cv(fold_auprc),
        predictions=predictions,
        fold_of=dict(folds.fold_of),
    )


@dataclass
class ReportBundle:
    seed: int
    cells: list[CellResult]
    failures: list[dict]
    comparisons: list[dict]
    subgroups: list[dict]
    breadth: list[dict]

    def cell(self, task: Assay, strategy: SplitStrategy, init: str) -> CellResult | None:
        for c in self.cells:
            if c.task is task and c.strategy is strategy and c.init == init:
                return c
        return None

    def to_json(self) -> dict:
        return {
            "format": "abag-bench-report",
            "version": 1,
            "seed": self.seed,
            "cells": [
                {
                    "task": c.task.value,
                    "strategy": c.strategy.value,
                    "init": c.init,
                    "seed": c.seed,
                    "k": c.k,
                    "fold_auroc": list(c.fold_auroc),
                    "fold_auprc": list(c.fold_auprc),
                    "auroc": {"mean": c.auroc_agg.mean, "std": c.auroc_agg.std,
                              "se": c.auroc_agg.se},
                    "auprc": {"mean": c.auprc_agg.mean, "std": c.auprc_agg.std,
                              "se": c.auprc_agg.se},
                    "predictions": {k: c.predictions[k] for k in sorted(c.predictions)},
                    "fold_of": {k: c.fold_of[k] for k in sorted(c.fold_of)},
                }
                for c in sorted(self.cells, key=lambda c: c.cell_key)
            ],
            "failures": sorted(self.failures, key=lambda f: f["cell"]),
            "comparisons": self.comparisons,
            "subgroups": self.subgroups,
            "breadth": self.breadth,
        }

    @staticmethod
    def from_json(payload: dict) -> "ReportBundle":
        cells = []
        for c in payload["cells"]:
            fold_auroc = tuple(c["fold_auroc"])
            fold_auprc = tuple(c["fold_auprc"])
            cells.append(
                CellResult(
                    task=Assay(c["task"]),
                    strategy=SplitStrategy(c["strategy"]),
                    init=c["init"],
                    seed=c["seed"],
                    k=c["k"],
                    fold_auroc=fold_auroc,
                    fold_auprc=fold_auprc,
                    auroc_agg=CvAggregate(**c["auroc"]),
                    auprc_agg=CvAggregate(**c["auprc"]),
                    predictions=dict(c["predictions"]),
                    fold_of=dict(c["fold_of"]),
                )
            )
        return ReportBundle(
            seed=payload["seed"],
            cells=cells,
            failures=list(payload["failures"]),
            comparisons=list(payload["comparisons"]),
            subgroups=list(payload["subgroups"]),
            breadth=list(payload["breadth"]),
        )


def subgroup_auroc(dataset: Dataset, cell: CellResult, characteristic: str) -> list[dict]:
    """Per-fold AUROC averaged within each category of one characteristic.

    Fold-subgroups holding a single class are skipped for that fold; the row
    records how many folds contributed.
    """
    from .dataset import CHARACTERISTICS, _ANTIBODY_FIELDS

    if characteristic not in CHARACTERISTICS:
        raise ConfigError(f"unknown characteristic {characteristic!r}")
    label = CHARACTERISTIC_LABELS[characteristic]
    pairs = dataset.pairs(cell.task)

    def category(pair) -> str:
        if characteristic in _ANTIBODY_FIELDS:
            return getattr(dataset.antibodies[pair.antibody_id], characteristic).value
        return getattr(dataset.antigens[pair.antigen_id], characteristic).value

    by_group: dict[str, dict[int, tuple[list[float], list[bool]]]] = {}
    for pair in pairs:
        fold = cell.fold_of[pair.pair_id]
        scores, labels = (
            by_group.setdefault(category(pair), {}).setdefault(fold, ([], []))
        )
        scores.append(cell.predictions[pair.pair_id])
        labels.append(pair.label)

    rows = []
    for group in sorted(by_group):
        per_fold = []
        skipped = 0
        for fold in sorted(by_group[group]):
            scores, labels = by_group[group][fold]
            if all(labels) or not any(labels):
                skipped += 1
                continue
            per_fold.append(auroc(scores, labels))
        rows.append(
            {
                "task": cell.task.value,
                "strategy": cell.strategy.value,
                "init": cell.init,
                "subgroup": f"{label}={group}",
                "auroc_mean": sum(per_fold) / len(per_fold) if per_fold else None,
                "folds_used": len(per_fold),
                "folds_skipped": skipped,
            }
        )
    return rows


def _breadth_rows(dataset: Dataset, cell: CellResult) -> list[dict]:
    split_label = {
        SplitStrategy.MAB_EXCLUSIVE: "exclusive",
        SplitStrategy.MAB_CLUSTER_EXCLUSIVE: "cluster exclusive",
    }[cell.strategy]
    rows = []
    for subtype in (Subtype.H1, Subtype.H3):
        records = compute_breadth(dataset, cell.predictions, cell.task, subtype, cell.strategy)
        if len(records) < 3:
            rows.append({
                "task": cell.task.value, "subtype": subtype.value, "split": split_label,
                "init": cell.init, "n_antibodies": len(records), "pearson": None,
                "p_value": None, "broad_rate": None, "auroc": None,
                "note": "fewer than 3 antibodies after filtering",
            })
            continue
        m = breadth_metrics(records)
        rows.append({
            "task": cell.task.value, "subtype": subtype.value, "split": split_label,
            "init": cell.init, "n_antibodies": m.n_antibodies, "pearson": m.pearson_r,
            "p_value": m.pearson_p, "broad_rate": m.broad_rate, "auroc": m.auroc,
        })
    return rows


def _cell_worker(args):
    dataset, spec, model_cfg, train_cfg, clusters, pretrained, threads = args
    import torch

    torch.set_num_threads(threads)
    return run_cell(dataset, spec, model_cfg, train_cfg, clusters, pretrained)


def run_matrix(
    dataset: Dataset,
    specs: list[ExperimentSpec],
    model_cfg: ModelConfig,
    train_cfg: TrainingConfig,
    clusters_by_task: dict[Assay, ClusterAssignment] | None = None,
    pretrained: PairEncoder | None = None,
    jobs: int = 1,
) -> ReportBundle:
    """Run every cell, then derive comparisons, subgroup and breadth tables."""
    clusters_by_task = clusters_by_task or {}
    cells: list[CellResult] = []
    failures: list[dict] = []

    def cluster_for(spec: ExperimentSpec):
        if spec.strategy is SplitStrategy.MAB_CLUSTER_EXCLUSIVE:
            if spec.task not in clusters_by_task:
                raise ConfigError(f"no cluster assignment supplied for task {spec.task.value}")
            return clusters_by_task[spec.task]
        return None

    def record_failure(spec: ExperimentSpec, exc: Exception):
        failures.append({
            "cell": spec.cell_key,
            "error": f"{type(exc).__name__}: {exc}",
            "traceback": traceback.format_exc(limit=3),
        })

    if jobs <= 1:
        for spec in specs:
            try:
                if spec.init == "pretrained" and pretrained is None:
                    raise ConfigError("pretrained init requested without pretrained weights")
                cells.append(run_cell(dataset, spec, model_cfg, train_cfg,
                                      cluster_for(spec), pretrained))
            except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                record_failure(spec, exc)
    else:
        import os

        threads = max(1, (os.cpu_count() or 2) // jobs)
        pending = []
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for spec in specs:
                try:
                    if spec.init == "pretrained" and pretrained is None:
                        raise ConfigError("pretrained init requested without pretrained weights")
                    args = (dataset, spec, model_cfg, train_cfg, cluster_for(spec),
                            pretrained, threads)
                    pending.append((spec, pool.submit(_cell_worker, args)))
                except Exception as exc:  # noqa: BLE001
                    record_failure(spec, exc)
            for spec, future in pending:
                try:
                    cells.append(future.result())
                except Exception as exc:  # noqa: BLE001
                    record_failure(spec, exc)

    cells.sort(key=lambda c: c.cell_key)

    comparisons: list[dict] = []
    done = set()
    for cell in cells:
        key = (cell.task, cell.strategy)
        if key in done:
            continue
        done.add(key)
        finetuned = next((c for c in cells if (c.task, c.strategy) == key
                          and c.init == "pretrained"), None)
        random_init = next((c for c in cells if (c.task, c.strategy) == key
                            and c.init == "random"), None)
        if finetuned is None or random_init is None:
            continue
        for metric, attr in (("auroc", "fold_auroc"), ("auprc", "fold_auprc")):
            p = one_sided_paired_t_test(getattr(finetuned, attr), getattr(random_init, attr))
            comparisons.append({
                "task": cell.task.value,
                "strategy": cell.strategy.value,
                "metric": metric,
                "p_value": p,
                "alternative": "pretrained > random",
            })

    subgroups: list[dict] = []
    for cell in cells:
        for characteristic in CHARACTERISTIC_LABELS:
            subgroups.extend(subgroup_auroc(dataset, cell, characteristic))

    breadth: list[dict] = []
    for cell in cells:
        if cell.strategy in (SplitStrategy.MAB_EXCLUSIVE, SplitStrategy.MAB_CLUSTER_EXCLUSIVE):
            try:
                breadth.extend(_breadth_rows(dataset, cell))
            except AbagBenchError as exc:
                failures.append({
                    "cell": f"breadth/{cell.cell_key}",
                    "error": f"{type(exc).__name__}: {exc}",
                    "traceback": "",
                })

    seed = specs[0].seed if specs else 0
    return ReportBundle(
        seed=seed,
        cells=cells,
        failures=failures,
        comparisons=comparisons,
        subgroups=subgroups,
        breadth=breadth,
    )
