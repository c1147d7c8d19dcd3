"""Breadth-of-protection aggregation: per-antibody positive-assay rates versus
averaged validation-fold predictions, per HA subtype.

Only antibody-exclusive style splits are accepted: breadth asks how well the
model ranks unseen antibodies, which a lenient or antigen-exclusive split
cannot answer.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

from .dataset import Assay, Dataset, Subtype
from .errors import IntegrityError, ProtocolError
from .metrics import auroc, pearson
from .splits import SplitStrategy

BROAD_THRESHOLD = 0.3
MIN_ASSAYS = 5

_ALLOWED_SPLITS = (SplitStrategy.MAB_EXCLUSIVE, SplitStrategy.MAB_CLUSTER_EXCLUSIVE)


@dataclass(frozen=True)
class BreadthRecord:
    antibody_id: str
    subtype: Subtype
    n_assays: int
    positive_rate: float
    mean_prediction: float


@dataclass(frozen=True)
class BreadthMetrics:
    n_antibodies: int
    pearson_r: float
    pearson_p: float
    broad_rate: float
    auroc: float | None


def compute_breadth(
    dataset: Dataset,
    predictions: dict[str, float],
    task: Assay,
    subtype: Subtype,
    strategy: SplitStrategy,
    min_assays: int = MIN_ASSAYS,
) -> list[BreadthRecord]:
    """One record per antibody with >= min_assays assays in the subtype.

    ``predictions`` maps pair_id to its validation-fold score and must cover
    every pair of the task.
    """
    if strategy not in _ALLOWED_SPLITS:
        raise ProtocolError(
            f"breadth analysis requires an antibody-exclusive split, got {strategy.value}"
        )
    pairs = dataset.pairs(task)
    missing = [p.pair_id for p in pairs if p.pair_id not in predictions]
    if missing:
        raise IntegrityError(
            f"predictions missing for {len(missing)} pairs (first: {missing[0]})"
        )

    per_antibody: dict[str, list[tuple[str, bool, float]]] = {}
    for pair in pairs:
        if dataset.antigens[pair.antigen_id].subtype is not subtype:
            continue
        per_antibody.setdefault(pair.antibody_id, []).append(
            (pair.pair_id, pair.label, predictions[pair.pair_id])
        )

    records = []
    for ab_id in sorted(per_antibody):
        # fixed summation order makes the output exactly order-invariant
        rows = sorted(per_antibody[ab_id])
        if len(rows) < min_assays:
            continue
        n = len(rows)
        records.append(
            BreadthRecord(
                antibody_id=ab_id,
                subtype=subtype,
                n_assays=n,
                positive_rate=sum(label for _, label, _ in rows) / n,
                mean_prediction=sum(score for _, _, score in rows) / n,
            )
        )
    return records


def breadth_metrics(records: list[BreadthRecord],
                    broad_threshold: float = BROAD_THRESHOLD) -> BreadthMetrics:
    """Pearson of mean prediction vs positive rate, and AUROC against the
    broad label (positive rate strictly above the threshold)."""
    if len(records) < 3:
        raise ProtocolError("breadth metrics require at least 3 antibodies")
    scores = [r.mean_prediction for r in records]
    rates = [r.positive_rate for r in records]
    r, p = pearson(scores, rates)
    labels = [rate > broad_threshold for rate in rates]
    broad_rate = sum(labels) / len(labels)
    if all(labels) or not any(labels):
        warnings.warn("breadth AUROC omitted: a single class after thresholding")
        area = None
    else:
        area = auroc(scores, labels)
    return BreadthMetrics(
        n_antibodies=len(records),
        pearson_r=r,
        pearson_p=p,
        broad_rate=broad_rate,
        auroc=area,
    )


def write_breadth_csv(rows: list[dict], path) -> None:
    """Table-3-shaped CSV; each row one (task, subtype, split) analysis."""
    fields = ["task", "subtype", "split", "n_antibodies", "pearson", "p_value",
              "broad_rate", "auroc"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
