"""Assay dataset schema, ingestion, binarization, and descriptive statistics.

A dataset is a directory with three files:

  * ``antibodies.fasta`` -- two records per antibody, ``>{id}|chain=HC|...``
    carrying the metadata fields and ``>{id}|chain=LC`` for the light chain.
  * ``antigens.fasta``   -- one record per antigen, ``>{id}|subtype=H1|...``.
  * ``assays.csv``       -- header ``antibody_id,antigen_id,assay,raw_value``.

Datasets are immutable after loading and safe for concurrent reads.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DomainError, IntegrityError, ParseError

CANONICAL_RESIDUES = "ACDEFGHIKLMNPQRSTVWY"
SEQUENCE_ALPHABET = frozenset(CANONICAL_RESIDUES + "X")

ELISA_MIN, ELISA_MAX = 0.5, 20.0
ELISA_POSITIVE_ABOVE = 1.0
HAI_MIN, HAI_MAX = 0.005, 20.0
HAI_POSITIVE_BELOW = 10.0

# Soft length expectations (mean, spread); violations warn, never fail.
HEAVY_LEN_EXPECT = (108, 4)
LIGHT_LEN_EXPECT = (122, 8)
ANTIGEN_LEN_EXPECT = (559, 20)
_SOFT_LEN_SIGMAS = 4


class Host(str, Enum):
    HUMAN = "Human"
    MOUSE = "Mouse"


class LightIsotype(str, Enum):
    KAPPA = "kappa"
    LAMBDA = "lambda"


class HeavyIsotype(str, Enum):
    IGA = "IgA"
    IGG = "IgG"


class Epitope(str, Enum):
    CONFORMATIONAL = "conformational"
    OTHER_UNKNOWN = "other_unknown"


class Subtype(str, Enum):
    H1 = "H1"
    H2 = "H2"
    H3 = "H3"
    H5 = "H5"
    H7 = "H7"
    OTHER = "other"


class YearCategory(str, Enum):
    PRE1950 = "pre1950"
    Y2000_2010 = "y2000_2010"
    POST2010 = "post2010"
    OTHER_UNKNOWN = "other_unknown"


class Origin(str, Enum):
    PUBLIC = "public"
    COBRA = "cobra"


class Assay(str, Enum):
    BINDING = "binding"
    HAI = "hai"


def validate_sequence(seq: str, context: str = "sequence") -> str:
    """Check residues against the 20 canonical letters plus 'X'."""
    if not seq:
        raise ParseError(f"{context}: empty sequence")
    for pos, ch in enumerate(seq):
        if ch not in SEQUENCE_ALPHABET:
            raise ParseError(f"{context}: invalid residue {ch!r} at position {pos}")
    return seq


def _warn_soft_length(length: int, expect: tuple[int, int], context: str) -> None:
    mean, spread = expect
    if abs(length - mean) > _SOFT_LEN_SIGMAS * spread:
        warnings.warn(
            f"{context}: length {length} far from typical {mean}+-{spread}",
            stacklevel=3,
        )


@dataclass(frozen=True)
class Antibody:
    id: str
    heavy_var: str
    light_var: str
    host: Host
    lc_isotype: LightIsotype
    hc_isotype: HeavyIsotype
    epitope: Epitope

    def __post_init__(self):
        validate_sequence(self.heavy_var, f"antibody {self.id} HC")
        validate_sequence(self.light_var, f"antibody {self.id} LC")
        _warn_soft_length(len(self.heavy_var), HEAVY_LEN_EXPECT, f"antibody {self.id} HC")
        _warn_soft_length(len(self.light_var), LIGHT_LEN_EXPECT, f"antibody {self.id} LC")


@dataclass(frozen=True)
class Antigen:
    id: str
    sequence: str
    subtype: Subtype
    year_category: YearCategory
    origin: Origin

    def __post_init__(self):
        validate_sequence(self.sequence, f"antigen {self.id}")
        _warn_soft_length(len(self.sequence), ANTIGEN_LEN_EXPECT, f"antigen {self.id}")


@dataclass(frozen=True)
class AssayRecord:
    antibody_id: str
    antigen_id: str
    assay: Assay
    raw_value: float

    def __post_init__(self):
        lo, hi = (ELISA_MIN, ELISA_MAX) if self.assay is Assay.BINDING else (HAI_MIN, HAI_MAX)
        if not (lo <= self.raw_value <= hi):
            raise DomainError(
                f"{self.assay.value} value {self.raw_value} outside [{lo}, {hi}] "
                f"for pair ({self.antibody_id}, {self.antigen_id})"
            )


@dataclass(frozen=True)
class LabeledPair:
    antibody_id: str
    antigen_id: str
    task: Assay
    label: bool

    @property
    def pair_id(self) -> str:
        return f"{self.antibody_id}|{self.antigen_id}"


def binarize_elisa(auc_value: float) -> bool:
    """Positive binding iff the AUC-ELISA area is strictly greater than 1."""
    if not (ELISA_MIN <= auc_value <= ELISA_MAX):
        raise DomainError(f"ELISA value {auc_value} outside [{ELISA_MIN}, {ELISA_MAX}]")
    return auc_value > ELISA_POSITIVE_ABOVE


def binarize_hai(concentration: float) -> bool:
    """Positive HAI iff the inhibiting concentration is strictly below 10 ug/mL."""
    if not (HAI_MIN <= concentration <= HAI_MAX):
        raise DomainError(f"HAI value {concentration} outside [{HAI_MIN}, {HAI_MAX}]")
    return concentration < HAI_POSITIVE_BELOW


def binarize(record: AssayRecord) -> LabeledPair:
    if record.assay is Assay.BINDING:
        label = binarize_elisa(record.raw_value)
    else:
        label = binarize_hai(record.raw_value)
    return LabeledPair(record.antibody_id, record.antigen_id, record.assay, label)


@dataclass(frozen=True)
class Dataset:
    """Validated, immutable assay dataset."""

    antibodies: dict[str, Antibody]
    antigens: dict[str, Antigen]
    records: tuple[AssayRecord, ...]
    pairs_by_task: dict[Assay, tuple[LabeledPair, ...]] = field(init=False)

    def __post_init__(self):
        seen: set[tuple[str, str, Assay]] = set()
        by_task: dict[Assay, list[LabeledPair]] = {a: [] for a in Assay}
        for rec in self.records:
            if rec.antibody_id not in self.antibodies:
                raise IntegrityError(f"pair references unknown antibody id {rec.antibody_id!r}")
            if rec.antigen_id not in self.antigens:
                raise IntegrityError(f"pair references unknown antigen id {rec.antigen_id!r}")
            key = (rec.antibody_id, rec.antigen_id, rec.assay)
            if key in seen:
                raise IntegrityError(f"duplicate assay triple {key}")
            seen.add(key)
            by_task[rec.assay].append(binarize(rec))
        object.__setattr__(
            self, "pairs_by_task", {a: tuple(pairs) for a, pairs in by_task.items()}
        )

    def pairs(self, task: Assay) -> tuple[LabeledPair, ...]:
        return self.pairs_by_task[task]

    def positivity(self, task: Assay) -> float:
        pairs = self.pairs(task)
        if not pairs:
            raise IntegrityError(f"no pairs for task {task.value}")
        return sum(p.label for p in pairs) / len(pairs)


# --------------------------------------------------------------------------
# FASTA / CSV ingestion


def _parse_fasta(path: Path) -> list[tuple[str, dict[str, str], str]]:
    """Yield (id, metadata, sequence) per record; header is ``>id|k=v|...``."""
    entries: list[tuple[str, dict[str, str], str]] = []
    header: str | None = None
    chunks: list[str] = []

    def flush():
        if header is None:
            return
        fields = header.split("|")
        rec_id = fields[0].strip()
        if not rec_id:
            raise ParseError(f"{path.name}: record with empty id")
        meta: dict[str, str] = {}
        for f in fields[1:]:
            if "=" not in f:
                raise ParseError(f"{path.name}: bad metadata field {f!r} in record {rec_id!r}")
            k, v = f.split("=", 1)
            meta[k.strip()] = v.strip()
        entries.append((rec_id, meta, "".join(chunks)))

    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                flush()
                header = line[1:]
                chunks = []
            elif header is None:
                raise ParseError(f"{path.name}: sequence data before first header")
            else:
                chunks.append(line)
    flush()
    return entries


def _require_meta(meta: dict[str, str], key: str, context: str) -> str:
    if key not in meta:
        raise ParseError(f"{context}: missing metadata field {key!r}")
    return meta[key]


def _parse_enum(enum_cls, raw: str, context: str):
    for member in enum_cls:
        if member.value == raw:
            return member
    allowed = ", ".join(m.value for m in enum_cls)
    raise ParseError(f"{context}: {raw!r} not one of {{{allowed}}}")


def _load_antibodies(path: Path) -> dict[str, Antibody]:
    heavy: dict[str, tuple[dict[str, str], str]] = {}
    light: dict[str, str] = {}
    for rec_id, meta, seq in _parse_fasta(path):
        chain = _require_meta(meta, "chain", f"{path.name} record {rec_id!r}")
        if chain == "HC":
            if rec_id in heavy:
                raise ParseError(f"{path.name}: duplicate HC record for {rec_id!r}")
            heavy[rec_id] = (meta, seq)
        elif chain == "LC":
            if rec_id in light:
                raise ParseError(f"{path.name}: duplicate LC record for {rec_id!r}")
            light[rec_id] = seq
        else:
            raise ParseError(f"{path.name} record {rec_id!r}: chain must be HC or LC")
    missing_lc = set(heavy) - set(light)
    missing_hc = set(light) - set(heavy)
    if missing_lc or missing_hc:
        raise ParseError(
            f"{path.name}: unpaired chains (missing LC for {sorted(missing_lc)}, "
            f"missing HC for {sorted(missing_hc)})"
        )
    antibodies = {}
    for rec_id, (meta, hc_seq) in heavy.items():
        ctx = f"{path.name} record {rec_id!r}"
        antibodies[rec_id] = Antibody(
            id=rec_id,
            heavy_var=validate_sequence(hc_seq, ctx + " HC"),
            light_var=validate_sequence(light[rec_id], ctx + " LC"),
            host=_parse_enum(Host, _require_meta(meta, "host", ctx), ctx),
            lc_isotype=_parse_enum(LightIsotype, _require_meta(meta, "lc_isotype", ctx), ctx),
            hc_isotype=_parse_enum(HeavyIsotype, _require_meta(meta, "hc_isotype", ctx), ctx),
            epitope=_parse_enum(Epitope, _require_meta(meta, "epitope", ctx), ctx),
        )
    return antibodies


def _load_antigens(path: Path) -> dict[str, Antigen]:
    antigens: dict[str, Antigen] = {}
    for rec_id, meta, seq in _parse_fasta(path):
        if rec_id in antigens:
            raise ParseError(f"{path.name}: duplicate antigen id {rec_id!r}")
        ctx = f"{path.name} record {rec_id!r}"
        antigens[rec_id] = Antigen(
            id=rec_id,
            sequence=validate_sequence(seq, ctx),
            subtype=_parse_enum(Subtype, _require_meta(meta, "subtype", ctx), ctx),
            year_category=_parse_enum(YearCategory, _require_meta(meta, "year", ctx), ctx),
            origin=_parse_enum(Origin, _require_meta(meta, "origin", ctx), ctx),
        )
    return antigens


def load_dataset(path: str | Path) -> Dataset:
    """Load and fully validate a dataset directory (csv_plus_fasta format)."""
    root = Path(path)
    ab_path = root / "antibodies.fasta"
    ag_path = root / "antigens.fasta"
    assay_path = root / "assays.csv"
    for p in (ab_path, ag_path, assay_path):
        if not p.exists():
            raise ParseError(f"dataset file missing: {p}")

    antibodies = _load_antibodies(ab_path)
    antigens = _load_antigens(ag_path)

    records: list[AssayRecord] = []
    with open(assay_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = ["antibody_id", "antigen_id", "assay", "raw_value"]
        if reader.fieldnames != expected:
            raise ParseError(f"{assay_path.name}: header must be {','.join(expected)}")
        for row_no, row in enumerate(reader, start=2):
            ctx = f"{assay_path.name} row {row_no}"
            try:
                value = float(row["raw_value"])
            except (TypeError, ValueError):
                raise ParseError(f"{ctx}: raw_value {row['raw_value']!r} is not a number")
            records.append(
                AssayRecord(
                    antibody_id=row["antibody_id"],
                    antigen_id=row["antigen_id"],
                    assay=_parse_enum(Assay, row["assay"], ctx),
                    raw_value=value,
                )
            )
    return Dataset(antibodies=antibodies, antigens=antigens, records=tuple(records))


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Serialize to the same directory layout ``load_dataset`` reads."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "antibodies.fasta", "w", encoding="utf-8") as fh:
        for ab in dataset.antibodies.values():
            fh.write(
                f">{ab.id}|chain=HC|host={ab.host.value}|lc_isotype={ab.lc_isotype.value}"
                f"|hc_isotype={ab.hc_isotype.value}|epitope={ab.epitope.value}\n"
            )
            fh.write(ab.heavy_var + "\n")
            fh.write(f">{ab.id}|chain=LC\n")
            fh.write(ab.light_var + "\n")
    with open(root / "antigens.fasta", "w", encoding="utf-8") as fh:
        for ag in dataset.antigens.values():
            fh.write(
                f">{ag.id}|subtype={ag.subtype.value}|year={ag.year_category.value}"
                f"|origin={ag.origin.value}\n"
            )
            fh.write(ag.sequence + "\n")
    with open(root / "assays.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["antibody_id", "antigen_id", "assay", "raw_value"])
        for rec in dataset.records:
            writer.writerow([rec.antibody_id, rec.antigen_id, rec.assay.value, repr(rec.raw_value)])


# --------------------------------------------------------------------------
# Descriptive statistics

CHARACTERISTICS = ("host", "year_category", "subtype", "lc_isotype", "hc_isotype", "epitope")
_ANTIBODY_FIELDS = {"host", "lc_isotype", "hc_isotype", "epitope"}


@dataclass(frozen=True)
class CategoryRow:
    characteristic: str
    category: str
    count: int
    positives: int

    @property
    def positive_rate(self) -> float:
        return self.positives / self.count if self.count else 0.0


@dataclass(frozen=True)
class SummaryTable:
    task: Assay
    total: int
    total_positives: int
    rows: tuple[CategoryRow, ...]
    p_values: dict[str, float | None]
    antibody_assays_mean_std: tuple[float, float]
    antigen_assays_mean_std: tuple[float, float]

    @property
    def positivity(self) -> float:
        return self.total_positives / self.total


def _mean_std(counts: list[int]) -> tuple[float, float]:
    n = len(counts)
    mean = sum(counts) / n
    if n < 2:
        return mean, 0.0
    var = sum((c - mean) ** 2 for c in counts) / (n - 1)
    return mean, math.sqrt(var)


def summarize(dataset: Dataset, task: Assay) -> SummaryTable:
    """Per-characteristic counts, positive rates, and association p-values.

    The association test is a Pearson chi-square of independence on the
    (category x outcome) contingency table. Degenerate tables (a single
    category, or an outcome class absent) report no p-value.
    """
    from .metrics import chi_square_independence

    pairs = dataset.pairs(task)
    if not pairs:
        raise IntegrityError(f"dataset has no pairs for task {task.value}")

    def characteristic_value(pair: LabeledPair, char: str) -> str:
        if char in _ANTIBODY_FIELDS:
            return getattr(dataset.antibodies[pair.antibody_id], char).value
        return getattr(dataset.antigens[pair.antigen_id], char).value

    rows: list[CategoryRow] = []
    p_values: dict[str, float | None] = {}
    for char in CHARACTERISTICS:
        counts: dict[str, list[int]] = {}
        for pair in pairs:
            cat = characteristic_value(pair, char)
            cell = counts.setdefault(cat, [0, 0])
            cell[0] += 1
            cell[1] += int(pair.label)
        categories = sorted(counts)
        for cat in categories:
            total, pos = counts[cat]
            rows.append(CategoryRow(char, cat, total, pos))
        if len(categories) < 2:
            p_values[char] = None
            continue
        pos_row = [counts[c][1] for c in categories]
        neg_row = [counts[c][0] - counts[c][1] for c in categories]
        if sum(pos_row) == 0 or sum(neg_row) == 0:
            p_values[char] = None
        else:
            p_values[char] = chi_square_independence([pos_row, neg_row])

    ab_counts: dict[str, int] = {}
    ag_counts: dict[str, int] = {}
    for pair in pairs:
        ab_counts[pair.antibody_id] = ab_counts.get(pair.antibody_id, 0) + 1
        ag_counts[pair.antigen_id] = ag_counts.get(pair.antigen_id, 0) + 1

    return SummaryTable(
        task=task,
        total=len(pairs),
        total_positives=sum(p.label for p in pairs),
        rows=tuple(rows),
        p_values=p_values,
        antibody_assays_mean_std=_mean_std(list(ab_counts.values())),
        antigen_assays_mean_std=_mean_std(list(ag_counts.values())),
    )


def summary_to_csv(summary: SummaryTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["characteristic", "category", "n", "positive_n", "positive_rate", "p_value"])
        writer.writerow(["total", "", summary.total, summary.total_positives,
                         f"{summary.positivity:.4f}", ""])
        for row in summary.rows:
            p = summary.p_values.get(row.characteristic)
            writer.writerow([
                row.characteristic, row.category, row.count, row.positives,
                f"{row.positive_rate:.4f}",
                "" if p is None else f"{p:.4g}",
            ])


def summary_to_json(summary: SummaryTable, path: str | Path) -> None:
    payload = {
        "task": summary.task.value,
        "total": summary.total,
        "total_positives": summary.total_positives,
        "positivity": summary.positivity,
        "rows": [
            {
                "characteristic": r.characteristic,
                "category": r.category,
                "n": r.count,
                "positive_n": r.positives,
                "positive_rate": r.positive_rate,
            }
            for r in summary.rows
        ],
        "p_values": summary.p_values,
        "antibody_assays_mean_std": list(summary.antibody_assays_mean_std),
        "antigen_assays_mean_std": list(summary.antigen_assays_mean_std),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
