"""Report emission: canonical JSON bundle, table-shaped CSVs, and an SVG
radar chart (one axis per task/split cell, one polygon per init mode).

JSON is written canonically (sorted keys, fixed separators) so that emit ->
load -> emit reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .errors import AbagBenchError
from .harness import ReportBundle

FORMATS = ("json", "csv", "svg_radar")


def dump_canonical_json(payload: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, separators=(",", ": "))
        fh.write("\n")


def load_report(path: str | Path) -> ReportBundle:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "abag-bench-report":
        raise AbagBenchError(f"{path}: not an abag-bench report")
    return ReportBundle.from_json(payload)


def _fmt(x, digits: int = 4) -> str:
    if x is None:
        return ""
    return f"{x:.{digits}f}"


def _matrix_csv(bundle: ReportBundle, path: Path) -> None:
    """Table-4-shaped cell summary with a bold-higher flag per comparison."""
    best: dict[tuple[str, str, str], str] = {}
    for metric in ("auroc", "auprc"):
        by_key: dict[tuple[str, str], list] = {}
        for cell in bundle.cells:
            by_key.setdefault((cell.task.value, cell.strategy.value), []).append(cell)
        for (task, strategy), cells in by_key.items():
            agg = {c.init: getattr(c, f"{metric}_agg").mean for c in cells}
            if len(agg) > 1:
                best[(task, strategy, metric)] = max(agg, key=agg.get)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "task", "strategy", "init",
            "auroc_mean", "auroc_std", "auroc_se", "auroc_higher",
            "auprc_mean", "auprc_std", "auprc_se", "auprc_higher",
        ])
        for cell in bundle.cells:
            key = (cell.task.value, cell.strategy.value)
            writer.writerow([
                *key, cell.init,
                _fmt(cell.auroc_agg.mean), _fmt(cell.auroc_agg.std), _fmt(cell.auroc_agg.se),
                int(best.get((*key, "auroc")) == cell.init),
                _fmt(cell.auprc_agg.mean), _fmt(cell.auprc_agg.std), _fmt(cell.auprc_agg.se),
                int(best.get((*key, "auprc")) == cell.init),
            ])


def _breadth_csv(bundle: ReportBundle, path: Path) -> None:
    fields = ["task", "subtype", "split", "init", "n_antibodies", "pearson",
              "p_value", "broad_rate", "auroc"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in bundle.breadth:
            out = dict(row)
            for col in ("pearson", "p_value", "broad_rate", "auroc"):
                out[col] = "" if row.get(col) is None else _fmt(row[col])
            writer.writerow(out)


def _subgroup_csv(bundle: ReportBundle, path: Path) -> None:
    fields = ["task", "strategy", "init", "subgroup", "auroc_mean",
              "folds_used", "folds_skipped"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in bundle.subgroups:
            out = dict(row)
            out["auroc_mean"] = "" if row["auroc_mean"] is None else _fmt(row["auroc_mean"])
            writer.writerow(out)


def _comparisons_csv(bundle: ReportBundle, path: Path) -> None:
    fields = ["task", "strategy", "metric", "p_value", "alternative"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in bundle.comparisons:
            out = dict(row)
            out["p_value"] = _fmt(row["p_value"], 6)
            writer.writerow(out)


_SVG_SIZE = 480
_SVG_RADIUS = 180
_INIT_COLORS = {"pretrained": "#2d6fb4", "random": "#c24a4a"}


def radar_svg(bundle: ReportBundle) -> str:
    """Static spider diagram of mean AUROC per (task, strategy) axis."""
    axes = sorted({(c.task.value, c.strategy.value) for c in bundle.cells})
    if not axes:
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_SIZE}" '
            f'height="{_SVG_SIZE}"><text x="20" y="40">no cells</text></svg>'
        )
    cx = cy = _SVG_SIZE / 2
    n = len(axes)

    def point(axis_idx: int, value: float) -> tuple[float, float]:
        angle = -math.pi / 2 + 2 * math.pi * axis_idx / n
        r = _SVG_RADIUS * max(0.0, min(1.0, value))
        return cx + r * math.cos(angle), cy + r * math.sin(angle)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_SIZE}" height="{_SVG_SIZE}">',
        f'<rect width="{_SVG_SIZE}" height="{_SVG_SIZE}" fill="white"/>',
    ]
    for ring in (0.25, 0.5, 0.75, 1.0):
        ring_pts = " ".join(
            f"{x:.2f},{y:.2f}" for x, y in (point(i, ring) for i in range(n))
        )
        parts.append(
            f'<polygon points="{ring_pts}" fill="none" stroke="#cccccc" stroke-width="1"/>'
        )
    for i, (task, strategy) in enumerate(axes):
        x, y = point(i, 1.0)
        parts.append(
            f'<line x1="{cx:.2f}" y1="{cy:.2f}" x2="{x:.2f}" y2="{y:.2f}" '
            f'stroke="#999999" stroke-width="1"/>'
        )
        lx, ly = point(i, 1.13)
        parts.append(
            f'<text x="{lx:.2f}" y="{ly:.2f}" font-size="10" text-anchor="middle">'
            f"{task}/{strategy}</text>"
        )
    inits = sorted({c.init for c in bundle.cells})
    for init in inits:
        values = {}
        for c in bundle.cells:
            if c.init == init:
                values[(c.task.value, c.strategy.value)] = c.auroc_agg.mean
        pts = []
        for i, axis in enumerate(axes):
            if axis not in values:
                pts = None
                break
            pts.append(point(i, values[axis]))
        if pts is None:
            continue
        color = _INIT_COLORS.get(init, "#444444")
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        parts.append(
            f'<polygon points="{path}" fill="{color}" fill-opacity="0.15" '
            f'stroke="{color}" stroke-width="2"/>'
        )
    for j, init in enumerate(inits):
        color = _INIT_COLORS.get(init, "#444444")
        y = 20 + 16 * j
        parts.append(f'<rect x="16" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="32" y="{y}" font-size="11">{init}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(bundle: ReportBundle, out_dir: str | Path,
                formats=FORMATS) -> list[Path]:
    """Write the requested artifacts, returning the created file paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise AbagBenchError(f"cannot create output directory {out}: {exc}")
    written: list[Path] = []
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise AbagBenchError(f"unknown report formats: {sorted(unknown)}")
    if "json" in formats:
        path = out / "report.json"
        dump_canonical_json(bundle.to_json(), path)
        written.append(path)
    if "csv" in formats:
        for name, writer in (
            ("matrix.csv", _matrix_csv),
            ("breadth.csv", _breadth_csv),
            ("subgroups.csv", _subgroup_csv),
            ("comparisons.csv", _comparisons_csv),
        ):
            path = out / name
            writer(bundle, path)
            written.append(path)
    if "svg_radar" in formats:
        path = out / "radar.svg"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(radar_svg(bundle))
        written.append(path)
    return written
