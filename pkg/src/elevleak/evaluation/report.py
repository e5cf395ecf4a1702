"""CSV / JSON / SVG serialization of experiment reports.

All writers are byte-deterministic: no timestamps, sorted JSON keys and
fixed float formatting.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
from pathlib import Path

from .experiment import ThreatModelReport
from .metrics import SCORES

CSV_COLUMNS = ("unit", "fold", "n_train", "n_test", "dropped", "leakage") + SCORES
OVERLAP_NOTE = "derived samples are contiguous sub-windows of a same-class source route (stand-in construction)"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_plain)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def report_rows(report: ThreatModelReport) -> list[dict]:
    """One row per fold, a ``mean`` row per unit and, for several units, an overall row."""
    rows = []
    for unit in report.units:
        for f in unit.folds:
            rows.append({"unit": unit.name, "fold": str(f.fold), "n_train": str(f.n_train),
                         "n_test": str(f.n_test), "dropped": str(f.dropped), "leakage": str(f.leakage),
                         **{k: _fmt(v) for k, v in f.metrics.scores().items()}})
        rows.append({"unit": unit.name, "fold": "mean",
                     "n_train": "", "n_test": str(sum(f.n_test for f in unit.folds)),
                     "dropped": str(sum(f.dropped for f in unit.folds)),
                     "leakage": str(sum(f.leakage for f in unit.folds)),
                     **{k: _fmt(v) for k, v in unit.aggregate.items()}})
    if len(report.units) > 1:
        rows.append({"unit": "all", "fold": "mean", "n_train": "", "n_test": "", "dropped": "", "leakage": "",
                     **{k: _fmt(v) for k, v in report.aggregate.items()}})
    return rows


def report_csv(report: ThreatModelReport) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(report_rows(report))
    return buf.getvalue()


def report_document(report: ThreatModelReport, config: dict | None = None) -> dict:
    doc = {
        "format": "elevleak-report",
        "version": 1,
        "threat_model": report.threat_model,
        "representation": report.representation,
        "model": {"family": report.model.family, "params": report.model.params},
        "protocol": dataclasses.asdict(report.protocol),
        "text": dataclasses.asdict(report.text) if report.text else None,
        "palette": dataclasses.asdict(report.palette) if report.palette else None,
        "seed": report.seed,
        "dataset_hash": report.dataset_hash,
        "config": config,
        "config_hash": config_hash(config) if config is not None else None,
        "units": [
            {"name": u.name, "classes": list(u.classes), "per_class": u.per_class,
             "aggregate": u.aggregate,
             "folds": [{"fold": f.fold, "n_train": f.n_train, "n_test": f.n_test, "dropped": f.dropped,
                        "leakage": f.leakage, **f.metrics.to_json()} for f in u.folds]}
            for u in report.units],
        "aggregate": report.aggregate,
    }
    if report.protocol.overlap_ratio:
        doc["overlap_construction"] = OVERLAP_NOTE
    return doc


def report_json(report: ThreatModelReport, config: dict | None = None) -> str:
    return json.dumps(report_document(report, config), sort_keys=True, indent=2, default=_plain) + "\n"


_SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def accuracy_svg(report: ThreatModelReport, width: int = 480, height: int = 260) -> str:
    """Line chart of per-fold accuracy, one series per unit."""
    left, right, top, bottom = 48, 16, 28, 36
    pw, ph = width - left - right, height - top - bottom
    n = max(len(u.folds) for u in report.units)

    def x(i):
        return left + (pw * i / (n - 1) if n > 1 else pw / 2)

    def y(v):
        return top + ph * (1.0 - v)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left}" y="16">{report.threat_model} {report.model.family} ({report.representation}): '
           f'accuracy per fold</text>']
    for tick in range(6):
        v = tick / 5
        out.append(f'<line x1="{left}" y1="{y(v):.1f}" x2="{left + pw}" y2="{y(v):.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y(v) + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    for i in range(n):
        out.append(f'<text x="{x(i):.1f}" y="{top + ph + 16}" text-anchor="middle">{i}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 4}" text-anchor="middle">fold</text>')
    for s, unit in enumerate(report.units):
        color = _SERIES_COLORS[s % len(_SERIES_COLORS)]
        pts = " ".join(f"{x(i):.1f},{y(f.metrics.accuracy):.1f}" for i, f in enumerate(unit.folds))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for i, f in enumerate(unit.folds):
            out.append(f'<circle cx="{x(i):.1f}" cy="{y(f.metrics.accuracy):.1f}" r="2.5" fill="{color}"/>')
        if len(report.units) > 1:
            out.append(f'<text x="{left + pw - 4}" y="{top + 12 + 12 * s}" text-anchor="end" '
                       f'fill="{color}">{unit.name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_reports(report: ThreatModelReport, out_dir, config: dict | None = None, stem: str = "report",
                  svg: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.csv", out / f"{stem}.json"]
    paths[0].write_text(report_csv(report))
    paths[1].write_text(report_json(report, config))
    if svg:
        paths.append(out / f"{stem}.svg")
        paths[2].write_text(accuracy_svg(report))
    return paths
