from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Mapping
from typing import Any, TextIO

import numpy as np

from ..analytics.reprojection import ReprojectionReport

CSV_FIELDS = ["view_id", "rms_full", "rms_skin"]


def json_safe(obj: Any) -> Any:
    """Convert numpy values to builtins and non-finite floats to ``None``."""
    if isinstance(obj, Mapping):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def write_json_report(fp: TextIO, payload: Mapping[str, Any]) -> None:
    json.dump(json_safe(payload), fp, indent=2, sort_keys=True)
    fp.write("\n")


def _fmt(value: float) -> str:
    return f"{value:.6f}" if math.isfinite(value) else ""


def write_csv_reprojection(fp: TextIO, report: ReprojectionReport) -> None:
    """One row per view: ``view_id,rms_full,rms_skin``; undefined RMS values are empty."""
    writer = csv.DictWriter(fp, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for v in report.views:
        writer.writerow(
            {"view_id": v.view_id, "rms_full": _fmt(v.rms_full), "rms_skin": _fmt(v.rms_skin)}
        )


def read_csv_reprojection(fp: TextIO) -> list[dict[str, float]]:
    rows = []
    for row in csv.DictReader(fp):
        rows.append(
            {
                "view_id": int(row["view_id"]),
                "rms_full": float(row["rms_full"]) if row["rms_full"] else float("nan"),
                "rms_skin": float(row["rms_skin"]) if row["rms_skin"] else float("nan"),
            }
        )
    return rows


def summarize_views(summaries: Iterable[Mapping[str, Any]]) -> dict[str, Any]:
    """Median of the per-view map summaries (valid fraction, SNR, HR)."""
    items = list(summaries)
    if not items:
        return {"views": 0}
    out: dict[str, Any] = {"views": len(items)}
    for key in ("valid_fraction", "median_snr_db", "median_hr_bpm"):
        vals = np.array([float(s.get(key, float("nan"))) for s in items])
        vals = vals[np.isfinite(vals)]
        out[key] = float(np.median(vals)) if vals.size else float("nan")
    return out
