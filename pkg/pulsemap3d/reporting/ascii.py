from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from typing import Any


def sparkline(values: Sequence[float]) -> str:
    # Simple ASCII sparkline using characters: .:-=+*#%; undefined values print as blanks
    if not values:
        return ""
    blocks = ".:-=+*#%"
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return " " * len(values)
    mn = min(finite)
    mx = max(finite)
    span = mx - mn or 1e-9
    chars = []
    for v in values:
        if not math.isfinite(v):
            chars.append(" ")
            continue
        idx = int((v - mn) / span * (len(blocks) - 1))
        chars.append(blocks[idx])
    return "".join(chars)


def _num(value: Any, fmt: str = ".3f") -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return "n/a"
    return format(value, fmt)


def render_summary(subject: str, evaluation: Mapping[str, Any]) -> str:
    """Text summary of one subject's evaluation report."""
    s = []
    title = f"pulsemap3d report: {subject}"
    s.append(title)
    s.append("=" * len(title))
    maps = evaluation.get("maps", {})
    if maps:
        s.append(
            f"Views: {maps.get('views', 0)}  valid={_num(maps.get('valid_fraction'))}  "
            f"SNR={_num(maps.get('median_snr_db'), '.2f')} dB  "
            f"HR={_num(maps.get('median_hr_bpm'), '.1f')} BPM"
        )
    reproj = evaluation.get("reprojection", {})
    if not reproj:
        s.append("No reprojection results.")
    for semantic, rep in sorted(reproj.items()):
        rms = [float("nan") if r is None else float(r) for r in rep.get("rms_full", [])]
        finite = [r for r in rms if math.isfinite(r)]
        mean = sum(finite) / len(finite) if finite else float("nan")
        s.append(f"  {semantic:10s} mean RMS={_num(mean, '.4f')}  {sparkline(rms)}")
    deps = evaluation.get("dependency", {})
    if deps:
        s.append("")
        s.append("Dependency on diffuse-texture error:")
        for semantic, d in sorted(deps.items()):
            flag = "relevant" if d.get("relevant") else "-"
            s.append(f"  {semantic:10s} r={_num(d.get('r'))}  p={_num(d.get('p'), '.4f')}  {flag}")
    illum = evaluation.get("illumination")
    if illum:
        s.append("")
        s.append(
            f"Texture vs ground truth: r={_num(illum.get('baked_r'))}  "
            f"best view r={_num(illum.get('best_view_r'))}"
        )
    return "\n".join(s)
