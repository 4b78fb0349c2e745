"""CSV/JSON emission of run reports and the method summary table."""

import csv
import io
import json
import subprocess
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("method", "seed", "error_rate", "epochs", "wall_time_s")
BASELINE = "one_hot"


def git_describe(cwd=None):
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=cwd, capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def reports_to_csv(reports, timing=False):
    """CSV text with one row per report.

    Wall time varies from run to run, so it is left blank unless ``timing``
    is set; with it blank, repeated runs of one config give identical bytes.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([r.method, _fmt(r.seed), _fmt(float(r.error_rate)), _fmt(r.epochs),
                    _fmt(float(r.wall_time_s)) if timing else ""])
    return buf.getvalue()


def write_csv(reports, path, timing=False):
    Path(path).write_text(reports_to_csv(reports, timing))


def write_json(reports, path, provenance=None, extra=None):
    doc = {"provenance": provenance or {}, "reports": [r.to_dict() for r in reports]}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2))


def relative_reduction(baseline, value):
    """Percent error reduction of ``value`` relative to ``baseline``."""
    if baseline == 0:
        return 0.0 if value == 0 else float("-inf")
    return 100.0 * (baseline - value) / baseline


def summarize(reports):
    """``{method: (mean, std, n)}`` over per-seed reports, in first-seen order."""
    per_seed = [r for r in reports if r.seed != "mean"]
    rows = per_seed or list(reports)
    out = {}
    for r in rows:
        out.setdefault(r.method, []).append(r.error_rate)
    return {m: (float(np.mean(v)), float(np.std(v)), len(v)) for m, v in out.items()}


def render_summary(reports):
    """Text table and CSV text: one row per method with mean, std and the
    relative reduction against the one-hot baseline, when present."""
    if not reports:
        raise ValueError("no reports to summarize")
    stats = summarize(reports)
    has_base = BASELINE in stats
    header = ["method", "mean_error", "std"] + (["rel_reduction_pct"] if has_base else [])
    rows = []
    for m, (mean, std, _) in stats.items():
        row = [m, f"{mean:.4f}", f"{std:.4f}"]
        if has_base:
            row.append(f"{relative_reduction(stats[BASELINE][0], mean):.2f}")
        rows.append(row)

    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    if not has_base:
        lines.append(f"note: no {BASELINE} run, relative reduction column omitted")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return "\n".join(lines) + "\n", buf.getvalue()
