"""Report serialization: delimited rows, a JSON mirror, and rate figures.

The CSV is the determinism contract: identical configs must reproduce it
byte for byte, so floats are printed through one fixed format and nothing
time- or host-dependent is written.  The JSON carries the same rows plus
config, config digest, library versions, and pass/fail notes.  Runtime is
deliberately not recorded in either file; the command-line runner prints
it to stderr instead.
"""

from __future__ import annotations

import json
import os
import sys

import numpy as np

from .experiments import Report, ReportRow

COLUMNS = ("experiment", "block", "param", "lhs", "lhs_se", "rhs", "rhs_se",
           "fit_c", "slope", "slope_lo", "slope_hi")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return "%.12g" % value


def write_csv(report: Report, path) -> None:
    lines = [",".join(COLUMNS)]
    for row in report.rows:
        lines.append(",".join(_cell(getattr(row, c)) for c in COLUMNS))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(report: Report, path) -> None:
    payload = {
        "experiment": report.experiment,
        "config": report.config,
        "config_sha256": report.config_digest,
        "versions": {
            "python": ".".join(str(v) for v in sys.version_info[:3]),
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
            "gaussibp": __import__("gaussibp").__version__,
        },
        "passed": report.passed,
        "notes": list(report.notes),
        "error": report.error,
        "rows": [{c: getattr(row, c) for c in COLUMNS} for row in report.rows],
    }
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grid_rows(rows):
    """(scale, lhs, lhs_se, rhs) for single-parameter grid rows."""
    out = []
    for r in rows:
        if r.param == "fit" or ";" in r.param or "=" not in r.param:
            continue
        scale = float(r.param.split("=", 1)[1])
        if r.lhs is None or r.lhs <= 0 or scale <= 0:
            continue
        se = r.lhs_se if isinstance(r.lhs_se, float) else 0.0
        out.append((scale, r.lhs, se, r.rhs))
    return out


def render_figures(report: Report, out_dir) -> list:
    """One log-log panel per plottable block; returns the written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    blocks: dict = {}
    for row in report.rows:
        blocks.setdefault(row.block, []).append(row)
    written = []
    for block, rows in blocks.items():
        grid = _grid_rows(rows)
        if len(grid) < 3:
            continue
        scales = np.array([g[0] for g in grid])
        lhs = np.array([g[1] for g in grid])
        ses = np.array([g[2] for g in grid])
        fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=120)
        ax.errorbar(scales, lhs, yerr=2 * ses, fmt="o-", capsize=3,
                    label="measured")
        if all(g[3] is not None for g in grid):
            ax.plot(scales, [g[3] for g in grid], "s--", color="gray",
                    label="reference")
        fit = next((r for r in rows if r.param == "fit" and r.slope is not None),
                   None)
        title = f"{report.experiment} {block}"
        if fit is not None:
            title += f"  slope {fit.slope:.3f}"
            if fit.fit_c is not None and fit.fit_c > 0:
                ax.plot(scales, fit.fit_c * scales ** fit.slope, ":",
                        color="black", label="fit")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(rows[0].param.split("=", 1)[0])
        ax.set_title(title)
        ax.legend(fontsize=8)
        fig.tight_layout()
        name = f"{report.experiment.lower()}_{block}.png".replace(" ", "-")
        path = os.path.join(out_dir, name)
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    return written


def emit(report: Report, out_dir, figures: bool = True) -> list:
    """Write report.csv, report.json, and optionally the figures."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "report.csv")
    json_path = os.path.join(out_dir, "report.json")
    write_csv(report, csv_path)
    write_json(report, json_path)
    out = [csv_path, json_path]
    if figures:
        out.extend(render_figures(report, out_dir))
    return out
