"""Machine-readable report files.

Everything needed to regenerate the evaluation figures (ROC curves,
error boxplots, detection-time histograms, log-likelihood tables,
confidence scatter) with any plotting tool, emitted as plain CSV plus
one ``metrics.json`` with the headline numbers.
"""

from __future__ import annotations

import os

import numpy as np
import pandas as pd

from .storage import save_json

ROC_COLUMNS = ["classifier", "threshold", "fpr", "tpr"]
ERRORS_COLUMNS = ["strategy", "dim", "t", "median", "q1", "q3"]
TAU_COLUMNS = ["classifier", "maneuver", "metric", "bin_lo", "bin_hi", "count"]
LOGLIK_COLUMNS = ["classifier", "strategy", "loglik_x", "loglik_x_norm_pct",
                  "loglik_y", "loglik_y_norm_pct"]
CONFIDENCE_COLUMNS = ["situation_id", "t_rec", "label", "conf_y", "err_y_t5",
                      "conf_x", "err_x_t5"]

TAU_BINS = np.arange(0.0, 5.5, 0.5)


def _write(frame: pd.DataFrame, columns: list[str], path: str) -> None:
    if frame is None or len(frame) == 0:
        frame = pd.DataFrame(columns=columns)
    frame.to_csv(path, index=False, columns=columns)


def emit_report(bundle: dict, directory: str) -> list[str]:
    """Write all report files; any missing bundle section produces a
    header-only file.  Returns the written paths."""
    os.makedirs(directory, exist_ok=True)
    written = []

    roc = bundle.get("roc", {})
    for maneuver in ("LCL", "FLW", "LCR"):
        rows = []
        for entry in roc.get(maneuver, []):
            rows.append(pd.DataFrame({
                "classifier": entry["classifier"],
                "threshold": entry["thresholds"],
                "fpr": entry["fpr"],
                "tpr": entry["tpr"],
            }))
        path = os.path.join(directory, f"roc_{maneuver}.csv")
        _write(pd.concat(rows, ignore_index=True) if rows else None, ROC_COLUMNS, path)
        written.append(path)

    rows = []
    for entry in bundle.get("errors_by_t", []):
        rows.append(pd.DataFrame({
            "strategy": entry["strategy"],
            "dim": entry["dim"],
            "t": entry["t"],
            "median": entry["median"],
            "q1": entry["q1"],
            "q3": entry["q3"],
        }))
    path = os.path.join(directory, "errors_by_t.csv")
    _write(pd.concat(rows, ignore_index=True) if rows else None, ERRORS_COLUMNS, path)
    written.append(path)

    rows = []
    for entry in bundle.get("tau", []):
        counts, _ = np.histogram(entry["values"], bins=TAU_BINS)
        rows.append(pd.DataFrame({
            "classifier": entry["classifier"],
            "maneuver": entry["maneuver"],
            "metric": entry["metric"],
            "bin_lo": TAU_BINS[:-1],
            "bin_hi": TAU_BINS[1:],
            "count": counts,
        }))
    path = os.path.join(directory, "tau_hist.csv")
    _write(pd.concat(rows, ignore_index=True) if rows else None, TAU_COLUMNS, path)
    written.append(path)

    loglik = bundle.get("loglik", [])
    path = os.path.join(directory, "loglik_table.csv")
    _write(pd.DataFrame(loglik) if loglik else None, LOGLIK_COLUMNS, path)
    written.append(path)

    conf = bundle.get("confidence", [])
    path = os.path.join(directory, "confidence_scatter.csv")
    _write(pd.DataFrame(conf) if conf else None, CONFIDENCE_COLUMNS, path)
    written.append(path)

    path = os.path.join(directory, "metrics.json")
    save_json(bundle.get("metrics", {}), path)
    written.append(path)
    return written
