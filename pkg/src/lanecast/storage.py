"""Bit-exact persistence of datasets, catalogs and model files.

On-disk layout:

* ``dataset.csv``  - one row per sample; bookkeeping columns followed by
  the feature columns named by their catalog ids.
* ``futures.csv``  - sidecar keyed by ``(situation_id, t_rec)`` holding
  the variable-length relative trajectories.
* ``catalog.json`` - the feature descriptors.

All numeric output uses shortest round-trip decimal formatting (the
``repr`` of a Python float); infinities serialize as ``inf``.  Reloading
a saved dataset reproduces every numeric field bit-exactly.
"""

from __future__ import annotations

import json
import os

import numpy as np
import pandas as pd

from .core import Dataset, FeatureDescriptor, ManeuverClass, Situation

BOOK_COLUMNS = [
    "situation_id",
    "t_rec",
    "lane_width",
    "marking_left",
    "marking_right",
    "ttlcl",
    "ttlcr",
    "label",
]

FUTURE_COLUMNS = ["situation_id", "t_rec", "t", "x", "y"]


class StorageError(Exception):
    """Malformed file content; the message names file, row and column."""


def _read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def save_dataset(dataset: Dataset, directory: str) -> None:
    """Write ``dataset.csv``, ``futures.csv`` and ``catalog.json``."""
    os.makedirs(directory, exist_ok=True)
    feature_ids = dataset.feature_ids

    with open(os.path.join(directory, "catalog.json"), "w") as fh:
        json.dump(
            [
                {
                    "id": d.id,
                    "kind": d.kind,
                    "unit": d.unit,
                    "nominal_values": list(d.nominal_values) if d.nominal_values else None,
                }
                for d in dataset.catalog
            ],
            fh,
            indent=1,
        )
        fh.write("\n")

    frames = []
    future_frames = []
    for sit in dataset.situations:
        n = sit.n_samples
        frame = pd.DataFrame(
            {
                "situation_id": np.full(n, sit.situation_id, dtype=np.int64),
                "t_rec": sit.t_rec,
                "lane_width": np.full(n, sit.lane_width),
                "marking_left": sit.marking_left,
                "marking_right": sit.marking_right,
                "ttlcl": sit.ttlcl,
                "ttlcr": sit.ttlcr,
                "label": [ManeuverClass(int(v)).name for v in sit.labels],
            }
        )
        feat = pd.DataFrame(sit.features, columns=feature_ids)
        frames.append(pd.concat([frame, feat], axis=1))
        for i in sorted(sit.futures):
            fut = sit.futures[i]
            future_frames.append(
                pd.DataFrame(
                    {
                        "situation_id": np.full(len(fut), sit.situation_id, dtype=np.int64),
                        "t_rec": np.full(len(fut), sit.t_rec[i]),
                        "t": fut[:, 0],
                        "x": fut[:, 1],
                        "y": fut[:, 2],
                    }
                )
            )

    header = BOOK_COLUMNS + feature_ids
    if frames:
        table = pd.concat(frames, ignore_index=True)
    else:
        table = pd.DataFrame(columns=header)
    table.to_csv(os.path.join(directory, "dataset.csv"), index=False, columns=header)

    if future_frames:
        futures = pd.concat(future_frames, ignore_index=True)
    else:
        futures = pd.DataFrame(columns=FUTURE_COLUMNS)
    futures.to_csv(os.path.join(directory, "futures.csv"), index=False, columns=FUTURE_COLUMNS)


def load_catalog(path: str) -> list[FeatureDescriptor]:
    with open(path) as fh:
        raw = json.load(fh)
    catalog = []
    for entry in raw:
        catalog.append(
            FeatureDescriptor(
                id=entry["id"],
                kind=entry["kind"],
                unit=entry.get("unit", ""),
                nominal_values=tuple(entry["nominal_values"]) if entry.get("nominal_values") else None,
            )
        )
    return catalog


def _check_finite(table: pd.DataFrame, columns: list[str], path: str) -> None:
    """Reject NaN cells; name the first offending data row and column."""
    for col in columns:
        values = table[col].to_numpy()
        bad = np.isnan(values)
        if bad.any():
            row = int(np.argmax(bad))
            raise StorageError(
                f"{os.path.basename(path)}: non-numeric or NaN cell in column "
                f"{col!r} at data row {row + 1}"
            )


def load_dataset(directory: str) -> Dataset:
    """Reload a dataset written by :func:`save_dataset`.

    Raises :class:`StorageError` on malformed headers, feature columns
    not present in the catalog, or non-numeric cells.
    """
    catalog = load_catalog(os.path.join(directory, "catalog.json"))
    feature_ids = [d.id for d in catalog]
    path = os.path.join(directory, "dataset.csv")
    table = _read_csv(path)

    missing = [c for c in BOOK_COLUMNS if c not in table.columns]
    if missing:
        raise StorageError(f"dataset.csv: malformed header, missing columns {missing}")
    extra = [c for c in table.columns if c not in BOOK_COLUMNS and c not in feature_ids]
    if extra:
        raise StorageError(f"dataset.csv: unknown feature ids in header: {extra}")
    absent = [c for c in feature_ids if c not in table.columns]
    if absent:
        raise StorageError(f"dataset.csv: catalog features missing from header: {absent}")

    if len(table):
        numeric = [c for c in BOOK_COLUMNS if c != "label"] + feature_ids
        _check_finite(table, numeric, path)
        try:
            label_codes = table["label"].map(lambda s: ManeuverClass[s].value).to_numpy(np.int8)
        except KeyError as exc:
            raise StorageError(f"dataset.csv: unknown maneuver label {exc}") from None
    else:
        label_codes = np.empty(0, dtype=np.int8)

    futures_path = os.path.join(directory, "futures.csv")
    futures_by_key: dict[tuple[int, float], np.ndarray] = {}
    if os.path.exists(futures_path):
        ftable = _read_csv(futures_path)
        fmissing = [c for c in FUTURE_COLUMNS if c not in ftable.columns]
        if fmissing:
            raise StorageError(f"futures.csv: malformed header, missing columns {fmissing}")
        if len(ftable):
            _check_finite(ftable, ["t_rec", "t", "x", "y"], futures_path)
            fsid = ftable["situation_id"].to_numpy(np.int64)
            ftr = ftable["t_rec"].to_numpy()
            block = ftable[["t", "x", "y"]].to_numpy()
            keys = np.stack([fsid, ftr], axis=1)
            change = np.nonzero(np.any(np.diff(keys, axis=0) != 0, axis=1))[0] + 1
            bounds = np.concatenate([[0], change, [len(keys)]])
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                futures_by_key[(int(fsid[lo]), float(ftr[lo]))] = block[lo:hi].copy()

    situations = []
    if len(table):
        sid_col = table["situation_id"].to_numpy(np.int64)
        feat = table[feature_ids].to_numpy(np.float64)
        t_rec = table["t_rec"].to_numpy(np.float64)
        lane_width = table["lane_width"].to_numpy(np.float64)
        mleft = table["marking_left"].to_numpy(np.float64)
        mright = table["marking_right"].to_numpy(np.float64)
        ttlcl = table["ttlcl"].to_numpy(np.float64)
        ttlcr = table["ttlcr"].to_numpy(np.float64)
        change = np.nonzero(np.diff(sid_col) != 0)[0] + 1
        bounds = np.concatenate([[0], change, [len(sid_col)]])
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sid = int(sid_col[lo])
            sit = Situation(
                situation_id=sid,
                lane_width=float(lane_width[lo]),
                t_rec=t_rec[lo:hi].copy(),
                features=feat[lo:hi].copy(),
                ttlcl=ttlcl[lo:hi].copy(),
                ttlcr=ttlcr[lo:hi].copy(),
                labels=label_codes[lo:hi].copy(),
                marking_left=mleft[lo:hi].copy(),
                marking_right=mright[lo:hi].copy(),
            )
            for i, tr in enumerate(sit.t_rec):
                fut = futures_by_key.get((sid, float(tr)))
                if fut is not None:
                    sit.futures[i] = fut
            situations.append(sit)

    return Dataset(catalog=catalog, situations=situations)


def save_json(obj, path: str) -> None:
    """Deterministic JSON dump with full float precision."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_json(path: str):
    with open(path) as fh:
        return json.load(fh)
