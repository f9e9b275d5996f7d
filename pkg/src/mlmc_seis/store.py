"""File formats of the run store.

Seismograms and datasets use a columnar text format (header
``t, ux_r1, uz_r1, ...``, one row per time step, full-precision floats);
datasets carry a key = value metadata sidecar.  Sample pools are
line-delimited JSON records, append-only, one file per (study, tolerance).
Calibrations, plans, and study reports are JSON documents.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from mlmc_seis.data import DataSet

if TYPE_CHECKING:
    from mlmc_seis.estimators import CorrectionSample, SamplePool
    from mlmc_seis.solver import Seismogram


def _fmt(x: float) -> str:
    return repr(float(x))


def write_seismogram_table(path: Path, times: np.ndarray, values: np.ndarray) -> None:
    """values has shape (n_receivers, 2, n_times)."""
    n_rec = values.shape[0]
    header = "t, " + ", ".join(f"ux_r{r + 1}, uz_r{r + 1}" for r in range(n_rec))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for k, t in enumerate(times):
            row = [_fmt(t)]
            for r in range(n_rec):
                row.append(_fmt(values[r, 0, k]))
                row.append(_fmt(values[r, 1, k]))
            fh.write(", ".join(row) + "\n")


def read_seismogram_table(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        header = fh.readline()
        n_rec = (len(header.split(",")) - 1) // 2
        raw = np.loadtxt(fh, delimiter=",")
    raw = np.atleast_2d(raw)
    times = raw[:, 0]
    values = np.empty((n_rec, 2, raw.shape[0]))
    for r in range(n_rec):
        values[r, 0] = raw[:, 1 + 2 * r]
        values[r, 1] = raw[:, 2 + 2 * r]
    return times, values


def write_seismograms(path: Path, seismograms: "list[Seismogram]") -> None:
    values = np.stack([np.stack([s.ux, s.uz]) for s in seismograms])
    write_seismogram_table(path, seismograms[0].times, values)


def write_dataset(path: Path, ds: DataSet) -> None:
    write_seismogram_table(path, ds.times, ds.values)
    with open(str(path) + ".meta", "w") as fh:
        for k, v in ds.meta.items():
            fh.write(f"{k} = {v}\n")


def read_dataset(path: Path) -> DataSet:
    times, values = read_seismogram_table(path)
    meta = {}
    with open(str(path) + ".meta") as fh:
        for line in fh:
            if " = " in line:
                k, v = line.rstrip("\n").split(" = ", 1)
                meta[k] = v
    rate = float(meta["rate"])
    sigma = float(meta["sigma"])
    horizon = times[-1]
    return DataSet(rate=rate, horizon=round(horizon * rate) / rate,
                   values=values, sigma=sigma, meta=meta)


def append_pool_records(path: Path, records: "Iterable[CorrectionSample]",
                        qoi_kind: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        for rec in records:
            fh.write(json.dumps({
                "qoi_kind": qoi_kind,
                "level": rec.level,
                "index": rec.index,
                "seed": rec.seed,
                "fine": rec.fine,
                "coarse": rec.coarse,
                "work_s": rec.work_s,
                "timestamp": rec.timestamp,
            }) + "\n")
        fh.flush()


def load_pool(path: Path, provenance: dict | None = None) -> "SamplePool":
    from mlmc_seis.estimators import CorrectionSample, SamplePool

    pool = SamplePool(provenance=provenance or {})
    if not path.exists():
        return pool
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            pool.add(CorrectionSample(
                level=d["level"], index=d["index"], seed=d["seed"],
                fine=d["fine"], coarse=d["coarse"], work_s=d["work_s"],
                timestamp=d["timestamp"],
            ))
            pool.provenance.setdefault("qoi_kind", d["qoi_kind"])
    return pool


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def save_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_to_jsonable(payload), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_json(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
