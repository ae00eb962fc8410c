"""Output files: boundary time series (CSV) and metrics records (NDJSON).

Time-series columns, in this order::

    t, re_fwd_z0, im_fwd_z0, re_fwd_zL, im_fwd_zL, re_bwd_z0, im_bwd_z0, stored

Rows are written for every ``stride``-th step plus the final step, so a run
of ``n`` steps yields ``1 + ceil(n / stride)`` rows. Numbers use ``%.17g`` so
the files round-trip exactly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .config import SimulationConfig, config_to_dict
from .metrics import MetricsReport
from .model import RunRecord
from .solver import SOLVER_NAME

TIMESERIES_COLUMNS = ("t", "re_fwd_z0", "im_fwd_z0", "re_fwd_zL", "im_fwd_zL",
                      "re_bwd_z0", "im_bwd_z0", "stored")


def sample_indices(n_steps: int, stride: int) -> np.ndarray:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


def timeseries_table(record: RunRecord, stride: int = 1) -> np.ndarray:
    idx = sample_indices(record.n_steps, stride)
    return np.column_stack([
        record.times[idx],
        record.forward_in.real[idx], record.forward_in.imag[idx],
        record.forward_out.real[idx], record.forward_out.imag[idx],
        record.backward_out.real[idx], record.backward_out.imag[idx],
        record.stored[idx],
    ])


def write_timeseries(record: RunRecord, path, stride: int = 1) -> Path:
    path = Path(path)
    table = timeseries_table(record, stride)
    try:
        np.savetxt(path, table, delimiter=",", header=",".join(TIMESERIES_COLUMNS), comments="",
                   fmt="%.17g")
    except OSError as err:
        raise OSError(f"cannot write time series to {path}: {err}") from err
    return path


def read_timeseries(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def _clean(value):
    """JSON-safe copy: non-finite floats become null, tuples become lists."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [_clean(value.real), _clean(value.imag)]
    return value


def metrics_record(record: RunRecord, report: MetricsReport, config: SimulationConfig | None,
                   extra: dict | None = None) -> dict:
    obj = {
        "metrics": report.as_dict(),
        "config": config_to_dict(config) if config is not None else None,
        "events": list(record.events),
        "warnings": list(record.warnings),
        "run": {"t_start": float(record.times[0]), "t_end": float(record.times[-1]),
                "dt": record.dt, "steps": record.n_steps, "retrieval_time": record.retrieval_time,
                "mirror_time": record.mirror_time, "channel": record.channel},
        "solver": {"name": SOLVER_NAME, "version": __version__},
    }
    if extra:
        obj.update(extra)
    return _clean(obj)


def dumps_record(obj: dict) -> str:
    return json.dumps(_clean(obj), sort_keys=True, allow_nan=False)


def append_metrics(obj: dict, path) -> Path:
    path = Path(path)
    try:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(dumps_record(obj) + "\n")
    except OSError as err:
        raise OSError(f"cannot write metrics to {path}: {err}") from err
    return path


def write_outputs(record: RunRecord, report: MetricsReport, config: SimulationConfig,
                  directory=None, stem: str | None = None, stride: int | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.ndjson`` (one record) into ``directory``."""
    out = config.output
    directory = Path(directory if directory is not None else out.directory)
    stem = stem or out.stem
    stride = stride or out.stride
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OSError(f"cannot create output directory {directory}: {err}") from err
    csv_path = write_timeseries(record, directory / f"{stem}.csv", stride)
    json_path = directory / f"{stem}.ndjson"
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(dumps_record(metrics_record(record, report, config)) + "\n")
    return csv_path, json_path


def read_metrics(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
