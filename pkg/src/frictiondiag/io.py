"""CSV/JSON/JSONL readers and writers for windows, datasets and stage outputs."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import AnomalyStatus, LabeledDataset, RawTelemetry, TelemetryWindow, ValidationError
from .classifier import ProcessedDataset, ProcessedEntry
from .simulator import friction_from_raw


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def write_csv(path, header: Iterable[str], rows: Iterable) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(list(header))
        for r in rows:
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _read_columns(path, required):
    try:
        with open(path, newline="") as fh:
            rd = csv.DictReader(fh)
            missing = [c for c in required if c not in (rd.fieldnames or [])]
            if missing:
                raise ValidationError(f"{path}: missing columns {missing}")
            cols = {c: [] for c in rd.fieldnames}
            for row in rd:
                for c in rd.fieldnames:
                    cols[c].append(row[c])
    except FileNotFoundError as exc:
        raise ValidationError(f"no such file: {path}") from exc
    try:
        return {c: np.array(v, dtype=float) for c, v in cols.items()}
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric value ({exc})") from exc


def write_window_csv(path, window: TelemetryWindow) -> None:
    write_csv(path, ["k", "omega", "f_hat"],
              ((k, float(o), float(f)) for k, (o, f) in enumerate(zip(window.omega, window.f_hat))))


def read_window_csv(path, J: float = 1.0, K_T: float = 1.0) -> TelemetryWindow:
    """Reads ``k,omega,f_hat`` or raw ``t,omega,I[,V]`` telemetry (the latter converted to friction)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if "f_hat" in header:
        cols = _read_columns(path, ["omega", "f_hat"])
        return TelemetryWindow(cols["omega"], cols["f_hat"])
    cols = _read_columns(path, ["t", "omega", "I"])
    V = cols.get("V", np.zeros_like(cols["t"]))
    return friction_from_raw(RawTelemetry(cols["t"], cols["omega"], cols["I"], V, J, K_T))


def window_to_dict(window: TelemetryWindow) -> dict:
    return {"omega": window.omega.tolist(), "f_hat": window.f_hat.tolist()}


def write_dataset_jsonl(path, dataset: LabeledDataset) -> None:
    with open(path, "w") as fh:
        for i, (window, status) in enumerate(dataset.entries):
            rec = {**window_to_dict(window), "status": status.to_vector()}
            if dataset.ground_truth:
                rec["truth"] = dataset.ground_truth[i].to_dict()
            fh.write(json.dumps(rec) + "\n")


def read_dataset_jsonl(path) -> LabeledDataset:
    entries = []
    try:
        with open(path) as fh:
            for n, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    entries.append((TelemetryWindow(rec["omega"], rec["f_hat"]),
                                    AnomalyStatus.from_vector(rec["status"])))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise ValidationError(f"{path}:{n}: malformed record ({exc})") from exc
    except FileNotFoundError as exc:
        raise ValidationError(f"no such file: {path}") from exc
    return LabeledDataset(entries)


def write_processed_jsonl(path, processed: ProcessedDataset) -> None:
    with open(path, "w") as fh:
        for e in processed.entries:
            fh.write(json.dumps(e.to_dict()) + "\n")


def read_processed_jsonl(path) -> ProcessedDataset:
    entries = []
    try:
        with open(path) as fh:
            for n, line in enumerate(fh, start=1):
                if line.strip():
                    try:
                        entries.append(ProcessedEntry.from_dict(json.loads(line)))
                    except (json.JSONDecodeError, KeyError) as exc:
                        raise ValidationError(f"{path}:{n}: malformed record ({exc})") from exc
    except FileNotFoundError as exc:
        raise ValidationError(f"no such file: {path}") from exc
    if not entries:
        raise ValidationError(f"{path}: no records")
    return ProcessedDataset(tuple(entries))
