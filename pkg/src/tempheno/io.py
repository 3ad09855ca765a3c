"""File formats: event datasets (CSV/JSONL), model files, pathway files,
run reports, dataset digests and phenotype rendering (text grid + SVG).

Feature rows are ordered by lexicographic sort of their names so phenotype
row indices stay stable across files. Durations are declared (CSV sidecar
``<stem>.durations.csv`` or the JSONL header line), never inferred from the
last event, so trailing empty days survive a round-trip; a loader fallback
infers max(time)+1 only when no declaration exists at all.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CorruptFile,
    ParseError,
    TimeOutOfRange,
    UnknownFeature,
    VersionMismatch,
)
from .tensor import HyperParams, IrregularTensor, PhenotypeTensor

FORMAT_VERSION = 1


@dataclass(frozen=True)
class EventRecord:
    """One (individual, feature, day) occurrence."""

    individual_id: str
    feature: str
    time: int


@dataclass
class ModelFile:
    """Persisted phenotypes with their hyperparameters and provenance."""

    phenotypes: PhenotypeTensor
    hyperparameters: HyperParams
    provenance: dict = field(default_factory=dict)


@dataclass
class RunReport:
    """Machine-readable record of one command run.

    ``results`` holds the numeric outcomes (FIT values etc.) and is fully
    determined by flags + seed; ``wall_seconds`` is the only field expected
    to vary between identical runs.
    """

    command: str
    config: dict
    results: dict
    loss_history: list = field(default_factory=list)
    wall_seconds: float = 0.0
    dataset_digest: str | None = None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "loss_history": self.loss_history,
            "wall_seconds": self.wall_seconds,
            "dataset_digest": self.dataset_digest,
        }


# --- event datasets ---------------------------------------------------------

def durations_sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".durations.csv")


def _read_durations_csv(path) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["individual_id", "duration"]:
            raise ParseError(1, f"bad durations header in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ParseError(lineno, "expected individual_id,duration")
            ident = row[0].strip()
            try:
                duration = int(row[1])
            except ValueError:
                raise ParseError(lineno, f"duration {row[1]!r} is not an integer") from None
            if duration < 1:
                raise ParseError(lineno, f"duration must be >= 1, got {duration}")
            if ident in out:
                raise ParseError(lineno, f"duplicate individual {ident!r}")
            out[ident] = duration
    return out


def _parse_time(raw, lineno: int) -> int:
    try:
        time = int(raw)
    except (TypeError, ValueError):
        raise ParseError(lineno, f"time {raw!r} is not an integer") from None
    return time


def _records_from_csv(path) -> tuple[list[tuple[int, EventRecord]], dict[str, int] | None]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(1, "empty file")
        names = [h.strip() for h in header]
        try:
            cols = (names.index("individual_id"), names.index("feature"), names.index("time"))
        except ValueError:
            raise ParseError(1, f"header must name individual_id, feature, time; got {names}") from None
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) <= max(cols):
                raise ParseError(lineno, f"expected {len(names)} columns, got {len(row)}")
            rec = EventRecord(
                individual_id=row[cols[0]].strip(),
                feature=row[cols[1]].strip(),
                time=_parse_time(row[cols[2]].strip(), lineno),
            )
            records.append((lineno, rec))
    sidecar = durations_sidecar_path(path)
    durations = _read_durations_csv(sidecar) if sidecar.exists() else None
    return records, durations


def _records_from_jsonl(path) -> tuple[list[tuple[int, EventRecord]], dict[str, int], list[str] | None]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(1, "empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(1, f"bad JSON header: {exc}") from None
    if not isinstance(header, dict) or "durations" not in header:
        raise ParseError(1, "header line must declare durations")
    durations = {str(k): int(v) for k, v in header["durations"].items()}
    features = header.get("features")
    if features is not None:
        features = [str(f) for f in features]
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"bad JSON: {exc}") from None
        try:
            rec = EventRecord(
                individual_id=str(obj["individual_id"]),
                feature=str(obj["feature"]),
                time=_parse_time(obj["time"], lineno),
            )
        except KeyError as exc:
            raise ParseError(lineno, f"missing field {exc}") from None
        records.append((lineno, rec))
    return records, durations, features


def load_events(path, format: str | None = None, durations=None, features=None) -> IrregularTensor:
    """Load an event dataset into an IrregularTensor.

    CSV needs columns individual_id,feature,time with durations from the
    sidecar (or the ``durations`` argument: a mapping or a CSV path); JSONL
    starts with a header line declaring durations and, optionally, the
    feature universe. A ``features`` whitelist (or the JSONL header's list)
    turns unknown features into errors; otherwise the universe is whatever
    the file mentions. Missing cells are 0.
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix == ".jsonl" else "csv"
    if format not in ("csv", "jsonl"):
        raise ValueError(f"format must be 'csv' or 'jsonl', got {format!r}")

    declared_features = list(features) if features is not None else None
    if format == "csv":
        records, sidecar_durations = _records_from_csv(path)
        if durations is None:
            durations = sidecar_durations
        elif not isinstance(durations, dict):
            durations = _read_durations_csv(durations)
    else:
        records, durations_jsonl, header_features = _records_from_jsonl(path)
        durations = durations_jsonl
        if declared_features is None:
            declared_features = header_features

    if durations is None:
        # Fallback for bare CSV files: infer from the last event per individual.
        durations = {}
        for _, rec in records:
            durations[rec.individual_id] = max(durations.get(rec.individual_id, 0), rec.time + 1)

    ids = list(durations.keys())
    id_index = {ident: k for k, ident in enumerate(ids)}
    if declared_features is not None:
        feature_set = set(declared_features)
        names = sorted(feature_set)
    else:
        names = sorted({rec.feature for _, rec in records})
        feature_set = None
    feature_index = {name: i for i, name in enumerate(names)}

    matrices = [np.zeros((len(names), durations[ident])) for ident in ids]
    seen: set[tuple[str, str, int]] = set()
    for lineno, rec in records:
        key = (rec.individual_id, rec.feature, rec.time)
        if key in seen:
            raise ParseError(lineno, f"duplicate event {key}")
        seen.add(key)
        if rec.individual_id not in id_index:
            raise ParseError(lineno, f"individual {rec.individual_id!r} has no declared duration")
        if feature_set is not None and rec.feature not in feature_set:
            raise UnknownFeature(f"line {lineno}: feature {rec.feature!r} not in the configured universe")
        if rec.time < 0 or rec.time >= durations[rec.individual_id]:
            raise TimeOutOfRange(
                f"line {lineno}: time {rec.time} outside [0, {durations[rec.individual_id]}) "
                f"for individual {rec.individual_id!r}"
            )
        matrices[id_index[rec.individual_id]][feature_index[rec.feature], rec.time] = 1.0
    return IrregularTensor(matrices, feature_names=names, individual_ids=ids)


def write_events(X: IrregularTensor, path, format: str = "csv") -> None:
    """Write a tensor as an event file (CSV + durations sidecar, or JSONL)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    triples = []
    for ident, m in zip(X.individual_ids, X.matrices):
        for i, t in np.argwhere(m != 0.0):
            triples.append((ident, X.feature_names[int(i)], int(t)))
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["individual_id", "feature", "time"])
            writer.writerows(triples)
        with open(durations_sidecar_path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["individual_id", "duration"])
            for ident, duration in zip(X.individual_ids, X.durations):
                writer.writerow([ident, duration])
    elif format == "jsonl":
        with open(path, "w") as fh:
            header = {
                "kind": "tempheno-events",
                "durations": {i: d for i, d in zip(X.individual_ids, X.durations)},
                "features": list(X.feature_names),
            }
            fh.write(json.dumps(header) + "\n")
            for ident, feature, time in triples:
                fh.write(json.dumps({"individual_id": ident, "feature": feature, "time": time}) + "\n")
    else:
        raise ValueError(f"format must be 'csv' or 'jsonl', got {format!r}")


def dataset_digest(X: IrregularTensor) -> str:
    """Content hash of a dataset (features, ids, durations, event positions)."""
    payload = {
        "features": list(X.feature_names),
        "individuals": [
            [ident, int(m.shape[1]), [[int(i), int(t)] for i, t in np.argwhere(m != 0.0)]]
            for ident, m in zip(X.individual_ids, X.matrices)
        ],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return "sha256:" + hashlib.sha256(blob).hexdigest()


# --- model / pathway files ---------------------------------------------------

def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return "sha256:" + hashlib.sha256(blob).hexdigest()


def _write_checked(kind: str, payload: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "checksum": _checksum(payload),
        "payload": payload,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _read_checked(kind: str, path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or "payload" not in doc:
        raise CorruptFile(f"{path}: missing payload")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format_version {version}, expected {FORMAT_VERSION}")
    if doc.get("kind") != kind:
        raise CorruptFile(f"{path}: kind {doc.get('kind')!r}, expected {kind!r}")
    if _checksum(doc["payload"]) != doc.get("checksum"):
        raise CorruptFile(f"{path}: checksum mismatch")
    return doc["payload"]


def save_model(model: ModelFile, path) -> None:
    """Persist a model; float values survive the round-trip bit-exactly."""
    hp = model.hyperparameters
    payload = {
        "feature_names": list(model.phenotypes.feature_names),
        "rank": model.phenotypes.rank,
        "window": model.phenotypes.window,
        "hyperparameters": {
            "rank": hp.rank,
            "window": hp.window,
            "sparsity_weight": hp.sparsity_weight,
            "nonsuccession_weight": hp.nonsuccession_weight,
            "learning_rate": hp.learning_rate,
            "batch_size": hp.batch_size,
            "epochs": hp.epochs,
            "rng_seed": hp.rng_seed,
            "log_epsilon": hp.log_epsilon,
        },
        "phenotypes": model.phenotypes.data.tolist(),
        "provenance": dict(model.provenance),
    }
    _write_checked("tempheno-model", payload, path)


def load_model(path) -> ModelFile:
    payload = _read_checked("tempheno-model", path)
    hp = HyperParams(**payload["hyperparameters"])
    phenotypes = PhenotypeTensor(
        np.array(payload["phenotypes"], dtype=np.float64),
        feature_names=list(payload["feature_names"]),
    )
    if phenotypes.rank != payload["rank"] or phenotypes.window != payload["window"]:
        raise CorruptFile(f"{path}: phenotype array shape disagrees with declared rank/window")
    return ModelFile(phenotypes=phenotypes, hyperparameters=hp, provenance=payload["provenance"])


def save_pathways(pathways, individual_ids, window: int, path) -> None:
    mats = pathways.matrices if hasattr(pathways, "matrices") else list(pathways)
    payload = {
        "rank": int(mats[0].shape[0]) if mats else 0,
        "window": int(window),
        "individual_ids": list(individual_ids),
        "pathways": [np.asarray(m).tolist() for m in mats],
    }
    _write_checked("tempheno-pathways", payload, path)


def load_pathways(path) -> tuple[list[np.ndarray], list[str], int]:
    payload = _read_checked("tempheno-pathways", path)
    mats = [np.array(m, dtype=np.float64) for m in payload["pathways"]]
    return mats, list(payload["individual_ids"]), int(payload["window"])


# --- run reports --------------------------------------------------------------

def save_report(report: RunReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1)
        fh.write("\n")


def append_report(report: RunReport, path) -> None:
    """Append one report as a single JSON line (safe to share between runs)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")


def load_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


# --- phenotype rendering -------------------------------------------------------

def render_phenotype_text(matrix: np.ndarray, feature_names, show_values: bool | None = None) -> str:
    """Fixed-width text grid of one phenotype; numeric cells when few features."""
    matrix = np.asarray(matrix)
    n, window = matrix.shape
    if show_values is None:
        show_values = n <= 12
    label_w = max((len(str(f)) for f in feature_names), default=1)
    lines = []
    header = " " * label_w + " | " + " ".join(f"t{t:<4d}" if show_values else f"t{t}" for t in range(window))
    lines.append(header)
    lines.append("-" * len(header))
    for i in range(n):
        if show_values:
            cells = " ".join(f"{matrix[i, t]:0.3f}" for t in range(window))
        else:
            cells = " ".join("#" if matrix[i, t] > 0.5 else ("+" if matrix[i, t] > 0 else ".") for t in range(window))
        lines.append(f"{str(feature_names[i]):<{label_w}} | {cells}")
    return "\n".join(lines)


def render_phenotype_svg(matrix: np.ndarray, feature_names, cell: int = 22) -> str:
    """SVG heatmap, linear grayscale from white (0) to black (1)."""
    matrix = np.asarray(matrix)
    n, window = matrix.shape
    label_w = 8 * (max((len(str(f)) for f in feature_names), default=1) + 1)
    width = label_w + window * cell + 4
    height = (n + 1) * cell + 4
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="{cell // 2}">'
    ]
    for t in range(window):
        parts.append(
            f'<text x="{label_w + t * cell + cell // 3}" y="{cell - 6}">t{t}</text>'
        )
    show_values = n <= 12
    for i in range(n):
        y = (i + 1) * cell
        parts.append(f'<text x="2" y="{y + cell - 7}">{feature_names[i]}</text>')
        for t in range(window):
            v = float(np.clip(matrix[i, t], 0.0, 1.0))
            shade = int(round(255 * (1.0 - v)))
            x = label_w + t * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="rgb({shade},{shade},{shade})" stroke="#999"/>'
            )
            if show_values:
                text_shade = "#000" if v < 0.5 else "#fff"
                parts.append(
                    f'<text x="{x + 2}" y="{y + cell - 7}" fill="{text_shade}">{v:0.2f}</text>'
                )
    parts.append("</svg>")
    return "\n".join(parts)


def worker_cap(default: int | None = None) -> int:
    """Worker-thread cap from TEMPHENO_THREADS (>=1); falls back to CPU count."""
    raw = os.environ.get("TEMPHENO_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    if default is not None:
        return default
    return max(1, os.cpu_count() or 1)
