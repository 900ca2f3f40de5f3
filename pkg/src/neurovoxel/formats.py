"""On-disk formats: session files, feature caches, model documents, config.

Binary payloads are raw little-endian float32 next to a JSON header; see
docs/formats.md for the byte-level contracts.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .classifier import TrainedModel
from .errors import InvalidArgument, InvalidData
from .features import FeatureMatrix
from .signal_core import EegRecording, TrialMarker

CONFIG_SCHEMA_VERSION = 1


def _write_f32(path: Path, array: np.ndarray) -> None:
    array.astype("<f4").tofile(path)


def _read_f32(path: Path) -> np.ndarray:
    return np.fromfile(path, dtype="<f4").astype(np.float64)


def save_session(rec: EegRecording, markers: list[TrialMarker], json_path) -> Path:
    """Write the session JSON plus its channel-major raw float32 data file."""
    json_path = Path(json_path)
    data_file = json_path.with_suffix(".f32")
    _write_f32(data_file, rec.data)
    doc = {
        "fs": rec.fs,
        "channel_labels": list(rec.channel_labels),
        "data_file": data_file.name,
        "markers": [
            {"class_id": m.class_id, "onset_sample": m.onset_sample, "duration_samples": m.duration_samples}
            for m in markers
        ],
    }
    json_path.write_text(json.dumps(doc, indent=1) + "\n")
    return json_path


def load_session(json_path) -> tuple[EegRecording, list[TrialMarker]]:
    json_path = Path(json_path)
    try:
        doc = json.loads(json_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidData(f"cannot parse session file {json_path}: {e}") from e
    labels = doc["channel_labels"]
    raw = _read_f32(json_path.parent / doc["data_file"])
    n_channels = len(labels)
    if raw.size % n_channels:
        raise InvalidData("raw data size is not a multiple of the channel count")
    rec = EegRecording(data=raw.reshape(n_channels, -1), fs=doc["fs"], channel_labels=labels)
    markers = [
        TrialMarker(m["class_id"], m["onset_sample"], m["duration_samples"]) for m in doc["markers"]
    ]
    return rec, markers


def save_features(fm: FeatureMatrix, json_path) -> Path:
    json_path = Path(json_path)
    values_file = json_path.with_suffix(".f32")
    _write_f32(values_file, fm.values)
    doc = {
        "n_windows": fm.n_windows,
        "n_features": fm.n_features,
        "values_file": values_file.name,
        "labels": fm.labels.tolist(),
        "trial_ids": fm.trial_ids.tolist(),
        "columns": [list(c) for c in fm.columns],
        "band_names": fm.band_names,
    }
    json_path.write_text(json.dumps(doc) + "\n")
    return json_path


def load_features(json_path) -> FeatureMatrix:
    json_path = Path(json_path)
    doc = json.loads(json_path.read_text())
    values = _read_f32(json_path.parent / doc["values_file"]).reshape(
        doc["n_windows"], doc["n_features"]
    )
    return FeatureMatrix(
        values=values,
        labels=np.asarray(doc["labels"]),
        columns=[tuple(c) for c in doc["columns"]],
        trial_ids=np.asarray(doc["trial_ids"]),
        band_names=doc["band_names"],
    )


def save_model(model: TrainedModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n")
    return path


def load_model(path) -> TrainedModel:
    try:
        return TrainedModel.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise InvalidData(f"cannot load model from {path}: {e}") from e


@dataclass
class Config:
    """All tunable defaults in one document; unknown keys are rejected."""

    schema_version: int = CONFIG_SCHEMA_VERSION
    band_edges: tuple = ((4.0, 7.0), (7.0, 15.0), (15.0, 30.0))
    bandpass_low_hz: float = 1.0
    bandpass_high_hz: float = 40.0
    window_s: float = 2.0
    step_s: float = 0.5
    asr_sd_threshold: float = 15.0
    asr_window_s: float = 0.5
    asr_calibration_s: float = 30.0
    svm_c: float = 1.0
    mrmr_k: int = 23
    snr: float = 1.0
    trial_gain_jitter: float = 0.0
    reps_per_class: int = 5
    trial_s: float = 10.0
    inter_trial_s: float = 2.0
    grid_n: int = 24
    tau: float = 0.5
    smooth_alpha: float = 0.3
    udp_host: str = "127.0.0.1"
    udp_port: int = 9000
    ws_port: int = 0  # 0 disables the WebSocket sink

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "Config":
        doc = {}
        if path is not None:
            try:
                doc = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise InvalidData(f"cannot parse config {path}: {e}") from e
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        if doc.get("schema_version", CONFIG_SCHEMA_VERSION) != CONFIG_SCHEMA_VERSION:
            raise InvalidData("unsupported config schema_version")
        if "band_edges" in doc:
            doc["band_edges"] = tuple(tuple(b) for b in doc["band_edges"])
        cfg = cls(**doc)
        for key, value in (overrides or {}).items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg

    def to_json(self) -> str:
        d = asdict(self)
        d["band_edges"] = [list(b) for b in self.band_edges]
        return json.dumps(d, indent=1)
