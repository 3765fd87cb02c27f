"""Versioned JSON persistence for a trained detector.

Arrays are written as nested lists of Python floats. ``json`` encodes a
float with its shortest round-tripping ``repr``, so loading a saved model
reproduces every number bit for bit and save/load/save is byte-identical.
Saving goes through a temporary file in the target directory followed by
a rename, so a failed save never leaves a truncated model behind.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .config import ConfigError, PipelineConfig
from .detector import DetectorError, FaultDetector, HealthBaseline, TrainingRange
from .hmm import HMMError, HmmModel
from .pca import ProjectionMatrix
from .segment import SegmentError, SegmentSpec

FORMAT_NAME = "pcahmm-model"
FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


@dataclass
class Provenance:
    dataset_hash: str = ""
    tool_version: str = ""
    created_utc: str = ""
    first_timestamp: str | None = None
    last_timestamp: str | None = None


@dataclass
class TrainingInfo:
    """What produced the HMM: seed, EM iterations and the final log-likelihood."""

    seed: int = 0
    iterations: int = 0
    converged: bool = False
    final_ll: float = math.nan
    bearing: str | None = None
    channels: list[int] = field(default_factory=list)


@dataclass
class ModelFile:
    config: PipelineConfig
    detector: FaultDetector
    training_range: TrainingRange
    training: TrainingInfo = field(default_factory=TrainingInfo)
    provenance: Provenance = field(default_factory=Provenance)
    version: int = FORMAT_VERSION


def _floats(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def _array(data, shape=None, what="array") -> np.ndarray:
    try:
        a = np.array(data, dtype=np.float64)
    except (TypeError, ValueError):
        raise ModelFileError(f"{what} is not numeric") from None
    if shape is not None:
        if a.size != int(np.prod(shape)):
            raise ModelFileError(f"{what} has {a.size} values, expected shape {shape}")
        a = a.reshape(shape)
    return a


def to_dict(m: ModelFile) -> dict[str, Any]:
    det = m.detector
    b = det.baseline
    return {
        "format": FORMAT_NAME,
        "version": m.version,
        "config": m.config.to_dict(),
        "segment": {"window_len": det.spec.window_len, "hop": det.spec.hop},
        "projections": [
            {
                "channel_label": W.channel_label,
                "p": W.p,
                "M": W.M,
                "centered": bool(W.centered),
                "mean": _floats(W.mean),
                "eigenvalues": _floats(W.eigenvalues),
                "W": _floats(W.W.ravel()),  # row-major p x M
            }
            for W in det.projections
        ],
        "hmm": {
            "S": det.model.S,
            "d": det.model.d,
            "A": _floats(det.model.A),
            "pi": _floats(det.model.pi),
            "means": _floats(det.model.means),
            "variances": _floats(det.model.variances),
            "var_floor": _floats(det.model.var_floor),
            "training": {
                "seed": m.training.seed,
                "iterations": m.training.iterations,
                "converged": m.training.converged,
                "final_ll": m.training.final_ll,
                "bearing": m.training.bearing,
                "channels": list(m.training.channels),
            },
        },
        "baseline": {
            "mean_ll": b.mean_ll,
            "std_ll": b.std_ll,
            "n": b.n,
            "shapiro_w": b.shapiro_w,
            "shapiro_p": b.shapiro_p,
            "normality_ok": b.normality_ok,
        },
        "threshold": det.threshold,
        "training_range": [m.training_range.first, m.training_range.last],
        "provenance": {
            "dataset_hash": m.provenance.dataset_hash,
            "tool_version": m.provenance.tool_version,
            "created_utc": m.provenance.created_utc,
            "first_timestamp": m.provenance.first_timestamp,
            "last_timestamp": m.provenance.last_timestamp,
        },
    }


def from_dict(data: dict[str, Any]) -> ModelFile:
    if not isinstance(data, dict) or data.get("format") != FORMAT_NAME:
        raise ModelFileError("not a pcahmm model file")
    version = data.get("version")
    if version != FORMAT_VERSION:
        raise ModelFileError(f"unsupported model file version {version!r} (this build reads {FORMAT_VERSION})")
    try:
        cfg = PipelineConfig.from_dict(data["config"])
        spec = SegmentSpec(**data["segment"])
        projections = []
        for entry in data["projections"]:
            p, M = int(entry["p"]), int(entry["M"])
            projections.append(ProjectionMatrix(
                W=_array(entry["W"], (p, M), "projection W"),
                eigenvalues=_array(entry["eigenvalues"], (M,), "eigenvalues"),
                mean=_array(entry["mean"], (M,), "projection mean"),
                centered=bool(entry["centered"]),
                channel_label=str(entry["channel_label"]),
            ))
        h = data["hmm"]
        S, d = int(h["S"]), int(h["d"])
        model = HmmModel(
            A=_array(h["A"], (S, S), "A"),
            pi=_array(h["pi"], (S,), "pi"),
            means=_array(h["means"], (S, d), "means"),
            variances=_array(h["variances"], (S, d), "variances"),
            var_floor=_array(h["var_floor"], (d,), "var_floor"),
        )
        model.check()
        t = h["training"]
        training = TrainingInfo(seed=int(t["seed"]), iterations=int(t["iterations"]), converged=bool(t["converged"]),
                                final_ll=float(t["final_ll"]), bearing=t["bearing"], channels=[int(c) for c in t["channels"]])
        baseline = HealthBaseline(**data["baseline"])
        det = FaultDetector(spec=spec, projections=projections, model=model, baseline=baseline,
                            threshold=float(data["threshold"]))
        first, last = data["training_range"]
        provenance = Provenance(**data["provenance"])
    except KeyError as exc:
        raise ModelFileError(f"model file lacks field {exc}") from None
    except (ConfigError, DetectorError, HMMError, SegmentError, TypeError) as exc:
        raise ModelFileError(f"invalid model file: {exc}") from None
    return ModelFile(config=cfg, detector=det, training_range=TrainingRange(int(first), int(last)),
                     training=training, provenance=provenance, version=version)


def dumps(m: ModelFile) -> str:
    return json.dumps(to_dict(m), indent=1, allow_nan=True) + "\n"


def loads(text: str) -> ModelFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file is not valid JSON: {exc}") from None
    return from_dict(data)


def save(m: ModelFile, path) -> Path:
    """Atomically write ``m`` to ``path``."""
    path = Path(path)
    text = dumps(m)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def load(path) -> ModelFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {str(path)!r}: {exc}") from None
    return loads(text)


def utc_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()
