"""Healthy log-likelihood baseline and z-score alarms.

Training fits the whole feature chain on the healthy slice of a run:
per-channel window PCA, k-means/elbow for the state count, Baum-Welch, and
finally the distribution of per-snapshot log-likelihoods. Monitoring pushes
every snapshot through the frozen chain and flags readings whose
log-likelihood falls too far into the left tail of that distribution.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Sequence

import numpy as np

from . import cluster, hmm, pca
from .config import PipelineConfig
from .ingest import DatasetCatalog, VibrationRecord, load_snapshot
from .normality import NormalityError, shapiro_wilk
from .segment import SegmentSpec, segment

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = -2.33
NORMALITY_ALPHA = 0.05


class DetectorError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingRange:
    first: int
    last: int

    def __post_init__(self):
        if not 1 <= self.first <= self.last:
            raise DetectorError(f"invalid training range [{self.first}, {self.last}]")

    def __iter__(self):
        return iter(range(self.first, self.last + 1))

    def __len__(self):
        return self.last - self.first + 1

    def __contains__(self, reading):
        return self.first <= reading <= self.last


def select_training_range(total_readings: int) -> TrainingRange:
    """First third of the life, minus its opening fifth (run-in period)."""
    if total_readings < 15:
        raise DetectorError(f"need at least 15 readings to pick a training range, got {total_readings}")
    last = (total_readings + 1) // 3  # round(total / 3); thirds never tie
    first = last // 5 + 1
    return TrainingRange(first, last)


@dataclass(frozen=True)
class HealthBaseline:
    mean_ll: float
    std_ll: float
    n: int
    shapiro_w: float
    shapiro_p: float
    normality_ok: bool


@dataclass(frozen=True)
class HealthVerdict:
    reading_index: int
    loglik: float
    zscore: float
    alarm: bool
    threshold: float = DEFAULT_THRESHOLD
    high_warning: bool = False
    timestamp: datetime | None = None
    error: str | None = None


def fit_baseline(train_lls) -> HealthBaseline:
    x = np.asarray(train_lls, dtype=np.float64)
    if x.size < 3:
        raise DetectorError(f"baseline needs at least 3 training log-likelihoods, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DetectorError("training log-likelihoods must be finite")
    std = float(np.std(x, ddof=1))
    if not std > 0:
        raise DetectorError("training log-likelihoods have zero variance")
    try:
        w, p = shapiro_wilk(x[:5000])
    except NormalityError as exc:
        raise DetectorError(str(exc)) from None
    ok = p >= NORMALITY_ALPHA
    if not ok:
        log.warning("training log-likelihoods fail the normality check (W=%.4f, p=%.3g); z-scores are approximate", w, p)
    return HealthBaseline(mean_ll=float(np.mean(x)), std_ll=std, n=int(x.size), shapiro_w=w, shapiro_p=p, normality_ok=ok)


def classify(loglik: float, baseline: HealthBaseline, threshold: float = DEFAULT_THRESHOLD,
             reading_index: int = 0, timestamp: datetime | None = None) -> HealthVerdict:
    """Left-tail z test; an unusually high likelihood only raises a warning."""
    z = (loglik - baseline.mean_ll) / baseline.std_ll
    return HealthVerdict(
        reading_index=reading_index,
        loglik=float(loglik),
        zscore=float(z),
        alarm=bool(z < threshold),
        threshold=threshold,
        high_warning=bool(z > -threshold),
        timestamp=timestamp,
    )


def sustained_onset(verdicts: Sequence[HealthVerdict], count: int = 3) -> int | None:
    """Reading index that opens the first run of ``count`` consecutive alarms."""
    run = 0
    for i, v in enumerate(verdicts):
        run = run + 1 if v.alarm else 0
        if run == count:
            return verdicts[i - count + 1].reading_index
    return None


@dataclass
class FaultDetector:
    """Frozen processing chain: windows -> per-channel PCA -> HMM -> z-score."""

    spec: SegmentSpec
    projections: list[pca.ProjectionMatrix]
    model: hmm.HmmModel
    baseline: HealthBaseline
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        d = 0
        for W in self.projections:
            if W.M != self.spec.window_len:
                raise DetectorError(f"projection {W.channel_label!r} expects windows of {W.M}, segment spec gives {self.spec.window_len}")
            d += W.p
        if d != self.model.d:
            raise DetectorError(f"projections produce {d}-dim features but the HMM expects {self.model.d}")

    @property
    def n_channels(self) -> int:
        return len(self.projections)

    def features(self, record: VibrationRecord, source: int | None = None) -> pca.FeatureSequence:
        if record.samples.shape[1] != self.n_channels:
            raise DetectorError(f"record has {record.samples.shape[1]} channels, detector expects {self.n_channels}")
        per_channel = [
            pca.project(W, segment(record.samples[:, c], self.spec), source=source)
            for c, W in enumerate(self.projections)
        ]
        return pca.concat_features(per_channel)

    def loglik(self, record: VibrationRecord) -> float:
        return hmm.forward_loglik(self.model, self.features(record))

    def assess(self, record: VibrationRecord, reading_index: int = 0, timestamp=None) -> HealthVerdict:
        return classify(self.loglik(record), self.baseline, self.threshold, reading_index, timestamp)


@dataclass
class TrainingSummary:
    variance_retained: list[float]
    elbow: cluster.ElbowCurve
    trace: hmm.TrainingTrace
    train_lls: list[float]
    readings: list[int] = field(default_factory=list)


def fit_projections(records: Sequence[VibrationRecord], cfg: PipelineConfig) -> list[pca.ProjectionMatrix]:
    """One projection per channel, fit on the windows of every record."""
    spec = SegmentSpec(cfg.window_len, cfg.hop)
    projections = []
    for c in range(records[0].samples.shape[1]):
        acc = pca.CovarianceAccumulator(spec.window_len, centered=cfg.center)
        for rec in records:
            acc.add(segment(rec.samples[:, c], spec))
        label = records[0].channels[c]
        projections.append(pca.projection_from_covariance(acc.covariance(), cfg.p, acc.mean(), cfg.center, label))
    return projections


def extract_features(records: Sequence[VibrationRecord], projections: Sequence[pca.ProjectionMatrix],
                     spec: SegmentSpec, readings: Sequence[int]) -> list[pca.FeatureSequence]:
    feats = []
    for rec, idx in zip(records, readings):
        per_channel = [pca.project(W, segment(rec.samples[:, c], spec), source=idx) for c, W in enumerate(projections)]
        feats.append(pca.concat_features(per_channel))
    return feats


def scan_elbow(X: np.ndarray, cfg: PipelineConfig) -> cluster.ElbowCurve:
    """Elbow scan over ``cfg.k_range`` on the (possibly subsampled) pooled features."""
    Xc = cluster.subsample(X, cfg.cluster_max_points)
    k_lo, k_hi = cfg.k_range
    k_hi = min(k_hi, Xc.shape[0])
    return cluster.elbow_select(Xc, (k_lo, k_hi), seed=cfg.seed, restarts=cfg.restarts,
                                max_iter=cfg.kmeans_max_iter, override=cfg.states, tol=cfg.kmeans_tol)


def _check_records(records) -> list[VibrationRecord]:
    records = list(records)
    if len(records) < 3:
        raise DetectorError(f"need at least 3 training snapshots, got {len(records)}")
    n_ch = records[0].samples.shape[1]
    if any(r.samples.shape[1] != n_ch for r in records):
        raise DetectorError("training snapshots disagree on channel count")
    return records


def train_detector(records: Sequence[VibrationRecord], cfg: PipelineConfig,
                   readings: Sequence[int] | None = None) -> tuple[FaultDetector, TrainingSummary]:
    """Fit the full chain on healthy ``records`` (one per training snapshot)."""
    records = _check_records(records)
    spec = SegmentSpec(cfg.window_len, cfg.hop)
    readings = list(readings) if readings is not None else list(range(1, len(records) + 1))

    projections = fit_projections(records, cfg)
    retained = [pca.variance_retained(W) for W in projections]
    log.info("variance retained per channel: %s", ", ".join(f"{r:.3f}" for r in retained))

    feats = extract_features(records, projections, spec, readings)
    X, lengths = pca.stack(feats)
    elbow = scan_elbow(X, cfg)
    log.info("elbow selects k=%d", elbow.selected_k)
    labels = cluster.assign(elbow.clusterings[elbow.selected_k], X)
    init = hmm.init_from_clusters(labels, X, lengths)
    model, trace = hmm.baum_welch(init, feats, tol=cfg.hmm_tol, max_iter=cfg.hmm_max_iter)
    lls = [hmm.forward_loglik(model, f) for f in feats]
    baseline = fit_baseline(lls)
    det = FaultDetector(spec=spec, projections=projections, model=model, baseline=baseline, threshold=cfg.threshold)
    return det, TrainingSummary(variance_retained=retained, elbow=elbow, trace=trace, train_lls=lls, readings=readings)


def elbow_curve(records: Sequence[VibrationRecord], cfg: PipelineConfig) -> cluster.ElbowCurve:
    """Only the state-count scan of training, for inspecting the k-vs-WCSS curve."""
    records = _check_records(records)
    spec = SegmentSpec(cfg.window_len, cfg.hop)
    feats = extract_features(records, fit_projections(records, cfg), spec, range(1, len(records) + 1))
    X, _ = pca.stack(feats)
    return scan_elbow(X, cfg)


def monitor_records(records: Iterable[tuple[int, VibrationRecord | Callable[[], VibrationRecord]]],
                    detector: FaultDetector, timestamps: dict[int, datetime] | None = None) -> list[HealthVerdict]:
    """Score ``(reading_index, record)`` pairs in order.

    A record may be given as a zero-argument loader; a snapshot that fails
    to load or segment yields an error verdict and the run carries on.
    """
    timestamps = timestamps or {}
    out = []
    for idx, rec in records:
        ts = timestamps.get(idx)
        try:
            if callable(rec):
                rec = rec()
            out.append(detector.assess(rec, reading_index=idx, timestamp=ts))
        except (ValueError, OSError) as exc:
            out.append(HealthVerdict(reading_index=idx, loglik=math.nan, zscore=math.nan, alarm=False,
                                     threshold=detector.threshold, timestamp=ts, error=str(exc)))
    return out


def monitor_run(catalog: DatasetCatalog, detector: FaultDetector, bearing: str | None = None,
                channels: Sequence[int] | None = None, sample_rate_hz: float = 20000.0) -> list[HealthVerdict]:
    """One verdict per catalogued snapshot, in reading order, training readings included."""
    if channels is None:
        if bearing is None:
            raise DetectorError("need a bearing name or explicit channels")
        channels = catalog.channels_for(bearing)
    if len(channels) != detector.n_channels:
        raise DetectorError(f"{len(channels)} channel(s) selected, detector was trained on {detector.n_channels}")

    def loader(snap):
        return lambda: load_snapshot(snap, channels, sample_rate_hz)

    stamps = {s.reading_index: s.timestamp for s in catalog.snapshots}
    return monitor_records(((s.reading_index, loader(s)) for s in catalog.snapshots), detector, stamps)

