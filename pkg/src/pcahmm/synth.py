"""Seeded synthetic run-to-failure vibration data.

Healthy snapshots are a few shaft-related tones plus a weakly excited
structural resonance, all with random phases, over white noise.
From the fault onset a tone at the resonance and a periodic train of
decaying impulses ringing at the same frequency are added, with an
amplitude that grows linearly in the snapshot index. This is a test
fixture with known ground truth, not a bearing physics model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .ingest import VibrationRecord, write_snapshot


@dataclass(frozen=True)
class HealthySpec:
    tones_hz: tuple[float, ...] = (33.3, 236.4, 493.0, 985.0)
    tone_amps: tuple[float, ...] = (0.08, 0.05, 0.04, 0.03)
    # background excitation of the structural resonance the fault later rings
    resonance_amp: float = 0.025
    noise_std: float = 0.07


@dataclass(frozen=True)
class FaultSpec:
    resonance_hz: float = 3300.0
    # per-snapshot amplitude increments after onset
    tone_growth: float = 0.01
    impulse_growth: float = 0.02
    impulse_rate_hz: float = 118.0
    decay_s: float = 6e-4


@dataclass(frozen=True)
class RunProfile:
    n_snapshots: int = 600
    samples_per_snapshot: int = 20480
    channels: int = 2
    sample_rate_hz: float = 20000.0
    healthy: HealthySpec = field(default_factory=HealthySpec)
    fault_onset_index: int = 400
    fault: FaultSpec = field(default_factory=FaultSpec)
    seed: int = 2024

    def __post_init__(self):
        if not 1 <= self.fault_onset_index <= self.n_snapshots:
            raise ValueError(f"fault onset {self.fault_onset_index} outside 1..{self.n_snapshots}")
        if len(self.healthy.tones_hz) != len(self.healthy.tone_amps):
            raise ValueError("tone frequencies and amplitudes differ in length")
        if self.samples_per_snapshot < 1 or self.channels < 1 or self.sample_rate_hz <= 0:
            raise ValueError("invalid snapshot geometry")

    @classmethod
    def from_dict(cls, data: dict) -> "RunProfile":
        data = dict(data)
        if "healthy" in data:
            h = dict(data["healthy"])
            for key in ("tones_hz", "tone_amps"):
                if key in h:
                    h[key] = tuple(h[key])
            data["healthy"] = HealthySpec(**h)
        if "fault" in data:
            data["fault"] = FaultSpec(**data["fault"])
        return cls(**data)


@dataclass
class SyntheticRun:
    records: list[VibrationRecord]
    faulty: np.ndarray
    severity: np.ndarray
    fault_rms: np.ndarray
    profile: RunProfile

    def readings(self):
        return list(zip(range(1, len(self.records) + 1), self.records))


def severity(profile: RunProfile, reading_index: int) -> float:
    """Fault growth steps elapsed at ``reading_index`` (0 before onset)."""
    return float(max(0, reading_index - profile.fault_onset_index + 1))


def _fault_signal(profile: RunProfile, level: float, t: np.ndarray, channel: int) -> np.ndarray:
    f = profile.fault
    if level <= 0 or (f.tone_growth == 0 and f.impulse_growth == 0):
        return np.zeros_like(t)
    # phases are fixed for the whole run so the fault RMS scales exactly with level
    rng = np.random.default_rng([profile.seed, 0, channel])
    w = 2.0 * np.pi * f.resonance_hz
    tone = f.tone_growth * level * np.sin(w * t + rng.uniform(0, 2 * np.pi))
    period = 1.0 / f.impulse_rate_hz
    phase = rng.uniform(0, period)
    since = np.mod(t - phase, period)
    ring = np.exp(-since / f.decay_s) * np.sin(w * since)
    return tone + f.impulse_growth * level * ring


def generate_snapshot(profile: RunProfile, reading_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Samples (rows) x channels for one reading, plus per-channel fault RMS.

    Each reading draws from its own generator seeded by (seed, index), so
    snapshots can be produced independently and in any order.
    """
    rng = np.random.default_rng([profile.seed, reading_index, 1])
    L, C = profile.samples_per_snapshot, profile.channels
    t = np.arange(L) / profile.sample_rate_hz
    h = profile.healthy
    level = severity(profile, reading_index)
    out = np.empty((L, C))
    fault_rms = np.zeros(C)
    for c in range(C):
        x = rng.standard_normal(L) * h.noise_std
        gain = 1.0 - 0.25 * c
        for f0, a in zip(h.tones_hz + (profile.fault.resonance_hz,), h.tone_amps + (h.resonance_amp,)):
            x += gain * a * np.sin(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
        fault = _fault_signal(profile, level, t, c) * gain
        fault_rms[c] = np.sqrt(np.mean(fault ** 2))
        out[:, c] = x + fault
    return out, fault_rms


def generate_run(profile: RunProfile) -> SyntheticRun:
    records, rms = [], []
    for i in range(1, profile.n_snapshots + 1):
        samples, frms = generate_snapshot(profile, i)
        records.append(VibrationRecord(samples=samples, sample_rate_hz=profile.sample_rate_hz,
                                       channels=[f"ch{c + 1}" for c in range(profile.channels)]))
        rms.append(frms)
    idx = np.arange(1, profile.n_snapshots + 1)
    sev = np.array([severity(profile, i) for i in idx])
    return SyntheticRun(records=records, faulty=idx >= profile.fault_onset_index, severity=sev,
                        fault_rms=np.array(rms), profile=profile)


def write_run(profile: RunProfile, out_dir, start: datetime = datetime(2003, 10, 22, 12, 6, 24),
              interval: timedelta = timedelta(minutes=10)) -> list[Path]:
    """Write every snapshot as an IMS-style text file named by timestamp."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(1, profile.n_snapshots + 1):
        samples, _ = generate_snapshot(profile, i)
        path = out / (start + (i - 1) * interval).strftime("%Y.%m.%d.%H.%M.%S")
        write_snapshot(path, samples)
        paths.append(path)
    return paths
