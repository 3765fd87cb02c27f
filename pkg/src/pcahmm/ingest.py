"""Locate, order and parse run-to-failure snapshot files.

Snapshot files follow the IMS layout: the file name is the acquisition
time ``YYYY.MM.DD.HH.MM.SS`` and the body is plain text with one row per
sampling instant and one whitespace-separated column per channel.
Channel indices are 1-based throughout, matching the column numbering
used when describing the IMS sets (bearing 2 of set 1 is columns 3 and 4).
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_SAMPLE_RATE_HZ = 20000.0
TIMESTAMP_FORMAT = "%Y.%m.%d.%H.%M.%S"

# IMS set 1 records two accelerometers per bearing.
IMS_SET1_CHANNELS = {
    "bearing1": [1, 2],
    "bearing2": [3, 4],
    "bearing3": [5, 6],
    "bearing4": [7, 8],
}

_STEM_RE = re.compile(r"^\d{4}\.\d{2}\.\d{2}\.\d{2}\.\d{2}\.\d{2}$")


class IngestError(ValueError):
    """Raised for unreadable datasets or malformed snapshot files."""


@dataclass(frozen=True)
class SnapshotPath:
    path: Path
    timestamp: datetime
    reading_index: int


@dataclass
class VibrationRecord:
    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    channels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] == 0:
            raise IngestError(f"record needs a non-empty 2-D sample matrix, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise IngestError("record contains non-finite values")
        if self.sample_rate_hz <= 0:
            raise IngestError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not self.channels:
            self.channels = [f"ch{i + 1}" for i in range(self.samples.shape[1])]
        if len(self.channels) != self.samples.shape[1]:
            raise IngestError("channel labels do not match the column count")

    def channel(self, i: int) -> np.ndarray:
        return self.samples[:, i]


@dataclass
class DatasetCatalog:
    snapshots: list[SnapshotPath]
    channel_map: dict[str, list[int]] = field(default_factory=dict)

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, reading_index: int) -> SnapshotPath:
        """Look up a snapshot by its 1-based reading index."""
        if not 1 <= reading_index <= len(self.snapshots):
            raise IndexError(f"reading {reading_index} outside 1..{len(self.snapshots)}")
        return self.snapshots[reading_index - 1]

    def channels_for(self, bearing: str) -> list[int]:
        try:
            return list(self.channel_map[bearing])
        except KeyError:
            known = ", ".join(sorted(self.channel_map)) or "none"
            raise IngestError(f"unknown bearing {bearing!r} (configured: {known})") from None

    def fingerprint(self) -> str:
        """Cheap dataset hash over file names and sizes."""
        h = hashlib.sha256()
        for snap in self.snapshots:
            h.update(snap.path.name.encode())
            h.update(str(snap.path.stat().st_size).encode())
        return h.hexdigest()


def parse_timestamp(name: str) -> datetime:
    if not _STEM_RE.match(name):
        raise IngestError(f"file name {name!r} is not a YYYY.MM.DD.HH.MM.SS timestamp")
    try:
        return datetime.strptime(name, TIMESTAMP_FORMAT)
    except ValueError as exc:
        raise IngestError(f"file name {name!r} is not a valid timestamp: {exc}") from None


def scan_dataset(root, channel_map: dict[str, list[int]] | None = None) -> DatasetCatalog:
    """Catalog every snapshot under ``root`` in acquisition order.

    Parameters
    ----------
    root : path-like
        Directory holding one file per snapshot. Hidden files are ignored.
    channel_map : dict, optional
        Bearing name to 1-based column indices.

    Returns
    -------
    DatasetCatalog
        Snapshots sorted by parsed timestamp with reading indices 1..n.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"dataset directory {str(root)!r} does not exist")
    found = []
    for entry in root.iterdir():
        if entry.name.startswith(".") or not entry.is_file():
            continue
        found.append((parse_timestamp(entry.name), entry))
    if not found:
        raise IngestError(f"dataset directory {str(root)!r} holds no snapshot files")
    found.sort(key=lambda pair: pair[0])
    for (t0, p0), (t1, p1) in zip(found, found[1:]):
        if t0 == t1:
            raise IngestError(f"duplicate timestamp for {p0.name} and {p1.name}")
    snaps = [SnapshotPath(path=p, timestamp=t, reading_index=i + 1) for i, (t, p) in enumerate(found)]
    return DatasetCatalog(snapshots=snaps, channel_map=dict(channel_map or {}))


def _locate_bad_row(lines: Sequence[str], path: Path) -> None:
    width = None
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            raise IngestError(f"{path.name}: blank line {lineno} inside the data")
        for tok in tokens:
            try:
                float(tok)
            except ValueError:
                raise IngestError(f"{path.name}: line {lineno}: non-numeric token {tok!r}") from None
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise IngestError(f"{path.name}: line {lineno} has {len(tokens)} columns, expected {width}")


def read_matrix(path) -> np.ndarray:
    """Parse a whitespace-delimited numeric text file into a 2-D array."""
    path = Path(path)
    text = path.read_text()
    lines = text.rstrip().split("\n") if text.strip() else []
    if not lines:
        raise IngestError(f"{path.name}: file holds no rows")
    try:
        data = np.loadtxt(lines, dtype=np.float64, ndmin=2)
    except ValueError:
        _locate_bad_row(lines, path)
        raise
    if data.shape[0] != len(lines):
        # loadtxt silently skips blank lines; interior blanks are malformed rows
        _locate_bad_row(lines, path)
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data))[0, 0]) + 1
        raise IngestError(f"{path.name}: line {bad}: non-finite value")
    return data


def load_snapshot(snapshot, channels: Sequence[int], sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> VibrationRecord:
    """Load the requested 1-based ``channels`` of one snapshot file."""
    path = snapshot.path if isinstance(snapshot, SnapshotPath) else Path(snapshot)
    data = read_matrix(path)
    n_cols = data.shape[1]
    idx = list(channels)
    if not idx:
        raise IngestError("no channels requested")
    for c in idx:
        if not 1 <= c <= n_cols:
            raise IngestError(f"{path.name}: channel {c} requested but the file has {n_cols} columns")
    cols = np.ascontiguousarray(data[:, [c - 1 for c in idx]])
    return VibrationRecord(samples=cols, sample_rate_hz=sample_rate_hz, channels=[f"ch{c}" for c in idx])


def write_snapshot(path, samples: np.ndarray) -> None:
    """Write a sample matrix in the IMS text layout (tab separated, lossless)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    # %.17g round-trips every double exactly
    np.savetxt(path, samples, fmt="%.17g", delimiter="\t")
