"""Overlapping-window decomposition of a single-channel signal."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SegmentError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentSpec:
    """Window length and hop (stride) in samples; requires 1 <= hop <= window_len."""

    window_len: int = 512
    hop: int = 32

    def __post_init__(self):
        if self.window_len < 1:
            raise SegmentError(f"window length must be positive, got {self.window_len}")
        if not 1 <= self.hop <= self.window_len:
            raise SegmentError(f"hop must lie in [1, {self.window_len}], got {self.hop}")

    def n_windows(self, length: int) -> int:
        if length < self.window_len:
            return 0
        return (length - self.window_len) // self.hop + 1


@dataclass(frozen=True)
class SegmentMatrix:
    """``U`` is M x N: column n holds window n of the signal."""

    U: np.ndarray
    spec: SegmentSpec

    @property
    def M(self) -> int:
        return self.U.shape[0]

    @property
    def N(self) -> int:
        return self.U.shape[1]


def segment(signal, spec: SegmentSpec) -> SegmentMatrix:
    """Stack the full-length windows of ``signal`` as columns.

    Trailing samples that do not complete a window are dropped. The method
    needs more windows than samples per window, so N <= M is an error.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise SegmentError(f"expected a 1-D signal, got shape {x.shape}")
    M, h = spec.window_len, spec.hop
    L = x.shape[0]
    if L < M:
        raise SegmentError(f"signal too short: length {L} < window length {M}")
    N = spec.n_windows(L)
    if N <= M:
        raise SegmentError(f"segmentation gives N={N} windows for window length M={M}; need M < N")
    windows = np.lib.stride_tricks.sliding_window_view(x, M)[::h]
    return SegmentMatrix(U=np.ascontiguousarray(windows.T), spec=spec)
