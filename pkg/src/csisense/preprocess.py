"""Amplitude preprocessing: resample to a uniform rate, low-pass filter,
moving-window mean removal.  All transforms preserve the (time, stream)
shape and the stream ordering (pair-major, subcarrier-minor)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .model import CsiTrace

__all__ = ["StreamMatrix", "interpolate", "butter_lowpass", "lowpass", "normalize"]


@dataclass(frozen=True)
class StreamMatrix:
    """Real-valued amplitude matrix (time x stream) at a uniform rate.

    ``stream_map[d]`` gives the (pair, subcarrier) a column came from.
    """

    values: np.ndarray
    rate: float
    stream_map: tuple[tuple[int, int], ...]

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"values must be a (time, stream) matrix, got shape {v.shape}")
        if v.shape[1] != len(self.stream_map):
            raise ValueError(f"stream_map has {len(self.stream_map)} entries for {v.shape[1]} streams")
        if not np.isfinite(v).all():
            raise ValueError("stream values must be finite")
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ValueError(f"rate must be finite and > 0, got {self.rate}")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_streams(self) -> int:
        return self.values.shape[1]

    @property
    def n_pairs(self) -> int:
        return max(p for p, _ in self.stream_map) + 1

    def pair_columns(self, pair: int) -> np.ndarray:
        """Column indices belonging to one Tx-Rx pair, subcarrier order."""
        cols = [d for d, (p, _) in enumerate(self.stream_map) if p == pair]
        if not cols:
            raise IndexError(f"no streams for pair {pair}")
        return np.asarray(cols)

    def with_values(self, values: np.ndarray) -> "StreamMatrix":
        return StreamMatrix(values=values, rate=self.rate, stream_map=self.stream_map)


def interpolate(trace: CsiTrace, target_rate: float = 1000.0) -> StreamMatrix:
    """Resample per-stream amplitudes onto a uniform grid by linear interpolation.

    The grid runs from the first to the last timestamp at ``target_rate``;
    streams are the flattened (pair, subcarrier) amplitude series.
    """
    if target_rate <= 0.0:
        raise ValueError(f"target_rate must be > 0, got {target_rate}")
    if len(trace) < 2:
        raise ValueError("interpolation needs at least 2 frames")
    ts = trace.timestamps
    if not (np.diff(ts) > 0.0).all():
        raise ValueError("timestamps must be strictly increasing")

    span = float(ts[-1] - ts[0])
    n_out = int(math.floor(span * target_rate)) + 1
    grid = ts[0] + np.arange(n_out, dtype=np.float64) / target_rate

    P, S = trace.n_pairs, trace.n_subcarriers
    amps = np.abs(trace.gains).reshape(len(trace), P * S)
    out = np.empty((n_out, P * S), dtype=np.float64)
    for d in range(P * S):
        out[:, d] = np.interp(grid, ts, amps[:, d])
    stream_map = tuple((p, s) for p in range(P) for s in range(S))
    return StreamMatrix(values=out, rate=target_rate, stream_map=stream_map)


def butter_lowpass(order: int, cutoff: float, rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Digital Butterworth low-pass (b, a) via bilinear transform with prewarping."""
    if not 0.0 < cutoff < rate / 2.0:
        raise ValueError(f"cutoff {cutoff} Hz must be inside (0, Nyquist={rate / 2.0})")
    b, a = signal.butter(order, cutoff, btype="low", fs=rate)
    return b, a


def lowpass(m: StreamMatrix, order: int = 5, cutoff: float = 50.0) -> StreamMatrix:
    """Zero-phase Butterworth low-pass of every stream.

    Applied forward-backward, which squares the single-pass magnitude
    response (the -3 dB point becomes -6 dB).  Reflect padding absorbs the
    startup transient on short traces.
    """
    b, a = butter_lowpass(order, cutoff, m.rate)
    padlen = 3 * (max(len(a), len(b)) - 1)
    if m.n_samples <= padlen:
        raise ValueError(f"need more than {padlen} samples to filter, got {m.n_samples}")
    out = signal.filtfilt(b, a, m.values, axis=0, padtype="even", padlen=padlen)
    return m.with_values(out)


def normalize(m: StreamMatrix, window_s: float = 0.3) -> StreamMatrix:
    """Subtract a centered moving-window mean from every sample, per stream.

    The window covers round(window_s * rate) samples and is truncated at the
    matrix boundaries.
    """
    if window_s <= 0.0:
        raise ValueError(f"window_s must be > 0, got {window_s}")
    w = int(round(window_s * m.rate))
    if w < 1:
        raise ValueError(f"window of {window_s}s spans no samples at rate {m.rate}")
    T = m.n_samples
    left = (w - 1) // 2
    right = w // 2
    idx = np.arange(T)
    lo = np.maximum(idx - left, 0)
    hi = np.minimum(idx + right + 1, T)
    csum = np.concatenate([np.zeros((1, m.n_streams)), np.cumsum(m.values, axis=0)])
    means = (csum[hi] - csum[lo]) / (hi - lo)[:, None]
    return m.with_values(m.values - means)
