"""Synthetic CSI domain model: multipath channel types and trace generation.

The generator produces complex per-subcarrier channel gains for a set of
Tx-Rx antenna pairs.  A channel is a sum of static paths (fixed delay and
complex gain, line-of-sight included) and dynamic paths whose length changes
at a piecewise-constant speed, modulating the gain phase at v/wavelength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0

__all__ = [
    "SPEED_OF_LIGHT",
    "StaticPath",
    "StaticPathSet",
    "DynamicPath",
    "SyntheticChannelConfig",
    "CsiFrame",
    "TraceMeta",
    "CsiTrace",
    "generate_trace",
    "tap_profile",
    "action_speed_profile",
    "action_catalog",
    "max_schedule_speed",
    "piecewise_displacement",
]


@dataclass(frozen=True)
class StaticPath:
    """One immobile propagation path: delay in seconds, complex gain."""

    delay: float
    gain: complex

    def __post_init__(self):
        if not (math.isfinite(self.delay) and self.delay >= 0.0):
            raise ValueError(f"static path delay must be finite and >= 0, got {self.delay}")
        if not (math.isfinite(self.gain.real) and math.isfinite(self.gain.imag)):
            raise ValueError("static path gain must be finite")


@dataclass(frozen=True)
class StaticPathSet:
    """All immobile paths of an environment, line-of-sight included.

    The path with the minimal delay is treated as the line-of-sight path.
    """

    paths: tuple[StaticPath, ...]

    def __post_init__(self):
        if len(self.paths) == 0:
            raise ValueError("a static path set needs at least one path (the LOS path)")

    @property
    def los(self) -> StaticPath:
        return min(self.paths, key=lambda p: p.delay)

    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=np.complex128)

    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths], dtype=np.float64)


@dataclass(frozen=True)
class DynamicPath:
    """A moving reflection path.

    ``speed`` is the constant rate of change of the path length in m/s;
    ``schedule`` overrides it with piecewise-constant (duration_s, speed)
    segments that repeat cyclically for the whole trace.  ``attenuation``
    scales the path gain and ``initial_phase`` adds a fixed phase offset on
    top of the 2*pi*d0/wavelength term.  ``pair_phase_jitter`` is the width
    in radians of a seeded per-antenna-pair phase offset (antennas sit a few
    centimeters apart, a large fraction of the wavelength); zero keeps the
    path coherent across pairs.
    """

    initial_distance: float
    speed: float = 0.0
    attenuation: float = 1.0
    initial_phase: float = 0.0
    schedule: tuple[tuple[float, float], ...] | None = None
    pair_phase_jitter: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.initial_distance) and self.initial_distance > 0.0):
            raise ValueError(f"initial_distance must be finite and > 0, got {self.initial_distance}")
        if not (math.isfinite(self.attenuation) and self.attenuation >= 0.0):
            raise ValueError(f"attenuation must be finite and >= 0, got {self.attenuation}")
        if not math.isfinite(self.speed) or not math.isfinite(self.initial_phase):
            raise ValueError("speed and initial_phase must be finite")
        if not (math.isfinite(self.pair_phase_jitter) and self.pair_phase_jitter >= 0.0):
            raise ValueError("pair_phase_jitter must be finite and >= 0")
        if self.schedule is not None:
            if len(self.schedule) == 0:
                raise ValueError("schedule must have at least one segment")
            for dur, v in self.schedule:
                if not (math.isfinite(dur) and dur > 0.0 and math.isfinite(v)):
                    raise ValueError(f"bad schedule segment ({dur}, {v})")

    def segments(self) -> tuple[tuple[float, float], ...]:
        if self.schedule is not None:
            return self.schedule
        return ((math.inf, self.speed),)

    def max_speed(self) -> float:
        return max(abs(v) for _, v in self.segments())


@dataclass(frozen=True)
class SyntheticChannelConfig:
    """Everything needed to synthesize one trace deterministically.

    Per-pair channel diversity comes from a seeded multiplicative jitter
    (+-pair_gain_jitter) applied to every static and dynamic path gain.
    """

    wavelength: float
    static: StaticPathSet
    dynamic: tuple[DynamicPath, ...] = ()
    freq_offset: float = 0.0
    noise_std: float = 0.0
    sample_rate: float = 1000.0
    pairs: int = 4
    subcarriers: int = 30
    subcarrier_spacing: float = 312.5e3
    rng_seed: int = 0
    pair_gain_jitter: float = 0.2

    def __post_init__(self):
        for name in ("wavelength", "freq_offset", "noise_std", "sample_rate",
                     "subcarrier_spacing", "pair_gain_jitter"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.wavelength <= 0.0:
            raise ValueError("wavelength must be > 0")
        if self.sample_rate <= 0.0:
            raise ValueError("sample_rate must be > 0")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be >= 0")
        if self.pairs < 1 or self.subcarriers < 1:
            raise ValueError("pairs and subcarriers must be >= 1")
        if self.subcarrier_spacing <= 0.0:
            raise ValueError("subcarrier_spacing must be > 0")
        if not (0.0 <= self.pair_gain_jitter < 1.0):
            raise ValueError("pair_gain_jitter must be in [0, 1)")
        # Nyquist guard: the fastest dynamic path modulates at v/wavelength.
        v_max = max((p.max_speed() for p in self.dynamic), default=0.0)
        if v_max > 0.0 and self.sample_rate <= 2.0 * v_max / self.wavelength:
            raise ValueError(
                f"sample_rate {self.sample_rate} Hz aliases the fastest path "
                f"({v_max} m/s -> {v_max / self.wavelength:.1f} Hz)")

    @property
    def carrier_freq(self) -> float:
        return SPEED_OF_LIGHT / self.wavelength

    def subcarrier_freqs(self) -> np.ndarray:
        return self.carrier_freq + np.arange(self.subcarriers) * self.subcarrier_spacing


@dataclass(frozen=True)
class CsiFrame:
    """One CSI snapshot: complex gains indexed [pair, subcarrier]."""

    timestamp: float
    gains: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0.0):
            raise ValueError(f"timestamp must be finite and >= 0, got {self.timestamp}")
        g = self.gains
        if g.ndim != 2 or g.shape[0] < 1 or g.shape[1] < 1:
            raise ValueError(f"gains must be a (pairs, subcarriers) matrix, got shape {g.shape}")
        if not np.isfinite(g).all():
            raise ValueError("gains must be finite")


@dataclass(frozen=True)
class TraceMeta:
    action_label: str = ""
    person_label: str = ""
    room_label: str = ""
    nominal_rate: float = 1000.0
    duration: float = 0.0


@dataclass(frozen=True)
class CsiTrace:
    """A time series of CSI frames with shared (pairs, subcarriers) shape.

    Frames are stored as arrays: ``timestamps`` of shape (N,) strictly
    increasing and ``gains`` of shape (N, pairs, subcarriers).
    """

    timestamps: np.ndarray
    gains: np.ndarray
    meta: TraceMeta = field(default_factory=TraceMeta)

    def __post_init__(self):
        ts, g = self.timestamps, self.gains
        if ts.ndim != 1 or g.ndim != 3 or g.shape[0] != ts.shape[0]:
            raise ValueError(f"inconsistent trace shapes {ts.shape} / {g.shape}")
        if ts.shape[0] < 1:
            raise ValueError("a trace needs at least one frame")
        if not np.isfinite(ts).all() or ts[0] < 0.0:
            raise ValueError("timestamps must be finite and non-negative")
        if ts.shape[0] > 1 and not (np.diff(ts) > 0.0).all():
            raise ValueError("timestamps must be strictly increasing")
        if not np.isfinite(g).all():
            raise ValueError("gains must be finite")
        if self.meta.nominal_rate <= 0.0:
            raise ValueError("nominal_rate must be > 0")
        span = float(ts[-1] - ts[0])
        if self.meta.duration and self.meta.duration + 1e-9 < span:
            raise ValueError(f"meta.duration {self.meta.duration} shorter than span {span}")

    def __len__(self) -> int:
        return self.timestamps.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.gains.shape[1]

    @property
    def n_subcarriers(self) -> int:
        return self.gains.shape[2]

    def frame(self, i: int) -> CsiFrame:
        return CsiFrame(float(self.timestamps[i]), self.gains[i])

    def __iter__(self):
        return (self.frame(i) for i in range(len(self)))


def piecewise_displacement(times: np.ndarray,
                           segments: tuple[tuple[float, float], ...]) -> np.ndarray:
    """Integrate a piecewise-constant speed schedule: returns distance moved.

    ``segments`` is a sequence of (duration_s, speed) entries; finite
    schedules repeat cyclically.  Output has the same shape as ``times``.
    """
    times = np.asarray(times, dtype=np.float64)
    durs = np.array([d for d, _ in segments], dtype=np.float64)
    speeds = np.array([v for _, v in segments], dtype=np.float64)
    if np.isinf(durs[0]):
        return speeds[0] * times
    cycle = durs.sum()
    per_cycle = float(np.dot(durs, speeds))
    n_cycles = np.floor(times / cycle)
    tau = times - n_cycles * cycle
    bounds = np.concatenate(([0.0], np.cumsum(durs)))
    # displacement accumulated at each segment boundary within one cycle
    acc = np.concatenate(([0.0], np.cumsum(durs * speeds)))
    seg = np.clip(np.searchsorted(bounds, tau, side="right") - 1, 0, len(segments) - 1)
    partial = acc[seg] + speeds[seg] * (tau - bounds[seg])
    return n_cycles * per_cycle + partial


def max_schedule_speed(segments: tuple[tuple[float, float], ...]) -> float:
    return max(abs(v) for _, v in segments)


def generate_trace(cfg: SyntheticChannelConfig, duration: float,
                   meta: TraceMeta | None = None) -> CsiTrace:
    """Synthesize a CSI trace of floor(duration * sample_rate) frames.

    Each gain is H_s(f) + sum_k a_k * exp(-j * (2*pi*d_k(t)/wavelength + phi_k)),
    all multiplied by exp(-j*2*pi*freq_offset*t), plus circular complex
    Gaussian noise with E[|n|^2] = noise_std^2.  d_k(t) integrates the path's
    piecewise-constant speed from initial_distance.  The result is a pure
    function of (cfg, duration): all randomness flows from cfg.rng_seed.
    """
    if not (math.isfinite(duration) and duration > 0.0):
        raise ValueError(f"duration must be finite and > 0, got {duration}")
    n_frames = int(math.floor(duration * cfg.sample_rate))
    if n_frames < 1:
        raise ValueError(f"duration {duration} too short for sample_rate {cfg.sample_rate}")

    rng = np.random.default_rng(cfg.rng_seed)
    P, S = cfg.pairs, cfg.subcarriers
    times = np.arange(n_frames, dtype=np.float64) / cfg.sample_rate
    freqs = cfg.subcarrier_freqs()

    # Seeded per-pair jitter on every path gain; fixed draw order keeps
    # traces bit-identical for a given seed.
    q = cfg.pair_gain_jitter
    n_static = len(cfg.static.paths)
    n_dyn = len(cfg.dynamic)
    static_fac = 1.0 + rng.uniform(-q, q, size=(P, n_static))
    dyn_fac = 1.0 + rng.uniform(-q, q, size=(P, n_dyn)) if n_dyn else np.zeros((P, 0))
    dyn_phase = rng.uniform(-0.5, 0.5, size=(P, n_dyn)) if n_dyn else np.zeros((P, 0))

    # Static channel: H_s[p, s] = sum_i g_i * fac[p, i] * exp(-j*2*pi*f_s*tau_i)
    phasors = np.exp(-2j * np.pi * np.outer(cfg.static.delays(), freqs))  # (n_static, S)
    weighted = static_fac[:, :, None] * cfg.static.gains()[None, :, None]  # (P, n_static, S)
    h_static = (weighted * phasors[None, :, :]).sum(axis=1)  # (P, S)

    gains = np.broadcast_to(h_static[None, :, :], (n_frames, P, S)).astype(np.complex128)
    gains = np.array(gains)  # writable copy

    for k, path in enumerate(cfg.dynamic):
        d_t = path.initial_distance + piecewise_displacement(times, path.segments())
        if d_t.min() <= 0.0:
            raise ValueError(f"dynamic path {k} crosses zero distance during the trace")
        phase = 2.0 * np.pi * d_t / cfg.wavelength + path.initial_phase
        osc = np.exp(-1j * phase)  # (N,)
        per_pair = (path.attenuation * dyn_fac[:, k]
                    * np.exp(-1j * path.pair_phase_jitter * dyn_phase[:, k]))  # (P,)
        gains += osc[:, None, None] * per_pair[None, :, None]

    if cfg.freq_offset != 0.0:
        gains *= np.exp(-2j * np.pi * cfg.freq_offset * times)[:, None, None]

    if cfg.noise_std > 0.0:
        scale = cfg.noise_std / math.sqrt(2.0)
        noise = rng.normal(0.0, scale, size=(n_frames, P, S)) \
            + 1j * rng.normal(0.0, scale, size=(n_frames, P, S))
        gains += noise

    if meta is None:
        meta = TraceMeta(nominal_rate=cfg.sample_rate, duration=duration)
    return CsiTrace(timestamps=times, gains=gains, meta=meta)


def tap_profile(frame: CsiFrame, pair: int) -> np.ndarray:
    """Time-domain tap magnitudes of one pair's subcarrier vector.

    Inverse DFT with 1/S normalization; tap index == array index.  Short
    delays land in low taps, so the line-of-sight path dominates tap 0.
    """
    n_pairs = frame.gains.shape[0]
    if not 0 <= pair < n_pairs:
        raise IndexError(f"pair {pair} out of range [0, {n_pairs})")
    return np.abs(np.fft.ifft(frame.gains[pair]))


# Named synthetic action profiles.  Speeds are path-length change rates in
# m/s; entries are (duration_s, speed) segments repeated for the whole trace.
_ACTION_PROFILES: dict[str, tuple[tuple[float, float], ...]] = {
    "still": ((1.0, 0.0),),
    "slow-wave": ((0.7, 0.17), (0.7, -0.17)),
    "pickup-like": ((0.5, 0.30), (0.3, 0.0), (0.5, -0.30), (0.4, 0.0)),
    "walk-like": ((1.0, 0.43),),
    "swing-like": ((0.35, 0.56), (0.35, -0.56), (0.5, 0.0)),
    "run-like": ((1.0, 0.69),),
    "jump-like": ((0.2, 0.85), (0.2, -0.85), (0.8, 0.0)),
    "fast-punch": ((0.22, 1.1), (0.22, -1.1)),
}


def action_catalog() -> tuple[str, ...]:
    return tuple(_ACTION_PROFILES)


def action_speed_profile(name: str) -> tuple[tuple[float, float], ...]:
    """Speed schedule for a named synthetic action ("still" is all zeros)."""
    try:
        return _ACTION_PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown action {name!r}; known: {', '.join(_ACTION_PROFILES)}") from None
