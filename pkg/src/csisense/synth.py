"""Builds labeled synthetic datasets from a declarative config.

A dataset is a grid of sites x actions x subjects x repetitions.  Each site
contributes its static path set plus an optional site-specific "background"
path (a slow mover such as a fan or a door) whose energy is what the SVD
stage later strips.  Subjects scale the action's speed and reflection
strength; per-trace randomness (distances, phases, small speed jitter) is
derived from one root seed, so the whole tree is reproducible byte for byte.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .files import DatasetManifest, ManifestEntry, write_trace
from .model import (DynamicPath, StaticPath, StaticPathSet, SyntheticChannelConfig,
                    TraceMeta, action_speed_profile, generate_trace)

__all__ = ["SiteSpec", "SubjectSpec", "SynthConfig", "iter_dataset", "build_dataset",
           "trace_filename"]


@dataclass(frozen=True)
class SiteSpec:
    room: str
    location: str
    static_paths: tuple[StaticPath, ...]
    background_speed: float = 0.0
    background_attenuation: float = 0.0


@dataclass(frozen=True)
class SubjectSpec:
    name: str
    speed_scale: float = 1.0
    attenuation_scale: float = 1.0


@dataclass(frozen=True)
class SynthConfig:
    sites: tuple[SiteSpec, ...]
    actions: tuple[str, ...]
    subjects: tuple[SubjectSpec, ...] = (SubjectSpec("s00"),)
    repetitions: int = 20
    duration: float = 2.0
    sample_rate: float = 128.0
    noise_std: float = 0.004
    wavelength: float = 0.0566
    subcarrier_spacing: float = 312.5e3
    pairs: int = 4
    subcarriers: int = 30
    freq_offset: float = 0.0
    pair_gain_jitter: float = 0.1
    action_attenuation: float = 0.03
    secondary_speed_factor: float = 0.6
    secondary_attenuation_factor: float = 0.6
    body_pair_phase_jitter: float = 2.0 * np.pi
    distance_range: tuple[float, float] = (1.0, 3.0)
    speed_jitter: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if not self.sites:
            raise UsageError("synth config needs at least one site")
        if not self.actions:
            raise UsageError("synth config needs at least one action")
        if self.repetitions < 0:
            raise UsageError("repetitions must be >= 0")
        for a in self.actions:
            action_speed_profile(a)  # raises on unknown names
        if self.distance_range[0] <= 0 or self.distance_range[1] < self.distance_range[0]:
            raise UsageError(f"bad distance_range {self.distance_range}")

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthConfig":
        try:
            sites = tuple(
                SiteSpec(
                    room=s["room"],
                    location=s.get("location", "-"),
                    static_paths=tuple(
                        StaticPath(delay=p["delay_ns"] * 1e-9,
                                   gain=complex(p["gain"][0], p["gain"][1]))
                        for p in s["static_paths"]
                    ),
                    background_speed=s.get("background", {}).get("speed", 0.0),
                    background_attenuation=s.get("background", {}).get("attenuation", 0.0),
                )
                for s in doc["sites"]
            )
            subjects = tuple(
                SubjectSpec(name=name,
                            speed_scale=sub.get("speed_scale", 1.0),
                            attenuation_scale=sub.get("attenuation_scale", 1.0))
                for name, sub in doc.get("subjects", {"s00": {}}).items()
            )
            kwargs = {k: doc[k] for k in (
                "repetitions", "duration", "sample_rate", "noise_std", "wavelength",
                "subcarrier_spacing", "pairs", "subcarriers", "freq_offset",
                "pair_gain_jitter", "action_attenuation", "secondary_speed_factor",
                "secondary_attenuation_factor", "body_pair_phase_jitter",
                "speed_jitter", "seed") if k in doc}
            if "distance_range" in doc:
                kwargs["distance_range"] = tuple(doc["distance_range"])
            return cls(sites=sites, actions=tuple(doc["actions"]), subjects=subjects, **kwargs)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, UsageError):
                raise
            raise UsageError(f"bad synth config: {exc}") from exc


def _scaled(segments: tuple[tuple[float, float], ...],
            factor: float) -> tuple[tuple[float, float], ...]:
    return tuple((d, v * factor) for d, v in segments)


def trace_filename(site: SiteSpec, action: str, subject: str, rep: int) -> str:
    def clean(s: str) -> str:
        return "".join(c if c.isalnum() else "_" for c in s)

    return (f"{clean(site.room)}_{clean(site.location)}_{clean(action)}_"
            f"{clean(subject)}_r{rep:03d}.csit")


def _trace_config(cfg: SynthConfig, site: SiteSpec, action: str,
                  subject: SubjectSpec, seed_parts: list[int]) -> SyntheticChannelConfig:
    ss = np.random.SeedSequence(seed_parts)
    rng = np.random.default_rng(ss)
    lo, hi = cfg.distance_range

    profile = action_speed_profile(action)
    jitter = 1.0 + rng.uniform(-cfg.speed_jitter, cfg.speed_jitter)
    scale = subject.speed_scale * jitter
    atten = cfg.action_attenuation * subject.attenuation_scale

    dynamic = []
    # primary and secondary body reflections
    for factor, a in ((1.0, atten),
                      (cfg.secondary_speed_factor, atten * cfg.secondary_attenuation_factor)):
        dynamic.append(DynamicPath(
            initial_distance=rng.uniform(lo, hi) + cfg.duration * 2.0,
            attenuation=a,
            initial_phase=rng.uniform(0.0, 2.0 * np.pi),
            schedule=_scaled(profile, scale * factor),
            pair_phase_jitter=cfg.body_pair_phase_jitter,
        ))
    if cfg.secondary_attenuation_factor <= 0.0:
        dynamic.pop()
    if site.background_attenuation > 0.0:
        dynamic.append(DynamicPath(
            initial_distance=rng.uniform(lo, hi) + cfg.duration * abs(site.background_speed) + 1.0,
            speed=site.background_speed,
            attenuation=site.background_attenuation,
            initial_phase=rng.uniform(0.0, 2.0 * np.pi),
        ))

    return SyntheticChannelConfig(
        wavelength=cfg.wavelength,
        static=StaticPathSet(paths=site.static_paths),
        dynamic=tuple(dynamic),
        freq_offset=cfg.freq_offset,
        noise_std=cfg.noise_std,
        sample_rate=cfg.sample_rate,
        pairs=cfg.pairs,
        subcarriers=cfg.subcarriers,
        subcarrier_spacing=cfg.subcarrier_spacing,
        rng_seed=int(ss.generate_state(1)[0]),
        pair_gain_jitter=cfg.pair_gain_jitter,
    )


def iter_dataset(cfg: SynthConfig):
    """Yield (entry, trace) for every grid cell, in manifest order."""
    for si, site in enumerate(cfg.sites):
        for ai, action in enumerate(cfg.actions):
            for ui, subject in enumerate(cfg.subjects):
                for rep in range(cfg.repetitions):
                    chan = _trace_config(cfg, site, action, subject,
                                         [cfg.seed, si, ai, ui, rep])
                    meta = TraceMeta(action_label=action, person_label=subject.name,
                                     room_label=site.room, nominal_rate=cfg.sample_rate,
                                     duration=cfg.duration)
                    trace = generate_trace(chan, cfg.duration, meta=meta)
                    entry = ManifestEntry(
                        trace_path=trace_filename(site, action, subject.name, rep),
                        action_label=action,
                        person_label=subject.name,
                        room_label=site.room,
                        location_label=site.location,
                    )
                    yield entry, trace


def build_dataset(cfg: SynthConfig, out_dir: str) -> DatasetManifest:
    """Generate every trace in the grid and write it under ``out_dir``."""
    entries = []
    for entry, trace in iter_dataset(cfg):
        write_trace(os.path.join(out_dir, entry.trace_path), trace)
        entries.append(entry)
    return DatasetManifest(entries=tuple(entries))
