"""On-disk formats: binary trace files, dataset manifests, line-oriented
reports, and grayscale image output.  All writes go through a
write-temp-then-rename step so partial files never appear."""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .model import CsiTrace, TraceMeta

__all__ = [
    "TRACE_MAGIC",
    "TRACE_VERSION",
    "MANIFEST_VERSION",
    "ManifestEntry",
    "DatasetManifest",
    "atomic_write_bytes",
    "write_trace",
    "read_trace",
    "write_pgm",
    "write_image",
    "write_report",
    "config_hash",
]

TRACE_MAGIC = b"CSIT"
TRACE_VERSION = 1
MANIFEST_VERSION = 1

_HEADER = struct.Struct("<4sIIIQd")  # magic, version, pairs, subcarriers, frames, rate


def atomic_write_bytes(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_trace(path: str, trace: CsiTrace) -> None:
    """Serialize a trace: 32-byte header then little-endian float64 frames,
    each frame a timestamp followed by pairs*subcarriers (re, im) values."""
    n, p, s = trace.gains.shape
    header = _HEADER.pack(TRACE_MAGIC, TRACE_VERSION, p, s, n, trace.meta.nominal_rate)
    body = np.empty((n, 1 + 2 * p * s), dtype="<f8")
    body[:, 0] = trace.timestamps
    flat = trace.gains.reshape(n, p * s)
    body[:, 1::2] = flat.real
    body[:, 2::2] = flat.imag
    atomic_write_bytes(path, header + body.tobytes())


def read_trace(path: str, meta: TraceMeta | None = None) -> CsiTrace:
    """Read a trace file; label fields come from ``meta`` (or stay empty)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read trace {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise DataError(f"trace {path} shorter than its header")
    magic, version, p, s, n, rate = _HEADER.unpack_from(raw)
    if magic != TRACE_MAGIC:
        raise DataError(f"trace {path} has bad magic {magic!r}")
    if version != TRACE_VERSION:
        raise DataError(f"trace {path} has unsupported version {version}")
    expect = _HEADER.size + n * (1 + 2 * p * s) * 8
    if len(raw) != expect:
        raise DataError(f"trace {path} is {len(raw)} bytes, expected {expect}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, 1 + 2 * p * s)
    timestamps = body[:, 0].copy()
    gains = (body[:, 1::2] + 1j * body[:, 2::2]).reshape(n, p, s)
    if meta is None:
        meta = TraceMeta(nominal_rate=rate,
                         duration=float(timestamps[-1] - timestamps[0]) if n > 1 else 0.0)
    try:
        return CsiTrace(timestamps=timestamps, gains=gains, meta=meta)
    except ValueError as exc:
        raise DataError(f"trace {path} invalid: {exc}") from exc


@dataclass(frozen=True)
class ManifestEntry:
    trace_path: str
    action_label: str
    person_label: str
    room_label: str
    location_label: str = "-"
    split_tags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.trace_path:
            raise ValueError("trace_path must be non-empty")
        for name in ("action_label", "person_label", "room_label", "location_label"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    format_version: int = MANIFEST_VERSION

    def __post_init__(self):
        if self.format_version != MANIFEST_VERSION:
            raise ValueError(f"unrecognized manifest version {self.format_version}")
        paths = [e.trace_path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest trace paths must be unique")

    def save(self, path: str) -> None:
        doc = {
            "format_version": self.format_version,
            "entries": [
                {
                    "trace_path": e.trace_path,
                    "action_label": e.action_label,
                    "person_label": e.person_label,
                    "room_label": e.room_label,
                    "location_label": e.location_label,
                    "split_tags": list(e.split_tags),
                }
                for e in self.entries
            ],
        }
        atomic_write_bytes(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())

    @classmethod
    def load(cls, path: str) -> "DatasetManifest":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read manifest {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"manifest {path} is not valid JSON: {exc}") from exc
        try:
            entries = tuple(
                ManifestEntry(
                    trace_path=e["trace_path"],
                    action_label=e["action_label"],
                    person_label=e["person_label"],
                    room_label=e["room_label"],
                    location_label=e.get("location_label", "-"),
                    split_tags=tuple(e.get("split_tags", ())),
                )
                for e in doc["entries"]
            )
            return cls(entries=entries, format_version=doc["format_version"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"manifest {path} malformed: {exc}") from exc


def write_pgm(path: str, pixels: np.ndarray, scale: int = 1) -> None:
    """8-bit binary PGM (P5) from [0, 1] grayscale; optional integer upscale."""
    img = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    data = np.round(img * 255.0).astype(np.uint8)
    if scale > 1:
        data = np.kron(data, np.ones((scale, scale), dtype=np.uint8))
    h, w = data.shape
    atomic_write_bytes(path, f"P5\n{w} {h}\n255\n".encode() + data.tobytes())


def write_image(path: str, pixels: np.ndarray, scale: int = 1) -> None:
    """Write PNG when the extension asks for it, binary PGM otherwise."""
    if path.lower().endswith(".png"):
        from PIL import Image

        img = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
        data = np.round(img * 255.0).astype(np.uint8)
        if scale > 1:
            data = np.kron(data, np.ones((scale, scale), dtype=np.uint8))
        tmp = f"{path}.tmp.{os.getpid()}"
        Image.fromarray(data, mode="L").save(tmp, format="PNG")
        os.replace(tmp, path)
    else:
        write_pgm(path, pixels, scale=scale)


def write_report(path: str, lines: list[tuple[str, str]]) -> None:
    """Line-oriented ``key = value`` report with a versioned first line."""
    out = ["csisense-report = v1"]
    out += [f"{k} = {v}" for k, v in lines]
    atomic_write_bytes(path, ("\n".join(out) + "\n").encode())


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
