"""End-to-end glue: pipeline configuration, trace -> stream -> image ->
feature extraction, and feature-set assembly from a dataset manifest.

Feature extraction per trace is pure, so it can fan out over processes and
optionally persist results in a cache directory keyed by trace content and
the feature-relevant part of the config.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import denoise, features, preprocess
from .errors import UsageError
from .files import DatasetManifest, config_hash, read_trace
from .learn import FeatureSet, SampleMeta
from .model import CsiTrace

__all__ = ["PipelineConfig", "SVD_SCOPES", "extract_stream", "pair_images",
           "extract_trace_features", "build_feature_set", "fast_preset"]

SVD_SCOPES = ("none", "per-pair", "stacked")
_PIPELINE_NAMES = {
    "none": "none",
    "svd30": "per-pair",
    "svd120": "stacked",
}


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the processing chain, serializable to a flat dict."""

    target_rate: float = 1000.0
    lowpass_order: int = 5
    lowpass_cutoff: float = 50.0
    window_s: float = 0.3
    svd_scope: str = "stacked"
    svd_remove: int = 1
    feature_kind: str = "gabor"
    image_h: int = 432
    image_w: int = 576
    gabor_scales: int = 8
    gabor_orientations: int = 6
    gabor_size: int = 15
    sift_stride: int = 8
    sift_patch: int = 16
    bow_k: int = 48
    fusion: str = "late"
    reg_c: float = 1.0
    target: str = "action"
    seed: int = 0

    def __post_init__(self):
        if self.svd_scope not in SVD_SCOPES:
            raise UsageError(f"svd_scope must be one of {SVD_SCOPES}, got {self.svd_scope!r}")
        if self.feature_kind not in ("gabor", "bow-sift"):
            raise UsageError(f"feature_kind must be 'gabor' or 'bow-sift', got {self.feature_kind!r}")
        if self.fusion not in ("early", "late"):
            raise UsageError(f"fusion must be 'early' or 'late', got {self.fusion!r}")
        if self.target not in ("action", "person", "room", "location"):
            raise UsageError(f"target must be a label field, got {self.target!r}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown pipeline config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise UsageError(f"bad pipeline config: {exc}") from exc

    def with_shorthand(self, name: str) -> "PipelineConfig":
        """Apply a grid shorthand like ``svd120-1svm`` or ``none-4svm``.

        The SVD part picks the scope; 1svm trains one classifier on
        concatenated features (early fusion), 4svm one per pair (late).
        """
        try:
            svd_part, svm_part = name.lower().split("-")
            scope = _PIPELINE_NAMES[svd_part]
            fusion = {"1svm": "early", "4svm": "late"}[svm_part]
        except (ValueError, KeyError):
            raise UsageError(f"unknown pipeline shorthand {name!r} "
                             f"(expected e.g. svd120-1svm, none-4svm)") from None
        return replace(self, svd_scope=scope, fusion=fusion)

    def feature_relevant_dict(self) -> dict:
        """The subset of the config that determines extracted features."""
        keys = ["target_rate", "lowpass_order", "lowpass_cutoff", "window_s",
                "svd_scope", "svd_remove", "feature_kind", "image_h", "image_w"]
        if self.feature_kind == "gabor":
            keys += ["gabor_scales", "gabor_orientations", "gabor_size"]
        else:
            keys += ["sift_stride", "sift_patch"]
        return {k: getattr(self, k) for k in keys}


def fast_preset(**overrides) -> PipelineConfig:
    """Small-image preset: 72x54 pixels with 9-pixel kernels."""
    base = dict(image_h=54, image_w=72, gabor_size=9, target_rate=250.0)
    base.update(overrides)
    return PipelineConfig(**base)


@lru_cache(maxsize=8)
def _bank(scales: int, orients: int, size: int) -> features.GaborBank:
    return features.GaborBank(n_scales=scales, n_orientations=orients, kernel_size=size)


def extract_stream(trace: CsiTrace, cfg: PipelineConfig,
                   stage: str = "denoised") -> preprocess.StreamMatrix:
    """Run the preprocessing chain up to the requested stage.

    Stages: ``raw`` (amplitudes only), ``preprocessed`` (interpolated,
    filtered, mean-removed), ``denoised`` (plus SVD background removal).
    """
    if stage == "raw":
        n, p, s = trace.gains.shape
        stream_map = tuple((i, j) for i in range(p) for j in range(s))
        return preprocess.StreamMatrix(values=np.abs(trace.gains).reshape(n, p * s),
                                       rate=trace.meta.nominal_rate, stream_map=stream_map)
    m = preprocess.interpolate(trace, cfg.target_rate)
    m = preprocess.lowpass(m, order=cfg.lowpass_order, cutoff=cfg.lowpass_cutoff)
    m = preprocess.normalize(m, window_s=cfg.window_s)
    if stage == "preprocessed":
        return m
    if stage != "denoised":
        raise UsageError(f"unknown stage {stage!r} (raw, preprocessed, denoised)")
    if cfg.svd_scope == "per-pair":
        m = denoise.remove_background(m, denoise.SvdMode.PER_PAIR, n_remove=cfg.svd_remove)
    elif cfg.svd_scope == "stacked":
        m = denoise.remove_background(m, denoise.SvdMode.STACKED, n_remove=cfg.svd_remove)
    return m


def pair_images(m: preprocess.StreamMatrix, cfg: PipelineConfig) -> list[features.ChannelImage]:
    """One image per Tx-Rx pair from that pair's subcarrier block."""
    out = []
    for pair in range(m.n_pairs):
        cols = m.pair_columns(pair)
        block = preprocess.StreamMatrix(values=m.values[:, cols], rate=m.rate,
                                        stream_map=tuple(m.stream_map[c] for c in cols))
        out.append(features.to_image(block, cfg.image_h, cfg.image_w, source_pair=pair))
    return out


def extract_trace_features(trace: CsiTrace, cfg: PipelineConfig):
    """Per-pair feature material for one trace.

    Gabor: an array of shape (pairs, dim).  BoW: a tuple of per-pair
    descriptor arrays (codebooks are trained later, per evaluation fold).
    """
    m = extract_stream(trace, cfg, stage="denoised")
    imgs = pair_images(m, cfg)
    if cfg.feature_kind == "gabor":
        bank = _bank(cfg.gabor_scales, cfg.gabor_orientations, cfg.gabor_size)
        return np.stack([features.gabor_features(img, bank).values for img in imgs])
    return tuple(features.sift_descriptors(img, stride=cfg.sift_stride,
                                           patch=cfg.sift_patch) for img in imgs)


def _cache_key(trace_path: str, cfg: PipelineConfig) -> str:
    digest = hashlib.sha256()
    with open(trace_path, "rb") as fh:
        digest.update(fh.read())
    digest.update(config_hash(cfg.feature_relevant_dict()).encode())
    return digest.hexdigest()


def _extract_one(args) -> object:
    trace_path, cfg, cache_dir = args
    if cache_dir:
        key = _cache_key(trace_path, cfg)
        cached = os.path.join(cache_dir, f"{key}.npz")
        if os.path.exists(cached):
            with np.load(cached) as z:
                if cfg.feature_kind == "gabor":
                    return z["features"]
                return tuple(z[f"pair{i}"] for i in range(int(z["n_pairs"])))
    result = extract_trace_features(read_trace(trace_path), cfg)
    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
        tmp = os.path.join(cache_dir, f"{key}.tmp.{os.getpid()}.npz")
        if cfg.feature_kind == "gabor":
            np.savez(tmp, features=result)
        else:
            np.savez(tmp, n_pairs=len(result),
                     **{f"pair{i}": d for i, d in enumerate(result)})
        os.replace(tmp, os.path.join(cache_dir, f"{key}.npz"))
    return result


def build_feature_set(manifest: DatasetManifest, base_dir: str, cfg: PipelineConfig,
                      jobs: int = 1, cache_dir: str | None = None) -> FeatureSet:
    """Extract features for every manifest entry, in manifest order.

    ``jobs`` > 1 fans extraction out over processes; results are joined in
    submission order so parallelism never changes the output.
    """
    paths = [os.path.join(base_dir, e.trace_path) for e in manifest.entries]
    meta = tuple(SampleMeta(action=e.action_label, person=e.person_label,
                            room=e.room_label, location=e.location_label)
                 for e in manifest.entries)
    work = [(p, cfg, cache_dir) for p in paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_one, work, chunksize=4))
    else:
        results = [_extract_one(w) for w in work]

    if cfg.feature_kind == "gabor":
        return FeatureSet(kind=features.FeatureKind.GABOR, meta=meta,
                          features=np.stack(results))
    return FeatureSet(kind=features.FeatureKind.BOW_SIFT, meta=meta,
                      descriptors=tuple(results))
