"""Texture features over CSI-rendered grayscale images.

A stream matrix becomes an image (streams vertical, time horizontal); two
descriptor families are extracted from it: Gabor filter-bank response
statistics and bag-of-words histograms over dense gradient descriptors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .preprocess import StreamMatrix

__all__ = [
    "ChannelImage",
    "FeatureKind",
    "FeatureVector",
    "GaborBank",
    "Codebook",
    "to_image",
    "gabor_features",
    "sift_descriptors",
    "train_codebook",
    "bow_quantize",
]


@dataclass(frozen=True)
class ChannelImage:
    """Grayscale image with pixels in [0, 1]; source_pair=-1 means stacked."""

    pixels: np.ndarray
    source_pair: int = -1

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"pixels must be a 2-D image, got shape {p.shape}")
        if not np.isfinite(p).all():
            raise ValueError("pixels must be finite")
        if p.min() < -1e-9 or p.max() > 1.0 + 1e-9:
            raise ValueError("pixels must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


class FeatureKind(enum.Enum):
    GABOR = "gabor"
    BOW_SIFT = "bow-sift"


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    kind: FeatureKind
    pair: int = -1

    def __post_init__(self):
        v = self.values
        if v.ndim != 1:
            raise ValueError(f"feature values must be 1-D, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("feature values must be finite")
        if self.kind is FeatureKind.BOW_SIFT and (v < 0).any():
            raise ValueError("bag-of-words histograms are non-negative")


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize; identity when the size already matches."""
    h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    rows = np.linspace(0.0, h - 1.0, out_h) if out_h > 1 else np.array([(h - 1) / 2.0])
    cols = np.linspace(0.0, w - 1.0, out_w) if out_w > 1 else np.array([(w - 1) / 2.0])
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    top = img[np.ix_(r0, c0)] * (1.0 - fc) + img[np.ix_(r0, c1)] * fc
    bot = img[np.ix_(r1, c0)] * (1.0 - fc) + img[np.ix_(r1, c1)] * fc
    return top * (1.0 - fr) + bot * fr


def to_image(m: StreamMatrix, out_h: int, out_w: int, source_pair: int = -1) -> ChannelImage:
    """Render a stream matrix as a grayscale image.

    Values are min-max normalized to [0, 1] (a constant matrix maps to 0.5),
    the matrix is transposed so streams run down the vertical axis and time
    along the horizontal one, then resized by bilinear interpolation.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be >= 1x1, got {out_h}x{out_w}")
    v = m.values
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-300:
        norm = np.full_like(v, 0.5)
    else:
        norm = (v - lo) / (hi - lo)
    pixels = _resize_bilinear(norm.T, out_h, out_w)
    return ChannelImage(pixels=np.clip(pixels, 0.0, 1.0), source_pair=source_pair)


def _gabor_kernel(size: int, wavelength: float, theta: float,
                  sigma_ratio: float, aspect: float) -> np.ndarray:
    """Plane wave times a Gaussian envelope, complex-valued, size x size."""
    half = size // 2
    ys, xs = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    x_r = xs * math.cos(theta) + ys * math.sin(theta)
    y_r = -xs * math.sin(theta) + ys * math.cos(theta)
    sigma = sigma_ratio * wavelength
    envelope = np.exp(-(x_r ** 2 + (aspect * y_r) ** 2) / (2.0 * sigma ** 2))
    return envelope * np.exp(2j * np.pi * x_r / wavelength)


@dataclass(frozen=True)
class GaborBank:
    """Immutable bank of n_scales x n_orientations complex Gabor kernels.

    Orientations step by pi/n_orientations; wavelengths grow geometrically
    from base_wavelength by sqrt(2) per scale.  theta=0 kernels oscillate
    along the horizontal (time) axis.
    """

    n_scales: int = 8
    n_orientations: int = 6
    kernel_size: int = 15
    base_wavelength: float = 4.0
    sigma_ratio: float = 0.56
    aspect: float = 0.5
    kernels: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_scales < 1 or self.n_orientations < 1:
            raise ValueError("need at least one scale and one orientation")
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 3, got {self.kernel_size}")
        kernels = []
        for s in range(self.n_scales):
            lam = self.base_wavelength * (math.sqrt(2.0) ** s)
            for o in range(self.n_orientations):
                theta = o * math.pi / self.n_orientations
                kernels.append(_gabor_kernel(self.kernel_size, lam, theta,
                                             self.sigma_ratio, self.aspect))
        object.__setattr__(self, "kernels", tuple(kernels))
        object.__setattr__(self, "_fft_cache", {})

    def __len__(self) -> int:
        return self.n_scales * self.n_orientations

    def dc_gains(self) -> np.ndarray:
        """|sum of kernel| per kernel: the response magnitude to a unit image."""
        return np.array([abs(k.sum()) for k in self.kernels])

    def _kernel_ffts(self, shape: tuple[int, int]) -> np.ndarray:
        cache = getattr(self, "_fft_cache")
        if shape not in cache:
            k = self.kernel_size
            stack = np.zeros((len(self.kernels), *shape), dtype=np.complex128)
            for i, kern in enumerate(self.kernels):
                stack[i, :k, :k] = kern
            cache[shape] = np.fft.fft2(stack, axes=(-2, -1))
        return cache[shape]

    def responses(self, pixels: np.ndarray) -> np.ndarray:
        """Complex same-size convolution of the image with every kernel.

        The image is reflect-padded by half the kernel size; the circular
        FFT convolution is exact on the retained window.
        """
        h, w = pixels.shape
        half = self.kernel_size // 2
        if h < self.kernel_size or w < self.kernel_size:
            raise ValueError(f"image {h}x{w} smaller than kernel {self.kernel_size}")
        padded = np.pad(pixels, half, mode="reflect")
        f_img = np.fft.fft2(padded)
        full = np.fft.ifft2(f_img[None, :, :] * self._kernel_ffts(padded.shape), axes=(-2, -1))
        return full[:, 2 * half:2 * half + h, 2 * half:2 * half + w]


def gabor_features(img: ChannelImage, bank: GaborBank) -> FeatureVector:
    """Mean and population std of each kernel's response magnitude.

    Ordered scale-major, then orientation, with (mean, std) interleaved:
    the default 8x6 bank yields 96 values.
    """
    mags = np.abs(bank.responses(img.pixels))
    out = np.empty(2 * len(bank))
    out[0::2] = mags.mean(axis=(1, 2))
    out[1::2] = mags.std(axis=(1, 2))
    return FeatureVector(values=out, kind=FeatureKind.GABOR, pair=img.source_pair)


def sift_descriptors(img: ChannelImage, stride: int = 8, patch: int = 16) -> np.ndarray:
    """Dense gradient-orientation descriptors on a fixed grid.

    Each patch is split into 4x4 cells; per cell an 8-bin gradient
    orientation histogram weighted by gradient magnitude is accumulated,
    giving 128 dims.  Descriptors are L2-normalized, clamped at 0.2 and
    renormalized; all-zero gradients yield a zero descriptor.
    """
    h, w = img.pixels.shape
    if h < 32 or w < 32:
        raise ValueError(f"image {h}x{w} too small for descriptors (need >= 32x32)")
    if patch % 4 != 0:
        raise ValueError("patch must be divisible by 4")
    gy, gx = np.gradient(img.pixels)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)
    bins = np.minimum((ang / (2.0 * np.pi / 8.0)).astype(np.intp), 7)

    cell = patch // 4
    cell_idx = (np.arange(patch)[:, None] // cell) * 4 + (np.arange(patch)[None, :] // cell)
    descs = []
    for y0 in range(0, h - patch + 1, stride):
        for x0 in range(0, w - patch + 1, stride):
            comb = cell_idx * 8 + bins[y0:y0 + patch, x0:x0 + patch]
            hist = np.bincount(comb.ravel(), weights=mag[y0:y0 + patch, x0:x0 + patch].ravel(),
                               minlength=128)
            norm = np.linalg.norm(hist)
            if norm > 1e-12:
                hist = np.minimum(hist / norm, 0.2)
                norm = np.linalg.norm(hist)
                if norm > 1e-12:
                    hist = hist / norm
            descs.append(hist)
    return np.asarray(descs, dtype=np.float64)


@dataclass(frozen=True)
class Codebook:
    """K-means centroids over descriptor space, plus training metadata."""

    centroids: np.ndarray
    train_meta: dict

    def __post_init__(self):
        c = self.centroids
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError(f"centroids must be (k, dim), got shape {c.shape}")
        if not np.isfinite(c).all():
            raise ValueError("centroids must be finite")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def train_codebook(descs: np.ndarray, k: int = 48, seed: int = 0) -> Codebook:
    """K-means with k-means++ init and Lloyd iterations.

    Stops when the inertia improvement falls below 1e-6 or after 100
    iterations; inertia is non-increasing across iterations.  Requires at
    least k distinct descriptors.
    """
    x = np.asarray(descs, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"descriptors must be (n, dim), got shape {x.shape}")
    if np.unique(x, axis=0).shape[0] < k:
        raise ValueError(f"need at least {k} distinct descriptors")
    rng = np.random.default_rng(seed)
    n = x.shape[0]

    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = cdist(x, centroids[:1], "sqeuclidean")[:, 0]
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass on already-chosen points; spread uniformly
            centroids[i] = x[rng.integers(n)]
        else:
            centroids[i] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, cdist(x, centroids[i:i + 1], "sqeuclidean")[:, 0])

    inertia_path = []
    prev = math.inf
    iterations = 0
    for _ in range(100):
        dists = cdist(x, centroids, "sqeuclidean")
        assign = dists.argmin(axis=1)
        inertia = float(dists[np.arange(n), assign].sum())
        inertia_path.append(inertia)
        iterations += 1
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, x)
        nonempty = counts > 0
        new_centroids = centroids.copy()  # empty clusters keep their centroid
        new_centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        if prev - inertia < 1e-6:
            break
        prev = inertia
        centroids = new_centroids

    return Codebook(centroids=centroids,
                    train_meta={"seed": seed, "iterations": iterations,
                                "inertia_path": tuple(inertia_path)})


def bow_quantize(descs: np.ndarray, cb: Codebook, pair: int = -1) -> FeatureVector:
    """L1-normalized histogram of nearest-centroid assignments.

    Ties break toward the lowest centroid index; an empty descriptor list
    yields the all-zero histogram.
    """
    x = np.asarray(descs, dtype=np.float64)
    if x.size == 0:
        return FeatureVector(values=np.zeros(cb.k), kind=FeatureKind.BOW_SIFT, pair=pair)
    assign = cdist(x, cb.centroids, "sqeuclidean").argmin(axis=1)
    hist = np.bincount(assign, minlength=cb.k).astype(np.float64)
    return FeatureVector(values=hist / hist.sum(), kind=FeatureKind.BOW_SIFT, pair=pair)
