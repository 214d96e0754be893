"""Location-dependency removal: zero the largest singular value(s) of the
stream matrix and reconstruct.  The dominant singular component carries the
static background energy, so dropping it keeps mostly the motion part."""

from __future__ import annotations

import enum

import numpy as np

from .preprocess import StreamMatrix

__all__ = ["SvdMode", "svd", "remove_background"]


class SvdMode(enum.Enum):
    """Factorize each pair's t x 30 block separately, or the stacked t x 120."""

    PER_PAIR = "per-pair"
    STACKED = "stacked"


def svd(h: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Economy SVD of a real matrix: returns (U, s, Vt) with s non-increasing.

    U @ diag(s) @ Vt reconstructs the input to <= 1e-8 relative Frobenius
    error; s is non-negative.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 1 or h.shape[1] < 1:
        raise ValueError(f"expected a 2-D matrix, got shape {h.shape}")
    if not np.isfinite(h).all():
        raise ValueError("matrix entries must be finite")
    return np.linalg.svd(h, full_matrices=False)


def _drop_top(values: np.ndarray, n_remove: int) -> np.ndarray:
    u, s, vt = svd(values)
    k = min(n_remove, s.shape[0])
    s = s.copy()
    s[:k] = 0.0
    return (u * s) @ vt


def remove_background(m: StreamMatrix, mode: SvdMode = SvdMode.STACKED,
                      n_remove: int = 1) -> StreamMatrix:
    """Reconstruct the stream matrix with its largest singular value(s) zeroed.

    ``mode`` selects whether the factorization runs on the stacked matrix or
    on each pair's subcarrier block independently.  ``n_remove`` defaults to
    one removed component.
    """
    if n_remove < 1:
        raise ValueError(f"n_remove must be >= 1, got {n_remove}")
    if mode is SvdMode.STACKED:
        return m.with_values(_drop_top(m.values, n_remove))
    out = np.empty_like(m.values)
    for pair in range(m.n_pairs):
        cols = m.pair_columns(pair)
        out[:, cols] = _drop_top(m.values[:, cols], n_remove)
    return m.with_values(out)
