"""Independent reference implementations used as test oracles.

These deliberately avoid the library code paths (and LAPACK where the
check targets LAPACK-backed routines): plain loops and textbook formulas.
"""

import numpy as np


def jacobi_eigenvalues(a: np.ndarray, sweeps: int = 30, dtype=np.float64) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by the cyclic Jacobi method.

    Returns eigenvalues sorted descending.  Rotations run until all
    off-diagonal mass is annihilated or the sweep budget ends.
    """
    a = np.array(a, dtype=dtype)
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt((a ** 2).sum() - (np.diag(a) ** 2).sum())
        if off < np.finfo(dtype).eps * max(1.0, float(np.abs(np.diag(a)).max())) * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
    return np.sort(np.diag(a).astype(np.float64))[::-1]


def singular_values_via_gram(h: np.ndarray, dtype=np.float64) -> np.ndarray:
    """Singular values as square roots of the Gram matrix's eigenvalues."""
    h = np.asarray(h, dtype=dtype)
    gram = h.T @ h
    eig = jacobi_eigenvalues(gram, dtype=dtype)
    return np.sqrt(np.maximum(eig, 0.0).astype(np.float64))


def dense_convolve_reflect(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Direct same-size true convolution with reflect padding, O(HWk^2)."""
    k = kernel.shape[0]
    half = k // 2
    padded = np.pad(img, half, mode="reflect")
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.result_type(img.dtype, kernel.dtype))
    for r in range(h):
        for c in range(w):
            acc = 0.0 + 0.0j if np.iscomplexobj(kernel) else 0.0
            for dr in range(-half, half + 1):
                for dc in range(-half, half + 1):
                    acc += kernel[dr + half, dc + half] * padded[r + half - dr, c + half - dc]
            out[r, c] = acc
    return out


def moving_mean_direct(x: np.ndarray, window: int) -> np.ndarray:
    """Centered truncated moving mean by explicit O(T*W) loops."""
    t = x.shape[0]
    left = (window - 1) // 2
    right = window // 2
    out = np.empty_like(x, dtype=np.float64)
    for i in range(t):
        lo = max(i - left, 0)
        hi = min(i + right + 1, t)
        out[i] = x[lo:hi].mean(axis=0)
    return out


def bilinear_at(img: np.ndarray, r: float, c: float) -> float:
    """Hand-evaluated corner-aligned bilinear sample at fractional (r, c)."""
    h, w = img.shape
    r0, c0 = int(np.floor(r)), int(np.floor(c))
    r1, c1 = min(r0 + 1, h - 1), min(c0 + 1, w - 1)
    fr, fc = r - r0, c - c0
    return ((1 - fr) * (1 - fc) * img[r0, c0] + (1 - fr) * fc * img[r0, c1]
            + fr * (1 - fc) * img[r1, c0] + fr * fc * img[r1, c1])


def freq_response_db(b: np.ndarray, a: np.ndarray, freq: float, rate: float) -> float:
    """|H(e^{jw})| in dB by direct polynomial evaluation (no scipy.freqz)."""
    w = 2.0 * np.pi * freq / rate
    z = np.exp(-1j * w * np.arange(len(b)))
    num = np.dot(b, z)
    z = np.exp(-1j * w * np.arange(len(a)))
    den = np.dot(a, z)
    return 20.0 * np.log10(abs(num / den))


def idft_direct(x: np.ndarray) -> np.ndarray:
    """O(S^2) inverse DFT with 1/S normalization."""
    s = len(x)
    n = np.arange(s)
    return np.array([np.sum(x * np.exp(2j * np.pi * k * n / s)) / s for k in range(s)])


def softmax_direct(values: np.ndarray) -> np.ndarray:
    """Reference softmax without the max-shift trick (small inputs only)."""
    e = np.exp(np.asarray(values, dtype=np.float64))
    return e / e.sum()


def spectrum_peak_hz(series: np.ndarray, rate: float) -> float:
    """Frequency of the dominant nonzero-frequency FFT peak."""
    x = np.asarray(series, dtype=np.float64)
    spec = np.abs(np.fft.rfft(x - x.mean()))
    freqs = np.fft.rfftfreq(len(x), 1.0 / rate)
    return float(freqs[1:][np.argmax(spec[1:])])
