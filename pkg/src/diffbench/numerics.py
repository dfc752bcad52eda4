"""Deterministic tensor arithmetic and dense linear algebra.

Tensors are plain numpy float32 arrays (row-major); reductions and all
statistics run in float64. The eigensolver is cyclic Jacobi, which is
deterministic and robust for the dimensions this package needs (d <= ~512).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    KernelTooLarge,
    NoConvergence,
    NonSymmetric,
    NotPSD,
    ShapeMismatch,
    TooFewSamples,
)
from .rng import RngStream

SYM_TOL = 1e-6
PSD_TOL = 1e-6


def as_tensor(x) -> np.ndarray:
    """Coerce to a float32 ndarray and require finite values."""
    t = np.ascontiguousarray(x, dtype=np.float32)
    if not np.isfinite(t).all():
        raise ValueError("tensor contains NaN/Inf")
    return t


@dataclass
class GaussianStats:
    """Mean vector and covariance matrix of a fitted Gaussian."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ShapeMismatch(f"cov shape {self.cov.shape} vs mean dim {d}")
        _check_symmetric(self.cov, SYM_TOL)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _check_symmetric(m: np.ndarray, tol: float) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"expected square matrix, got {m.shape}")
    gap = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if gap > tol:
        raise NonSymmetric(f"asymmetry {gap:.3e} exceeds tolerance {tol:.1e}")


def gaussian_sample(rng: RngStream, shape) -> np.ndarray:
    """I.i.d. standard-normal tensor of the given shape; advances rng."""
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0 or any(s <= 0 for s in shape):
        raise ValueError(f"shape must be nonempty with positive dims, got {shape}")
    n = int(np.prod(shape))
    return rng.normal(n).astype(np.float32).reshape(shape)


def sym_eig(m: np.ndarray, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues descending, eigenvector columns). Reconstruction
    V @ diag(w) @ V.T matches m to ~1e-4 relative to the spectral norm.
    """
    m = np.asarray(m, dtype=np.float64)
    _check_symmetric(m, SYM_TOL)
    a = 0.5 * (m + m.T)
    d = a.shape[0]
    v = np.eye(d)
    if d == 1:
        return a.diagonal().copy(), v

    scale = max(float(np.abs(a).max()), 1.0)
    tol = 1e-10 * scale
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off < tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) < 1e-300:
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
                a[p, q] = a[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    else:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = a.diagonal().copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-PSD_TOL*scale, 0) are clamped to 0; anything lower
    raises NotPSD.
    """
    w, v = sym_eig(m)
    scale = max(float(w.max(initial=0.0)), 1.0)
    if w.min(initial=0.0) < -PSD_TOL * scale:
        raise NotPSD(f"eigenvalue {w.min():.3e} below -{PSD_TOL:.0e}*scale")
    w = np.clip(w, 0.0, None)
    r = (v * np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


def mean_cov(samples: np.ndarray) -> GaussianStats:
    """Sample mean and unbiased covariance of an N x d matrix."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ShapeMismatch(f"expected N x d matrix, got shape {samples.shape}")
    n = samples.shape[0]
    if n < 2:
        raise TooFewSamples(f"need N >= 2 samples, got {n}")
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianStats(mean=mean, cov=cov)


def conv2d(image: np.ndarray, kernel: np.ndarray, padding: str = "reflect") -> np.ndarray:
    """Per-channel 2-D correlation preserving the input shape.

    image: C x H x W; kernel: k x k with odd k <= min(H, W).
    """
    image = np.asarray(image, dtype=np.float32)
    kernel = np.asarray(kernel, dtype=np.float64)
    if image.ndim != 3:
        raise ShapeMismatch(f"expected C x H x W image, got {image.shape}")
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ShapeMismatch(f"expected square kernel, got {kernel.shape}")
    k = kernel.shape[0]
    _, h, w = image.shape
    if k % 2 == 0:
        raise KernelTooLarge(f"kernel size must be odd, got {k}")
    if k > min(h, w):
        raise KernelTooLarge(f"kernel {k} exceeds image side {min(h, w)}")
    if padding not in ("reflect", "zero"):
        raise ValueError(f"unknown padding {padding!r}")

    r = k // 2
    mode = "reflect" if padding == "reflect" else "constant"
    padded = np.pad(image, ((0, 0), (r, r), (r, r)), mode=mode).astype(np.float64)
    out = np.zeros((image.shape[0], h, w), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            if kernel[i, j] == 0.0:
                continue
            out += kernel[i, j] * padded[:, i:i + h, j:j + w]
    return out.astype(np.float32)
