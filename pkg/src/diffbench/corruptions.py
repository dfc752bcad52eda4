"""Image corruption operators with five severity tiers each.

All operators map a C x H x W image with pixels in [0, 1] to another image
in [0, 1], taking their randomness from an explicit RngStream. Severity
indexes a fixed parameter table; constructing a CorruptionSpec through
that table is the only way to obtain parameter values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadDetailLevel, ShapeMismatch
from .numerics import conv2d
from .rng import RngStream


class CorruptionKind(enum.Enum):
    IDENTITY = "identity"
    IMPULSE_NOISE = "impulse"
    SHOT_NOISE = "shot"
    GLASS_BLUR = "glass"
    MOTION_BLUR = "motion"
    BRIGHTNESS = "brightness"
    FOG = "fog"
    SPATTER = "spatter"
    FRACTAL_OVERLAY = "fractal_overlay"

    @classmethod
    def parse(cls, name: str) -> "CorruptionKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown corruption kind {name!r}")


# canonical kind ordering and grouping, used for report column layout
KIND_ORDER = [
    CorruptionKind.IDENTITY,
    CorruptionKind.IMPULSE_NOISE,
    CorruptionKind.SHOT_NOISE,
    CorruptionKind.GLASS_BLUR,
    CorruptionKind.MOTION_BLUR,
    CorruptionKind.BRIGHTNESS,
    CorruptionKind.FOG,
    CorruptionKind.SPATTER,
    CorruptionKind.FRACTAL_OVERLAY,
]

KIND_GROUPS = {
    CorruptionKind.IDENTITY: "Clear",
    CorruptionKind.IMPULSE_NOISE: "Noise",
    CorruptionKind.SHOT_NOISE: "Noise",
    CorruptionKind.GLASS_BLUR: "Blur",
    CorruptionKind.MOTION_BLUR: "Blur",
    CorruptionKind.BRIGHTNESS: "Weather",
    CorruptionKind.FOG: "Weather",
    CorruptionKind.SPATTER: "Extra",
    CorruptionKind.FRACTAL_OVERLAY: "Extra",
}


@dataclass(frozen=True)
class Severity:
    level: int

    def __post_init__(self):
        if not (1 <= int(self.level) <= 5):
            raise ValueError(f"severity level must be in [1, 5], got {self.level}")


_SEVERITY_TABLE = {
    CorruptionKind.IDENTITY: [{}] * 5,
    CorruptionKind.IMPULSE_NOISE: [{"p": p} for p in (0.03, 0.06, 0.09, 0.17, 0.27)],
    CorruptionKind.SHOT_NOISE: [{"c": c} for c in (60.0, 25.0, 12.0, 5.0, 3.0)],
    CorruptionKind.GLASS_BLUR: [
        {"sigma": s, "delta": d, "iters": i}
        for s, d, i in ((0.7, 1, 2), (0.9, 2, 1), (1.0, 2, 3), (1.1, 3, 2), (1.5, 4, 2))
    ],
    CorruptionKind.MOTION_BLUR: [{"length": L} for L in (5, 7, 9, 11, 13)],
    CorruptionKind.BRIGHTNESS: [{"b": b} for b in (0.1, 0.2, 0.3, 0.4, 0.5)],
    CorruptionKind.FOG: [
        {"strength": s, "decay": d}
        for s, d in ((1.5, 2.0), (2.0, 2.0), (2.5, 1.7), (2.5, 1.5), (3.0, 1.4))
    ],
    CorruptionKind.SPATTER: [
        {"sigma": s, "threshold": t, "w": w}
        for s, t, w in ((1.0, 0.65, 0.3), (1.0, 0.6, 0.35), (1.0, 0.55, 0.4),
                        (1.5, 0.5, 0.45), (1.5, 0.45, 0.5))
    ],
    CorruptionKind.FRACTAL_OVERLAY: [{"beta": b} for b in (0.1, 0.2, 0.3, 0.4, 0.5)],
}


def severity_params(kind: CorruptionKind, severity: Severity) -> dict:
    """Fixed parameter row for (kind, severity); total and deterministic."""
    return dict(_SEVERITY_TABLE[kind][severity.level - 1])


@dataclass(frozen=True)
class CorruptionSpec:
    kind: CorruptionKind
    severity: Severity
    params: dict = field(default_factory=dict)

    @classmethod
    def make(cls, kind: CorruptionKind | str, level: int) -> "CorruptionSpec":
        if isinstance(kind, str):
            kind = CorruptionKind.parse(kind)
        sev = Severity(level)
        return cls(kind=kind, severity=sev, params=severity_params(kind, sev))


@dataclass
class PlasmaGrid:
    """Square heightfield of side 2^k + 1 with values normalized to [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        side = self.values.shape[0]
        if self.values.shape != (side, side) or side < 3 or ((side - 1) & (side - 2)) != 0:
            raise ShapeMismatch(f"plasma grid must be square of side 2^k+1, got {self.values.shape}")

    @property
    def side(self) -> int:
        return self.values.shape[0]


def _diamond_square_grid(corners, k: int, amplitude: float, decay: float,
                         rng: RngStream | None) -> np.ndarray:
    """Raw diamond-square heightfield before normalization.

    corners are (top-left, top-right, bottom-left, bottom-right); amplitude
    is the offset half-range at the first level and is divided by decay
    after each level. rng=None forces all offsets to zero (test hook).
    """
    side = (1 << k) + 1
    grid = np.zeros((side, side), dtype=np.float64)
    grid[0, 0], grid[0, -1], grid[-1, 0], grid[-1, -1] = corners

    def offsets(n: int, a: float) -> np.ndarray:
        if rng is None or a == 0.0:
            return np.zeros(n)
        return rng.uniform_range(n, -a, a)

    amp = float(amplitude)
    step = side - 1
    while step > 1:
        half = step // 2
        # diamond: centers of each square get the corner mean plus an offset
        ci = np.arange(half, side, step)
        cy, cx = np.meshgrid(ci, ci, indexing="ij")
        mean4 = 0.25 * (grid[cy - half, cx - half] + grid[cy - half, cx + half]
                        + grid[cy + half, cx - half] + grid[cy + half, cx + half])
        grid[cy, cx] = mean4 + offsets(cy.size, amp).reshape(cy.shape)

        # square: edge midpoints get the mean of their in-grid diamond
        # neighbors (3 on the border, 4 inside) plus an offset
        targets_y, targets_x = [], []
        for y in range(0, side, half):
            start = half if (y // half) % 2 == 0 else 0
            for x in range(start, side, step):
                targets_y.append(y)
                targets_x.append(x)
        ty = np.array(targets_y)
        tx = np.array(targets_x)
        acc = np.zeros(ty.size)
        cnt = np.zeros(ty.size)
        for dy, dx in ((-half, 0), (half, 0), (0, -half), (0, half)):
            ny, nx = ty + dy, tx + dx
            ok = (ny >= 0) & (ny < side) & (nx >= 0) & (nx < side)
            acc[ok] += grid[ny[ok], nx[ok]]
            cnt[ok] += 1
        grid[ty, tx] = acc / cnt + offsets(ty.size, amp)

        amp /= decay
        step = half
    return grid


def normalize_plasma(grid: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant grid maps to all zeros."""
    lo, hi = float(grid.min()), float(grid.max())
    if hi - lo <= 0.0:
        return np.zeros_like(grid, dtype=np.float32)
    return ((grid - lo) / (hi - lo)).astype(np.float32)


def diamond_square(k: int, roughness: float, decay: float, rng: RngStream) -> PlasmaGrid:
    """Plasma fractal of side 2^k + 1, normalized to [0, 1]."""
    k = int(k)
    if not (1 <= k <= 12):
        raise BadDetailLevel(f"detail level must be in [1, 12], got {k}")
    if roughness <= 0.0:
        raise ValueError(f"roughness must be > 0, got {roughness}")
    if decay <= 1.0:
        raise ValueError(f"decay must be > 1, got {decay}")
    corners = rng.uniform_range(4, 0.0, roughness)
    grid = _diamond_square_grid(corners, k, roughness, decay, rng)
    return PlasmaGrid(values=normalize_plasma(grid))


def resample_plasma(plasma: PlasmaGrid, h: int, w: int) -> np.ndarray:
    """Bilinearly resample the grid to side max(h, w), then crop top-left."""
    target = max(h, w)
    src = plasma.values.astype(np.float64)
    side = plasma.side
    if side < target:
        raise ShapeMismatch(f"plasma side {side} smaller than target {target}")
    if side == target:
        out = src
    else:
        pos = np.linspace(0.0, side - 1.0, target)
        i0 = np.floor(pos).astype(int)
        i1 = np.minimum(i0 + 1, side - 1)
        frac = pos - i0
        rows = src[i0, :] * (1.0 - frac)[:, None] + src[i1, :] * frac[:, None]
        out = rows[:, i0] * (1.0 - frac)[None, :] + rows[:, i1] * frac[None, :]
    return out[:h, :w].astype(np.float32)


def plasma_for_image(h: int, w: int, decay: float, rng: RngStream) -> np.ndarray:
    """Smallest diamond-square grid covering h x w, resampled and cropped."""
    k = max(1, math.ceil(math.log2(max(h, w) - 1))) if max(h, w) > 2 else 1
    grid = diamond_square(k, roughness=1.0, decay=decay, rng=rng)
    return resample_plasma(grid, h, w)


def fog_blend(image: np.ndarray, plasma: np.ndarray, strength: float) -> np.ndarray:
    """Blend a plasma field into the image with max-preserving rescale."""
    image = np.asarray(image, dtype=np.float32)
    plasma = np.asarray(plasma, dtype=np.float32)
    if strength <= 0.0:
        raise ValueError(f"fog strength must be > 0, got {strength}")
    if image.ndim != 3:
        raise ShapeMismatch(f"expected C x H x W image, got {image.shape}")
    if plasma.shape != image.shape[1:]:
        raise ShapeMismatch(f"plasma {plasma.shape} vs image spatial {image.shape[1:]}")
    m = max(float(image.max()), 1e-6)
    out = (image + strength * plasma[None, :, :]) * (m / (m + strength))
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(2.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-0.5 * (xs / sigma) ** 2)
    k2 = np.outer(k1, k1)
    return k2 / k2.sum()


def _gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    kernel = _gaussian_kernel(sigma)
    k = kernel.shape[0]
    side = min(image.shape[1], image.shape[2])
    if k > side:
        k = side if side % 2 == 1 else side - 1
        r = k // 2
        c = kernel.shape[0] // 2
        kernel = kernel[c - r:c + r + 1, c - r:c + r + 1]
        kernel = kernel / kernel.sum()
    return conv2d(image, kernel, padding="reflect")


def _impulse(image: np.ndarray, p: float, rng: RngStream) -> np.ndarray:
    c, h, w = image.shape
    hit = rng.uniform(h * w).reshape(h, w) < p
    salt = rng.uniform(h * w).reshape(h, w) < 0.5
    out = image.copy()
    out[:, hit & salt] = 1.0
    out[:, hit & ~salt] = 0.0
    return out


def _shot(image: np.ndarray, c: float, rng: RngStream) -> np.ndarray:
    counts = rng.poisson(image.astype(np.float64) * c)
    return np.clip(counts / c, 0.0, 1.0).astype(np.float32)


def _glass(image: np.ndarray, sigma: float, delta: int, iters: int,
           rng: RngStream) -> np.ndarray:
    out = _gaussian_blur(image, sigma)
    _, h, w = out.shape
    delta = int(delta)
    for _ in range(int(iters)):
        dy = rng.integers(h * w, -delta, delta + 1).reshape(h, w)
        dx = rng.integers(h * w, -delta, delta + 1).reshape(h, w)
        for y in range(h - delta - 1, delta - 1, -1):
            for x in range(w - delta - 1, delta - 1, -1):
                ny, nx = y + int(dy[y, x]), x + int(dx[y, x])
                tmp = out[:, y, x].copy()
                out[:, y, x] = out[:, ny, nx]
                out[:, ny, nx] = tmp
    return np.clip(_gaussian_blur(out, sigma), 0.0, 1.0)


def _line_kernel(length: int, angle: float) -> np.ndarray:
    length = int(length)
    kernel = np.zeros((length, length), dtype=np.float64)
    center = length // 2
    if length == 1:
        kernel[0, 0] = 1.0
        return kernel
    dy, dx = math.sin(angle), math.cos(angle)
    for step in np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, 2 * length + 1):
        y = int(round(center + step * dy))
        x = int(round(center + step * dx))
        kernel[y, x] = 1.0
    return kernel / kernel.sum()


def _motion(image: np.ndarray, length: int, rng: RngStream) -> np.ndarray:
    angle = float(rng.uniform_range(1, 0.0, math.pi)[0])
    length = min(int(length), min(image.shape[1], image.shape[2]))
    if length % 2 == 0:
        length -= 1
    kernel = _line_kernel(max(length, 1), angle)
    return np.clip(conv2d(image, kernel, padding="reflect"), 0.0, 1.0)


def _spatter(image: np.ndarray, sigma: float, threshold: float, w: float,
             rng: RngStream) -> np.ndarray:
    _, h, wd = image.shape
    noise = rng.uniform(h * wd).astype(np.float32).reshape(1, h, wd)
    mask = _gaussian_blur(noise, sigma)[0] > threshold
    out = image.copy()
    out[:, mask] += w * (1.0 - out[:, mask])
    return np.clip(out, 0.0, 1.0)


def apply_corruption(image: np.ndarray, spec: CorruptionSpec, rng: RngStream) -> np.ndarray:
    """Dispatch one corruption; output pixels stay in [0, 1]."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3:
        raise ShapeMismatch(f"expected C x H x W image, got {image.shape}")
    if float(image.min()) < 0.0 or float(image.max()) > 1.0:
        raise ValueError("input pixels must lie in [0, 1]")

    kind, p = spec.kind, spec.params
    if kind is CorruptionKind.IDENTITY:
        return image
    if kind is CorruptionKind.IMPULSE_NOISE:
        return _impulse(image, p["p"], rng)
    if kind is CorruptionKind.SHOT_NOISE:
        return _shot(image, p["c"], rng)
    if kind is CorruptionKind.GLASS_BLUR:
        return _glass(image, p["sigma"], p["delta"], p["iters"], rng)
    if kind is CorruptionKind.MOTION_BLUR:
        return _motion(image, p["length"], rng)
    if kind is CorruptionKind.BRIGHTNESS:
        return np.clip(image + p["b"], 0.0, 1.0)
    if kind is CorruptionKind.FOG:
        plasma = plasma_for_image(image.shape[1], image.shape[2], p["decay"], rng)
        return fog_blend(image, plasma, p["strength"])
    if kind is CorruptionKind.SPATTER:
        return _spatter(image, p["sigma"], p["threshold"], p["w"], rng)
    if kind is CorruptionKind.FRACTAL_OVERLAY:
        plasma = plasma_for_image(image.shape[1], image.shape[2], 2.0, rng)
        beta = p["beta"]
        return np.clip((1.0 - beta) * image + beta * plasma[None, :, :], 0.0, 1.0)
    raise ValueError(f"unhandled corruption kind {kind}")


def corrupt_batch(images: np.ndarray, spec: CorruptionSpec, rng: RngStream) -> np.ndarray:
    """Apply one corruption spec to every image in an N x C x H x W batch."""
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 4:
        raise ShapeMismatch(f"expected N x C x H x W batch, got {images.shape}")
    return np.stack([apply_corruption(img, spec, rng) for img in images])
