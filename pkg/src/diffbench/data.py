"""Dataset ingestion, synthesis, normalization, and augmentation.

Pixel domains are tracked explicitly: corruption operates on the unit
domain [0, 1], training on the signed domain [-1, 1]; conversions are the
exact affine pair x -> 2x - 1 and its inverse.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corruptions import diamond_square, resample_plasma
from .errors import (
    BadMagic,
    BadSide,
    DimOverflow,
    DomainMismatch,
    NotPSD,
    ShapeMismatch,
    TruncatedFile,
    UnsupportedFormat,
)
from .numerics import sym_eig
from .rng import RngStream

UNIT = "unit"
SIGNED = "signed"

CONTAINER_MAGIC = b"DFC1"
CONTAINER_VERSION = 1
DTYPE_F32_LE = 0

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801
MAX_IDX_DIM = 1 << 28


@dataclass
class Dataset:
    name: str
    images: np.ndarray          # N x C x H x W float32
    pixel_domain: str = UNIT
    labels: np.ndarray | None = None
    unbounded: bool = False     # synthetic Gaussian data may exceed the domain

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        if self.images.ndim != 4:
            raise ShapeMismatch(f"images must be N x C x H x W, got {self.images.shape}")
        n, c = self.images.shape[:2]
        if n < 1 or c not in (1, 3):
            raise ShapeMismatch(f"need N >= 1 and C in (1, 3), got N={n} C={c}")
        if self.pixel_domain not in (UNIT, SIGNED):
            raise ValueError(f"unknown pixel domain {self.pixel_domain!r}")
        if not self.unbounded:
            lo, hi = (0.0, 1.0) if self.pixel_domain == UNIT else (-1.0, 1.0)
            if float(self.images.min()) < lo - 1e-6 or float(self.images.max()) > hi + 1e-6:
                raise DomainMismatch(f"pixels outside declared {self.pixel_domain} domain")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ShapeMismatch("labels must be a length-N vector")

    @property
    def n(self) -> int:
        return self.images.shape[0]


def require_domain(d: Dataset, domain: str) -> Dataset:
    if d.pixel_domain != domain:
        raise DomainMismatch(f"expected {domain} domain, got {d.pixel_domain}")
    return d


def to_signed(d: Dataset) -> Dataset:
    require_domain(d, UNIT)
    return Dataset(name=d.name, images=2.0 * d.images - 1.0,
                   pixel_domain=SIGNED, labels=d.labels, unbounded=d.unbounded)


def to_unit(d: Dataset) -> Dataset:
    require_domain(d, SIGNED)
    return Dataset(name=d.name, images=0.5 * (d.images + 1.0),
                   pixel_domain=UNIT, labels=d.labels, unbounded=d.unbounded)


# ---------------------------------------------------------------- container

def save_tensor(x: np.ndarray, path) -> None:
    """Write one float32 tensor in the DFC1 container format."""
    x = np.ascontiguousarray(x, dtype="<f4")
    dims = x.shape
    with open(path, "wb") as fh:
        fh.write(CONTAINER_MAGIC)
        fh.write(struct.pack("<BBB", CONTAINER_VERSION, DTYPE_F32_LE, len(dims)))
        for d in dims:
            fh.write(struct.pack("<I", d))
        fh.write(x.tobytes())


def load_tensor(path) -> np.ndarray:
    """Read a DFC1 container; round-trips save_tensor bit-exactly."""
    raw = Path(path).read_bytes()
    if len(raw) < 7:
        raise TruncatedFile(f"{path}: too short for a container header")
    if raw[:4] != CONTAINER_MAGIC:
        raise BadMagic(f"{path}: bad magic {raw[:4]!r}")
    version, dtype, rank = struct.unpack("<BBB", raw[4:7])
    if version != CONTAINER_VERSION or dtype != DTYPE_F32_LE:
        raise UnsupportedFormat(f"{path}: version {version} dtype {dtype}")
    need = 7 + 4 * rank
    if len(raw) < need:
        raise TruncatedFile(f"{path}: truncated dims")
    dims = struct.unpack(f"<{rank}I", raw[7:need])
    count = int(np.prod(dims)) if rank else 1
    if len(raw) != need + 4 * count:
        raise TruncatedFile(f"{path}: payload length mismatch")
    return np.frombuffer(raw[need:], dtype="<f4").reshape(dims).copy()


# ---------------------------------------------------------------------- IDX

def _read_idx(path):
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise TruncatedFile(f"{path}: too short for IDX magic")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic not in (IDX_MAGIC_IMAGES, IDX_MAGIC_LABELS):
        raise BadMagic(f"{path}: magic 0x{magic:08x}")
    rank = 3 if magic == IDX_MAGIC_IMAGES else 1
    need = 4 + 4 * rank
    if len(raw) < need:
        raise TruncatedFile(f"{path}: truncated dims")
    dims = struct.unpack(f">{rank}I", raw[4:need])
    if any(d > MAX_IDX_DIM for d in dims):
        raise DimOverflow(f"{path}: dims {dims}")
    count = int(np.prod(dims))
    if len(raw) < need + count:
        raise TruncatedFile(f"{path}: body shorter than header claims")
    body = np.frombuffer(raw[need:need + count], dtype=np.uint8)
    return magic, body.reshape(dims)


def load_idx(path, labels_path=None) -> Dataset:
    """Load IDX images (and optional IDX labels) as a unit-domain dataset."""
    magic, body = _read_idx(path)
    if magic != IDX_MAGIC_IMAGES:
        raise BadMagic(f"{path}: expected image magic, got 0x{magic:08x}")
    images = (body.astype(np.float32) / 255.0)[:, None, :, :]
    labels = None
    if labels_path is not None:
        lmagic, lbody = _read_idx(labels_path)
        if lmagic != IDX_MAGIC_LABELS:
            raise BadMagic(f"{labels_path}: expected label magic")
        labels = lbody.astype(np.int64)
    return Dataset(name=Path(path).stem, images=images, pixel_domain=UNIT, labels=labels)


def save_idx_images(images_u8: np.ndarray, path) -> None:
    """Write N x H x W uint8 images in IDX format (mostly a test fixture)."""
    images_u8 = np.ascontiguousarray(images_u8, dtype=np.uint8)
    n, h, w = images_u8.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_MAGIC_IMAGES, n, h, w))
        fh.write(images_u8.tobytes())


# ---------------------------------------------------------------------- PPM

def save_ppm(image: np.ndarray, path) -> None:
    """Write one unit-domain C x H x W image as binary PGM (C=1) or PPM (C=3)."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise ShapeMismatch(f"expected 1xHxW or 3xHxW, got {image.shape}")
    c, h, w = image.shape
    body = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n" if c == 1 else b"P6\n")
        fh.write(f"{w} {h}\n255\n".encode("ascii"))
        if c == 1:
            fh.write(body[0].tobytes())
        else:
            fh.write(body.transpose(1, 2, 0).tobytes())  # interleave RGB


def load_ppm(path) -> np.ndarray:
    """Read a binary P5/P6 file into a unit-domain C x H x W tensor."""
    raw = Path(path).read_bytes()
    if raw[:2] not in (b"P5", b"P6"):
        raise UnsupportedFormat(f"{path}: not a binary P5/P6 file")
    gray = raw[:2] == b"P5"
    # header tokens: width height maxval, separated by whitespace/comments
    pos, tokens = 2, []
    while len(tokens) < 3:
        if pos >= len(raw):
            raise TruncatedFile(f"{path}: incomplete header")
        ch = raw[pos:pos + 1]
        if ch == b"#":
            while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos:pos + 1].isspace():
                pos += 1
            tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: maxval {maxval} unsupported")
    c = 1 if gray else 3
    count = c * h * w
    body = raw[pos:pos + count]
    if len(body) < count:
        raise TruncatedFile(f"{path}: body shorter than {count} bytes")
    pixels = np.frombuffer(body, dtype=np.uint8)
    if gray:
        img = pixels.reshape(1, h, w)
    else:
        img = pixels.reshape(h, w, 3).transpose(2, 0, 1)
    return img.astype(np.float32) / 255.0


# ---------------------------------------------------------------- synthesis

def synth_gaussian_dataset(n: int, mean, cov, shape, rng: RngStream,
                           name: str = "gaussian") -> Dataset:
    """Draws from N(mean, cov) reshaped to images; declared signed domain.

    Sampling goes through the covariance eigenbasis (no Cholesky), so any
    PSD covariance, including singular ones, is valid.
    """
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    cov = np.asarray(cov, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != mean.size:
        raise ShapeMismatch(f"shape {shape} vs mean dim {mean.size}")
    w, v = sym_eig(cov)
    if w.min(initial=0.0) < -1e-6 * max(w.max(initial=0.0), 1.0):
        raise NotPSD(f"covariance eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    z = rng.normal(n * mean.size).reshape(n, mean.size)
    samples = mean + (z * np.sqrt(w)) @ v.T
    images = samples.astype(np.float32).reshape((n,) + shape)
    return Dataset(name=name, images=images, pixel_domain=SIGNED, unbounded=True)


TINTS = {"red": 0, "green": 1, "blue": 2}


def synth_fractal_dataset(n: int, side: int, tint: str, rng: RngStream) -> Dataset:
    """Plasma-fractal images through a tint colormap; unit domain.

    The dominant channel carries the plasma field, the other two carry a
    quarter of it.
    """
    side = int(side)
    if side > 257 or side < 2:
        raise BadSide(f"side must be in [2, 257], got {side}")
    if tint not in TINTS:
        raise ValueError(f"tint must be one of {sorted(TINTS)}, got {tint!r}")
    k = 1
    while (1 << k) + 1 < side:
        k += 1
    chan = TINTS[tint]
    images = np.empty((n, 3, side, side), dtype=np.float32)
    for i in range(n):
        grid = diamond_square(k, roughness=1.0, decay=2.0, rng=rng)
        plasma = resample_plasma(grid, side, side)
        for c in range(3):
            images[i, c] = plasma if c == chan else 0.25 * plasma
    return Dataset(name=f"fractal_{tint}", images=images, pixel_domain=UNIT)


def augment(d: Dataset, factor: int, rng: RngStream) -> Dataset:
    """Grow a dataset by flips, 90-degree rotations, and reflect-padded crops.

    Output has n * factor images; the originals are kept verbatim.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return d
    images = d.images
    n, c, h, w = images.shape
    pad = max(h // 8, 1)
    out = [images]
    for _ in range(factor - 1):
        batch = np.empty_like(images)
        flips = rng.uniform(n) < 0.5
        rots = rng.integers(n, 0, 4)
        offy = rng.integers(n, 0, 2 * pad + 1)
        offx = rng.integers(n, 0, 2 * pad + 1)
        for i in range(n):
            img = images[i]
            if flips[i]:
                img = img[:, :, ::-1]
            img = np.rot90(img, k=int(rots[i]), axes=(1, 2))
            padded = np.pad(img, ((0, 0), (pad, pad), (pad, pad)), mode="reflect")
            y, x = int(offy[i]), int(offx[i])
            batch[i] = padded[:, y:y + h, x:x + w]
        out.append(batch)
    labels = None
    if d.labels is not None:
        labels = np.tile(d.labels, factor)
    return Dataset(name=d.name, images=np.concatenate(out),
                   pixel_domain=d.pixel_domain, labels=labels)
