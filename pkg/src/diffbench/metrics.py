"""Fréchet-distance generative fidelity scoring.

Features come from pluggable desk-scale maps (raw pixels, a fixed random
projection, or per-patch moments) rather than a pretrained embedding; the
map is recorded in every result so numbers are never conflated across maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionCap, DimMismatch, TooFewSamples
from .numerics import GaussianStats, mean_cov, sqrtm_psd
from .rng import RngStream

FEATURE_DIM_CAP = 512
COV_EIG_FLOOR = 1e-8
COV_RIDGE = 1e-6
NEG_CLAMP = 1e-6

_PROJECTION_STREAM = 0xFEA7


@dataclass(frozen=True)
class FeatureMap:
    """Feature extractor selector: raw_pixels | random_projection | patch_moments."""

    kind: str = "raw_pixels"
    out_dim: int = 0          # random_projection only
    seed: int = 0             # random_projection only
    patch_size: int = 4       # patch_moments only

    def __post_init__(self):
        if self.kind not in ("raw_pixels", "random_projection", "patch_moments"):
            raise ValueError(f"unknown feature map {self.kind!r}")
        if self.kind == "random_projection" and self.out_dim < 1:
            raise ValueError("random_projection requires out_dim >= 1")

    def tag(self) -> str:
        if self.kind == "random_projection":
            return f"random_projection({self.out_dim},seed={self.seed})"
        if self.kind == "patch_moments":
            return f"patch_moments({self.patch_size})"
        return "raw_pixels"


def projection_matrix(seed: int, in_dim: int, out_dim: int) -> np.ndarray:
    """Fixed N(0, 1/out_dim) projection, a pure function of (seed, dims)."""
    rng = RngStream(seed, stream_id=_PROJECTION_STREAM)
    flat = rng.normal(in_dim * out_dim) / np.sqrt(out_dim)
    return flat.reshape(in_dim, out_dim)


def extract_features(images: np.ndarray, fmap: FeatureMap,
                     projection_override: np.ndarray | None = None) -> np.ndarray:
    """N x d feature matrix from an N x C x H x W batch (float64)."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise DimMismatch(f"expected N x C x H x W, got {images.shape}")
    n = images.shape[0]
    if n < 2:
        raise TooFewSamples(f"need at least 2 images, got {n}")
    flat = images.reshape(n, -1)

    if fmap.kind == "raw_pixels":
        feats = flat
    elif fmap.kind == "random_projection":
        proj = projection_override
        if proj is None:
            proj = projection_matrix(fmap.seed, flat.shape[1], fmap.out_dim)
        feats = flat @ proj
    else:
        c, h, w = images.shape[1:]
        ps = fmap.patch_size
        if h % ps or w % ps:
            raise DimMismatch(f"patch size {ps} must divide image sides {h}x{w}")
        patches = images.reshape(n, c, h // ps, ps, w // ps, ps)
        patches = patches.transpose(0, 1, 2, 4, 3, 5).reshape(n, -1, ps * ps)
        means = patches.mean(axis=2)
        stds = patches.std(axis=2)
        feats = np.concatenate([means, stds], axis=1)

    if feats.shape[1] > FEATURE_DIM_CAP:
        raise DimensionCap(f"feature dim {feats.shape[1]} exceeds {FEATURE_DIM_CAP}")
    return feats


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Closed-form Frechet distance between two Gaussians.

    The cross term is rooted as (A^1/2 B A^1/2)^1/2, which is symmetric PSD
    by construction; small negative totals clamp to zero.
    """
    if a.dim != b.dim:
        raise DimMismatch(f"dims {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    root_a = sqrtm_psd(a.cov)
    cross = sqrtm_psd(root_a @ b.cov @ root_a)
    value = float(diff @ diff + np.trace(a.cov + b.cov - 2.0 * cross))
    if value < -NEG_CLAMP:
        raise ValueError(f"frechet distance {value} below clamp window")
    return max(value, 0.0)


def _regularized_stats(feats: np.ndarray):
    """mean_cov plus the standard diagonal ridge when near-singular."""
    stats = mean_cov(feats)
    regularized = False
    scale = max(float(np.diag(stats.cov).max(initial=0.0)), 1.0)
    from .numerics import sym_eig

    w, _ = sym_eig(stats.cov)
    if w.min() < COV_EIG_FLOOR * scale:
        stats = GaussianStats(stats.mean, stats.cov + COV_RIDGE * np.eye(stats.dim))
        regularized = True
    return stats, regularized


def fid(set_a: np.ndarray, set_b: np.ndarray, fmap: FeatureMap) -> float:
    """Frechet distance between Gaussians fit to the two batches' features."""
    feats_a = extract_features(set_a, fmap)
    feats_b = extract_features(set_b, fmap)
    d = feats_a.shape[1]
    floor = max(d + 1, 32)
    if feats_a.shape[0] < floor or feats_b.shape[0] < floor:
        raise TooFewSamples(f"need >= {floor} samples per set for d={d}")
    stats_a, _ = _regularized_stats(feats_a)
    stats_b, _ = _regularized_stats(feats_b)
    return frechet_distance(stats_a, stats_b)


@dataclass
class FidResult:
    """Both reference comparisons plus their worst case.

    fid_corrupted_ref compares the generated set against the corrupted
    training reference; fid_clean_ref against the clean one. max_score is
    the worse (higher) of the two; both components are always kept.
    """

    fid_corrupted_ref: float
    fid_clean_ref: float
    feature_map: str
    n_clean: int
    n_corrupted: int
    n_generated: int
    regularized: bool = False
    max_score: float = field(init=False)

    def __post_init__(self):
        for v in (self.fid_corrupted_ref, self.fid_clean_ref):
            if v < -NEG_CLAMP:
                raise ValueError(f"negative FID component {v}")
        self.fid_corrupted_ref = max(float(self.fid_corrupted_ref), 0.0)
        self.fid_clean_ref = max(float(self.fid_clean_ref), 0.0)
        self.max_score = max(self.fid_corrupted_ref, self.fid_clean_ref)


def score_experiment(clean_set: np.ndarray, corrupted_set: np.ndarray,
                     generated_set: np.ndarray, fmap: FeatureMap) -> FidResult:
    """Worst-case FID of the generated set against both references."""
    feats_clean = extract_features(clean_set, fmap)
    feats_corr = extract_features(corrupted_set, fmap)
    feats_gen = extract_features(generated_set, fmap)
    d = feats_gen.shape[1]
    floor = max(d + 1, 32)
    for name, f in (("clean", feats_clean), ("corrupted", feats_corr), ("generated", feats_gen)):
        if f.shape[0] < floor:
            raise TooFewSamples(f"{name} set: need >= {floor} samples for d={d}")
    stats_gen, reg_g = _regularized_stats(feats_gen)
    stats_corr, reg_c = _regularized_stats(feats_corr)
    stats_clean, reg_cl = _regularized_stats(feats_clean)
    return FidResult(
        fid_corrupted_ref=frechet_distance(stats_corr, stats_gen),
        fid_clean_ref=frechet_distance(stats_clean, stats_gen),
        feature_map=fmap.tag(),
        n_clean=clean_set.shape[0],
        n_corrupted=corrupted_set.shape[0],
        n_generated=generated_set.shape[0],
        regularized=reg_g or reg_c or reg_cl,
    )
