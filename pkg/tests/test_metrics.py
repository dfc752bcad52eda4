"""Frechet distance scoring against closed-form oracles."""

import numpy as np
import pytest

from diffbench.errors import DimensionCap, DimMismatch, TooFewSamples
from diffbench.metrics import (
    FeatureMap,
    FidResult,
    extract_features,
    fid,
    frechet_distance,
    projection_matrix,
    score_experiment,
)
from diffbench.numerics import GaussianStats
from diffbench.rng import RngStream


def test_frechet_identical_gaussians_is_zero():
    s = GaussianStats(np.array([0.3, -0.2]), np.array([[1.0, 0.1], [0.1, 0.8]]))
    assert frechet_distance(s, s) < 1e-9


def test_frechet_pure_mean_shift():
    # equal covariances: distance is the squared mean gap, here 4 * 2.5^2
    I = np.eye(4)
    a = GaussianStats(np.zeros(4), I)
    b = GaussianStats(np.full(4, 2.5), I)
    assert frechet_distance(a, b) == pytest.approx(25.0, abs=1e-6)


def test_frechet_pure_variance_scale():
    # N(0, I_1) vs N(0, 4): 1 + 4 - 2*2 = 1.0
    a = GaussianStats(np.zeros(1), np.eye(1))
    b = GaussianStats(np.zeros(1), 4.0 * np.eye(1))
    assert frechet_distance(a, b) == pytest.approx(1.0, abs=1e-6)


def test_frechet_symmetric_in_arguments():
    rng = RngStream(1, 1)
    m = rng.normal(9).reshape(3, 3)
    a = GaussianStats(rng.normal(3), m @ m.T / 3 + np.eye(3))
    m2 = rng.normal(9).reshape(3, 3)
    b = GaussianStats(rng.normal(3), m2 @ m2.T / 3 + np.eye(3))
    assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-9)


def test_frechet_rejects_dim_mismatch():
    a = GaussianStats(np.zeros(2), np.eye(2))
    b = GaussianStats(np.zeros(3), np.eye(3))
    with pytest.raises(DimMismatch):
        frechet_distance(a, b)


def test_fid_same_set_is_tiny():
    x = RngStream(2, 1).normal(200 * 1 * 4 * 4).reshape(200, 1, 4, 4).astype(np.float32)
    fmap = FeatureMap(kind="random_projection", out_dim=6)
    assert fid(x, x, fmap) < 1e-4


def test_fid_two_sample_mean_shift():
    # N(0, I_8) vs N(0.5, I_8): true distance 8 * 0.25 = 2.0
    rng = RngStream(3, 1)
    a = rng.normal(5000 * 8).reshape(5000, 1, 1, 8).astype(np.float32)
    b = (rng.normal(5000 * 8).reshape(5000, 1, 1, 8) + 0.5).astype(np.float32)
    value = fid(a, b, FeatureMap(kind="raw_pixels"))
    assert abs(value - 2.0) / 2.0 < 0.15


def test_fid_sample_floor_enforced():
    x = np.zeros((10, 1, 2, 2), np.float32)
    with pytest.raises(TooFewSamples):
        fid(x, x, FeatureMap(kind="raw_pixels"))


def test_extract_features_shapes():
    x = RngStream(4, 1).uniform(40 * 1 * 8 * 8).reshape(40, 1, 8, 8).astype(np.float32)
    assert extract_features(x, FeatureMap(kind="raw_pixels")).shape == (40, 64)
    assert extract_features(
        x, FeatureMap(kind="random_projection", out_dim=10)).shape == (40, 10)
    # per-patch mean and std of four 4x4 patches
    assert extract_features(
        x, FeatureMap(kind="patch_moments", patch_size=4)).shape == (40, 8)


def test_extract_features_patch_must_divide():
    x = np.zeros((5, 1, 6, 6), np.float32)
    with pytest.raises(DimMismatch):
        extract_features(x, FeatureMap(kind="patch_moments", patch_size=4))


def test_feature_dimension_cap():
    x = np.zeros((3, 3, 16, 16), np.float32)
    with pytest.raises(DimensionCap):
        extract_features(x, FeatureMap(kind="raw_pixels"))


def test_projection_matrix_deterministic():
    a = projection_matrix(5, 64, 8)
    b = projection_matrix(5, 64, 8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, projection_matrix(6, 64, 8))


def test_projection_entry_variance():
    # entries are N(0, 1/out_dim): each column's squared norm is about
    # in_dim / out_dim
    p = projection_matrix(9, 256, 16)
    col_norms = (p ** 2).sum(axis=0)
    assert abs(float(col_norms.mean()) - 256 / 16) / (256 / 16) < 0.2


def test_fid_result_max_and_clamping():
    r = FidResult(fid_corrupted_ref=2.0, fid_clean_ref=-1e-8, feature_map="t",
                  n_clean=10, n_corrupted=10, n_generated=10)
    assert r.fid_clean_ref == 0.0
    assert r.max_score == 2.0
    with pytest.raises(ValueError):
        FidResult(fid_corrupted_ref=-1.0, fid_clean_ref=0.0, feature_map="t",
                  n_clean=1, n_corrupted=1, n_generated=1)


def test_score_experiment_identity_components_equal():
    x = RngStream(6, 1).uniform(120 * 1 * 4 * 4).reshape(120, 1, 4, 4).astype(np.float32)
    g = RngStream(7, 1).uniform(120 * 1 * 4 * 4).reshape(120, 1, 4, 4).astype(np.float32)
    r = score_experiment(x, x, g, FeatureMap(kind="random_projection", out_dim=6))
    assert r.fid_corrupted_ref == pytest.approx(r.fid_clean_ref, abs=1e-9)
    assert r.max_score >= 0.0
