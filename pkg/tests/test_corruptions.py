"""Corruption operators: severity tables, invariants, and the plasma
fractal generator with its hand-traced oracle."""

import numpy as np
import pytest

from diffbench.corruptions import (
    CorruptionKind,
    CorruptionSpec,
    PlasmaGrid,
    Severity,
    _diamond_square_grid,
    apply_corruption,
    corrupt_batch,
    diamond_square,
    fog_blend,
    normalize_plasma,
    plasma_for_image,
    resample_plasma,
    severity_params,
)
from diffbench.errors import BadDetailLevel, ShapeMismatch
from diffbench.rng import RngStream

ALL_KINDS = list(CorruptionKind)
ALL_LEVELS = [1, 2, 3, 4, 5]


def _test_image(seed=7, c=3, h=16, w=16):
    return RngStream(seed, 1).uniform(c * h * w).reshape(c, h, w).astype(np.float32)


def test_kind_names_round_trip():
    for kind in ALL_KINDS:
        assert CorruptionKind.parse(kind.value) is kind
    with pytest.raises(ValueError):
        CorruptionKind.parse("gaussian_noise")


def test_severity_bounds():
    with pytest.raises(ValueError):
        Severity(0)
    with pytest.raises(ValueError):
        Severity(6)


def test_severity_params_monotone_where_meaningful():
    p = [severity_params(CorruptionKind.IMPULSE_NOISE, Severity(i))["p"]
         for i in ALL_LEVELS]
    assert p == sorted(p)
    c = [severity_params(CorruptionKind.SHOT_NOISE, Severity(i))["c"]
         for i in ALL_LEVELS]
    assert c == sorted(c, reverse=True), "lower photon count = more noise"


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
@pytest.mark.parametrize("level", ALL_LEVELS)
def test_range_closure_and_determinism(kind, level):
    img = _test_image()
    spec = CorruptionSpec.make(kind, level)
    a = apply_corruption(img, spec, RngStream(3, 1))
    b = apply_corruption(img, spec, RngStream(3, 1))
    assert np.array_equal(a, b)
    assert a.shape == img.shape
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_identity_is_exact():
    img = _test_image()
    spec = CorruptionSpec.make(CorruptionKind.IDENTITY, 3)
    assert np.array_equal(apply_corruption(img, spec, RngStream(0, 0)), img)


def test_impulse_rate_matches_parameter():
    # Monte Carlo: hit fraction within 4 sigma of p on a 64x64 interior image
    img = np.full((1, 64, 64), 0.5, dtype=np.float32)
    for level, p in zip(ALL_LEVELS, (0.03, 0.06, 0.09, 0.17, 0.27)):
        spec = CorruptionSpec.make(CorruptionKind.IMPULSE_NOISE, level)
        out = apply_corruption(img, spec, RngStream(level, 2))
        rate = float(np.mean(out != img))
        bound = 4.0 * np.sqrt(p * (1 - p) / (64 * 64))
        assert abs(rate - p) < bound, (level, rate, p)


def test_impulse_extremes_only():
    img = np.full((3, 32, 32), 0.5, dtype=np.float32)
    spec = CorruptionSpec.make(CorruptionKind.IMPULSE_NOISE, 5)
    out = apply_corruption(img, spec, RngStream(1, 1))
    changed = out[out != 0.5]
    assert set(np.unique(changed).tolist()) <= {0.0, 1.0}


def test_impulse_mask_shared_across_channels():
    img = _test_image(c=3)
    spec = CorruptionSpec.make(CorruptionKind.IMPULSE_NOISE, 4)
    out = apply_corruption(img, spec, RngStream(5, 5))
    hit = np.any(out != img, axis=0)
    for c in range(3):
        assert np.array_equal(out[c] != img[c], hit)


def test_shot_noise_unbiased_in_interior():
    img = np.full((1, 64, 64), 0.4, dtype=np.float32)
    spec = CorruptionSpec.make(CorruptionKind.SHOT_NOISE, 1)
    out = apply_corruption(img, spec, RngStream(2, 2))
    # E[Poisson(x*c)/c] = x; mean over 4096 pixels is tight
    assert abs(float(out.mean()) - 0.4) < 0.01


def test_brightness_shifts_and_saturates():
    img = np.array([[[0.2, 0.9]]], dtype=np.float32)
    spec = CorruptionSpec.make(CorruptionKind.BRIGHTNESS, 2)
    out = apply_corruption(img, spec, RngStream(0, 0))
    assert out[0, 0, 0] == pytest.approx(0.4, abs=1e-6)
    assert out[0, 0, 1] == 1.0


def test_motion_length_one_is_identity():
    img = _test_image(c=1, h=8, w=8)
    out = np.clip(apply_corruption(img, CorruptionSpec(
        CorruptionKind.MOTION_BLUR, Severity(1), {"length": 1}),
        RngStream(1, 1)), 0, 1)
    assert np.allclose(out, img, atol=1e-6)


def test_blur_kinds_preserve_constant_images():
    img = np.full((1, 16, 16), 0.6, dtype=np.float32)
    for kind in (CorruptionKind.MOTION_BLUR, CorruptionKind.GLASS_BLUR):
        out = apply_corruption(img, CorruptionSpec.make(kind, 3), RngStream(4, 4))
        assert np.allclose(out, 0.6, atol=1e-5), kind


def test_glass_blur_permutes_then_blurs():
    img = _test_image(c=1)
    spec = CorruptionSpec.make(CorruptionKind.GLASS_BLUR, 3)
    out = apply_corruption(img, spec, RngStream(6, 6))
    assert not np.array_equal(out, img)
    # local scrambling roughly preserves total mass
    assert abs(float(out.mean()) - float(img.mean())) < 0.05


def test_spatter_only_brightens():
    img = _test_image() * 0.8
    spec = CorruptionSpec.make(CorruptionKind.SPATTER, 5)
    out = apply_corruption(img, spec, RngStream(7, 7))
    assert np.all(out >= img - 1e-6)


def test_fractal_overlay_is_convex_blend():
    img = _test_image(c=1)
    spec = CorruptionSpec.make(CorruptionKind.FRACTAL_OVERLAY, 3)
    out = apply_corruption(img, spec, RngStream(8, 8))
    plasma = plasma_for_image(16, 16, 2.0, RngStream(8, 8))
    beta = spec.params["beta"]
    assert np.allclose(out, np.clip((1 - beta) * img + beta * plasma, 0, 1),
                       atol=1e-6)


def test_apply_rejects_out_of_range_input():
    with pytest.raises(ValueError):
        apply_corruption(np.full((1, 4, 4), 1.5, np.float32),
                         CorruptionSpec.make(CorruptionKind.FOG, 1),
                         RngStream(0, 0))


def test_corrupt_batch_matches_sequential_single_images():
    imgs = np.stack([_test_image(seed=s, c=1, h=8, w=8) for s in range(4)])
    spec = CorruptionSpec.make(CorruptionKind.IMPULSE_NOISE, 3)
    rng = RngStream(9, 9)
    batch = corrupt_batch(imgs, spec, rng)
    rng2 = RngStream(9, 9)
    singles = np.stack([apply_corruption(im, spec, rng2) for im in imgs])
    assert np.array_equal(batch, singles)


# -------------------------------------------------------- diamond-square

def test_diamond_square_k1_hand_trace():
    # zero offsets, corners (0, 0, 0, 1): center is the corner mean 0.25;
    # each border midpoint averages its 3 in-grid neighbors, giving
    # 1/12 next to the three zero corners and 5/12 next to the one corner
    g = _diamond_square_grid((0.0, 0.0, 0.0, 1.0), 1, 0.0, 2.0, None)
    assert g[1, 1] == pytest.approx(0.25)
    assert g[0, 1] == pytest.approx(1.0 / 12.0)
    assert g[1, 0] == pytest.approx(1.0 / 12.0)
    assert g[1, 2] == pytest.approx(5.0 / 12.0)
    assert g[2, 1] == pytest.approx(5.0 / 12.0)


def test_diamond_square_deterministic_and_normalized():
    a = diamond_square(4, 1.0, 2.0, RngStream(11, 1))
    b = diamond_square(4, 1.0, 2.0, RngStream(11, 1))
    assert np.array_equal(a.values, b.values)
    assert a.side == 17
    assert float(a.values.min()) == 0.0
    assert float(a.values.max()) == 1.0


def test_diamond_square_constant_grid_normalizes_to_zero():
    assert np.all(normalize_plasma(np.full((5, 5), 0.7)) == 0.0)


def test_diamond_square_detail_bounds():
    with pytest.raises(BadDetailLevel):
        diamond_square(0, 1.0, 2.0, RngStream(0, 0))
    with pytest.raises(BadDetailLevel):
        diamond_square(13, 1.0, 2.0, RngStream(0, 0))


def test_plasma_grid_shape_validation():
    with pytest.raises(ShapeMismatch):
        PlasmaGrid(np.zeros((4, 4)))


def test_resample_plasma_identity_at_native_size():
    grid = diamond_square(3, 1.0, 2.0, RngStream(2, 1))
    out = resample_plasma(grid, 9, 9)
    assert np.array_equal(out, grid.values)


def test_resample_plasma_crops_rectangles():
    grid = diamond_square(3, 1.0, 2.0, RngStream(2, 1))
    out = resample_plasma(grid, 5, 9)
    assert out.shape == (5, 9)


def test_fog_blend_max_preserving():
    img = np.full((1, 4, 4), 0.8, dtype=np.float32)
    plasma = np.ones((4, 4), dtype=np.float32)
    out = fog_blend(img, plasma, 2.0)
    # (0.8 + 2.0) * 0.8 / 2.8 = 0.8: the brightest pixel stays put
    assert np.allclose(out, 0.8, atol=1e-6)
    with pytest.raises(ValueError):
        fog_blend(img, plasma, 0.0)
