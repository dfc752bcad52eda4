"""Suite orchestration: per-cell seeding, isolation, config parsing, and
worker-count independence."""

import numpy as np
import pytest

from diffbench.errors import ConfigError
from diffbench.harness import (
    ExperimentSpec,
    build_dataset,
    parse_feature_map,
    parse_suite_config,
    run_experiment,
    run_suite_specs,
)
from diffbench.report import emit_csv
from diffbench.rng import RngStream

FAST = dict(dataset="blobs", dataset_n=120, side=8, model="analytic",
            n_samples=120, features="random_projection:8",
            record_timing=False)


def test_spec_validates_fields():
    with pytest.raises(ValueError):
        ExperimentSpec(corruption="nonsense")
    with pytest.raises(ConfigError):
        ExperimentSpec(mode="sideways")
    with pytest.raises(ConfigError):
        ExperimentSpec(model="unet")
    with pytest.raises(ConfigError):
        ExperimentSpec(sampler="euler")


def test_cell_seed_depends_only_on_cell_key():
    a = ExperimentSpec(seed=5, corruption="fog", severity=3, **FAST)
    b = ExperimentSpec(seed=5, corruption="fog", severity=3, n_samples=999,
                       **{k: v for k, v in FAST.items() if k != "n_samples"})
    c = ExperimentSpec(seed=5, corruption="fog", severity=4, **FAST)
    assert a.cell_seed() == b.cell_seed(), "seed is a function of the cell key"
    assert a.cell_seed() != c.cell_seed()
    assert ExperimentSpec(seed=6, corruption="fog", severity=3,
                          **FAST).cell_seed() != a.cell_seed()


def test_digest_changes_with_any_field():
    a = ExperimentSpec(**FAST)
    b = ExperimentSpec(**{**FAST, "n_samples": 121})
    assert a.digest() != b.digest()
    assert a.digest() == ExperimentSpec(**FAST).digest()


def test_parse_feature_map_syntax():
    assert parse_feature_map("raw_pixels").kind == "raw_pixels"
    fm = parse_feature_map("random_projection:12:3")
    assert (fm.out_dim, fm.seed) == (12, 3)
    assert parse_feature_map("patch_moments:2").patch_size == 2
    with pytest.raises(ConfigError):
        parse_feature_map("random_projection")
    with pytest.raises(ConfigError):
        parse_feature_map("inception")


def test_build_dataset_kinds():
    spec = ExperimentSpec(**FAST)
    d = build_dataset(spec, RngStream(1, 1))
    assert d.images.shape == (120, 1, 8, 8)
    frac = build_dataset(ExperimentSpec(**{**FAST, "dataset": "fractal_red",
                                           "dataset_n": 3, "side": 9}),
                         RngStream(1, 1))
    assert frac.images.shape == (3, 3, 9, 9)
    with pytest.raises(ConfigError):
        build_dataset(ExperimentSpec(**{**FAST, "dataset": "imagenet"}),
                      RngStream(1, 1))


def test_run_experiment_identity_scores_match():
    spec = ExperimentSpec(corruption="identity", seed=11, **FAST)
    result, curve, artifacts = run_experiment(spec)
    assert result.fid_corrupted_ref == pytest.approx(result.fid_clean_ref,
                                                     abs=1e-9)
    assert curve == []  # analytic model does not train
    assert artifacts.sample_grid.min() >= 0.0
    assert artifacts.sample_grid.max() <= 1.0


def test_run_experiment_deterministic():
    spec = ExperimentSpec(corruption="impulse", severity=3, seed=4, **FAST)
    r1, _, _ = run_experiment(spec)
    r2, _, _ = run_experiment(spec)
    assert r1.fid_clean_ref == r2.fid_clean_ref
    assert r1.fid_corrupted_ref == r2.fid_corrupted_ref


def _specs(corruptions=("identity", "impulse"), severities=(1, 3)):
    return [ExperimentSpec(corruption=k, severity=s, seed=2, **FAST)
            for k in corruptions for s in severities]


def test_suite_rows_sorted_and_worker_independent():
    specs = _specs()
    r1 = run_suite_specs(specs, workers=1)
    r4 = run_suite_specs(list(reversed(specs)), workers=4)
    assert emit_csv(r1) == emit_csv(r4)
    keys = [r.sort_key() for r in r1.rows]
    assert keys == sorted(keys)


def test_cell_isolation():
    # dropping cells must not change the remaining rows
    full = run_suite_specs(_specs(), workers=1)
    partial = run_suite_specs(_specs(corruptions=("impulse",)), workers=1)
    by_key = {r.sort_key(): r for r in full.rows}
    for row in partial.rows:
        ref = by_key[row.sort_key()]
        assert row.fid_clean_ref == ref.fid_clean_ref
        assert row.max_score == ref.max_score


def test_failed_cell_reported_not_raised():
    bad = ExperimentSpec(corruption="identity",
                         **{**FAST, "n_samples": 5})  # below the FID floor
    ok = ExperimentSpec(corruption="impulse", **FAST)
    result = run_suite_specs([bad, ok], workers=2)
    errors = [r for r in result.rows if r.error]
    assert len(errors) == 1
    assert "TooFewSamples" in errors[0].error
    good = [r for r in result.rows if not r.error]
    assert len(good) == 1 and np.isfinite(good[0].max_score)


def test_duplicate_cells_rejected():
    s = ExperimentSpec(**FAST)
    with pytest.raises(ConfigError):
        run_suite_specs([s, s])
    with pytest.raises(ConfigError):
        run_suite_specs([])


def test_parse_suite_config_round_trip(tmp_path):
    cfg = tmp_path / "suite.ini"
    cfg.write_text("""\
[suite]
name = demo
seed = 12
datasets = blobs
corruptions = identity, fog
severities = 1, 5
samplers = ddpm, ddim
record_timing = false

[data]
n_train = 64
side = 8

[schedule]
T = 100
beta_end = 0.06

[sample]
n_samples = 64
ddim_steps = 10

[features]
map = random_projection:8
""")
    meta, specs = parse_suite_config(cfg)
    assert meta["name"] == "demo" and meta["seed"] == 12
    assert "timestamp" not in meta, "deterministic mode omits wall-clock data"
    assert len(specs) == 1 * 2 * 2 * 2
    ddim = [s for s in specs if s.sampler == "ddim"]
    assert all(s.steps == 10 for s in ddim)
    assert all(s.T == 100 and s.beta_end == 0.06 for s in specs)


def test_parse_suite_config_rejects_unknowns(tmp_path):
    bad_key = tmp_path / "a.ini"
    bad_key.write_text("[suite]\ndatasets = blobs\ncorruptions = identity\nfoo = 1\n")
    with pytest.raises(ConfigError):
        parse_suite_config(bad_key)
    bad_section = tmp_path / "b.ini"
    bad_section.write_text("[suite]\ndatasets = blobs\ncorruptions = identity\n[extra]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_suite_config(bad_section)
    missing = tmp_path / "c.ini"
    missing.write_text("[suite]\nseed = 1\n")
    with pytest.raises(ConfigError):
        parse_suite_config(missing)
    with pytest.raises(ConfigError):
        parse_suite_config(tmp_path / "does_not_exist.ini")
