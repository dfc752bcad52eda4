"""Deterministic benchmark of diffusion-sampler robustness to image
corruptions: corrupt a dataset, fit or train a noise predictor, sample,
and score generative fidelity with a Frechet distance."""

from .corruptions import (
    CorruptionKind,
    CorruptionSpec,
    PlasmaGrid,
    Severity,
    apply_corruption,
    corrupt_batch,
    diamond_square,
    fog_blend,
)
from .data import Dataset, load_idx, load_ppm, load_tensor, save_ppm, save_tensor
from .denoiser import (
    AnalyticGaussianPredictor,
    TinyDenoiser,
    ZeroPredictor,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .diffusion import NoiseSchedule, SamplerConfig, linear_schedule, sample
from .errors import ConfigError, DiffBenchError
from .estimators import CorruptionTransform, DiffusionGenerator, validate_image_batch
from .harness import ExperimentSpec, SuiteResult, SuiteRow, run_experiment, run_suite
from .metrics import FeatureMap, FidResult, fid, frechet_distance, score_experiment
from .numerics import GaussianStats, mean_cov, sqrtm_psd, sym_eig
from .report import emit_csv, emit_json, emit_markdown, emit_severity_chart
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "AnalyticGaussianPredictor",
    "ConfigError",
    "CorruptionKind",
    "CorruptionSpec",
    "CorruptionTransform",
    "Dataset",
    "DiffBenchError",
    "DiffusionGenerator",
    "ExperimentSpec",
    "FeatureMap",
    "FidResult",
    "GaussianStats",
    "NoiseSchedule",
    "PlasmaGrid",
    "RngStream",
    "SamplerConfig",
    "Severity",
    "SuiteResult",
    "SuiteRow",
    "TinyDenoiser",
    "ZeroPredictor",
    "apply_corruption",
    "corrupt_batch",
    "diamond_square",
    "emit_csv",
    "emit_json",
    "emit_markdown",
    "emit_severity_chart",
    "fid",
    "fog_blend",
    "frechet_distance",
    "linear_schedule",
    "load_checkpoint",
    "load_idx",
    "load_ppm",
    "load_tensor",
    "mean_cov",
    "run_experiment",
    "run_suite",
    "sample",
    "save_checkpoint",
    "save_ppm",
    "save_tensor",
    "score_experiment",
    "sqrtm_psd",
    "sym_eig",
    "train",
    "validate_image_batch",
]
