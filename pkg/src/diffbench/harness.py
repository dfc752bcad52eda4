"""Experiment orchestration: one corrupt-train-sample-score cell, and the
suite runner that sweeps datasets x corruptions x severities x samplers.

Determinism contract: the master seed plus the cell's key fully determine
every random stream a cell uses, so results are identical for any worker
count and any subset of configured cells.
"""

from __future__ import annotations

import concurrent.futures
import configparser
import hashlib
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import data as datamod
from .corruptions import CorruptionKind, CorruptionSpec, corrupt_batch
from .denoiser import AnalyticGaussianPredictor, TinyDenoiser, train
from .diffusion import SamplerConfig, linear_schedule, sample
from .errors import ConfigError, DiffBenchError
from .metrics import FeatureMap, FidResult, score_experiment
from .numerics import mean_cov
from .rng import RngStream

# stream-id offsets for the per-cell substreams
_STREAM_DATA = 1
_STREAM_CORRUPT = 2
_STREAM_TRAIN = 3
_STREAM_SAMPLE = 4

ARTIFACT_VERSION = "diffbench-0.1.0"


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one experiment cell needs; flat and round-trippable."""

    dataset: str = "blobs"
    dataset_n: int = 300
    side: int = 8
    channels: int = 1
    corruption: str = "identity"
    severity: int = 1
    mode: str = "overlay"            # overlay | intrinsic
    model: str = "analytic"          # analytic | tiny
    sampler: str = "ddpm"            # ddpm | ddim
    steps: int = 0                   # 0 = full schedule
    eta: float = 0.0
    T: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.08
    epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-4
    hidden: int = 768
    n_samples: int = 300
    features: str = "random_projection:16"
    seed: int = 0
    record_timing: bool = True

    def __post_init__(self):
        CorruptionKind.parse(self.corruption)
        if self.mode not in ("overlay", "intrinsic"):
            raise ConfigError(f"mode must be overlay or intrinsic, got {self.mode!r}")
        if self.model not in ("analytic", "tiny"):
            raise ConfigError(f"model must be analytic or tiny, got {self.model!r}")
        if self.sampler not in ("ddpm", "ddim"):
            raise ConfigError(f"sampler must be ddpm or ddim, got {self.sampler!r}")
        parse_feature_map(self.features)

    def cell_key(self) -> str:
        return f"{self.dataset}|{self.corruption}|{self.severity}|{self.sampler}"

    def cell_seed(self) -> int:
        payload = f"{self.seed}|{self.cell_key()}".encode()
        return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")

    def digest(self) -> str:
        fields = sorted(self.__dict__.items())
        payload = ";".join(f"{k}={v}" for k, v in fields).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def parse_feature_map(text: str) -> FeatureMap:
    """Feature map syntax: raw_pixels | random_projection:<d>[:<seed>] | patch_moments:<ps>."""
    parts = text.split(":")
    kind = parts[0]
    if kind == "raw_pixels":
        return FeatureMap(kind="raw_pixels")
    if kind == "random_projection":
        if len(parts) < 2:
            raise ConfigError("random_projection needs an output dim, e.g. random_projection:16")
        seed = int(parts[2]) if len(parts) > 2 else 0
        return FeatureMap(kind="random_projection", out_dim=int(parts[1]), seed=seed)
    if kind == "patch_moments":
        ps = int(parts[1]) if len(parts) > 1 else 4
        return FeatureMap(kind="patch_moments", patch_size=ps)
    raise ConfigError(f"unknown feature map {text!r}")


def make_blob_images(n: int, side: int, rng: RngStream) -> np.ndarray:
    """Smooth two-tone blob images in [0, 1]; the stock toy dataset."""
    yy, xx = np.mgrid[0:side, 0:side] / max(side - 1, 1)
    u = rng.uniform(n * 5).reshape(n, 5)
    images = np.empty((n, 1, side, side), dtype=np.float32)
    for i in range(n):
        cx, cy, r, a, b = u[i]
        g = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (0.05 + 0.1 * r))
        images[i, 0] = a * g + b * (1.0 - g)
    return np.clip(images, 0.0, 1.0)


def build_dataset(spec: ExperimentSpec, rng: RngStream) -> datamod.Dataset:
    """Construct the unit-domain dataset named by the spec."""
    name = spec.dataset
    if name == "blobs":
        return datamod.Dataset(name="blobs",
                               images=make_blob_images(spec.dataset_n, spec.side, rng))
    if name.startswith("fractal_"):
        tint = name.split("_", 1)[1]
        return datamod.synth_fractal_dataset(spec.dataset_n, spec.side, tint, rng)
    if name.startswith("idx:"):
        d = datamod.load_idx(name[4:])
        if d.n > spec.dataset_n:
            d = datamod.Dataset(name=d.name, images=d.images[:spec.dataset_n],
                                pixel_domain=d.pixel_domain)
        return d
    raise ConfigError(f"unknown dataset {name!r}")


@dataclass
class ExperimentArtifacts:
    sample_grid: np.ndarray      # one unit-domain C x H x W tile image
    loss_curve: list


@dataclass
class SuiteRow:
    """One result cell; error is empty on success."""

    digest: str
    dataset: str
    corruption: str
    severity: int
    mode: str
    model: str
    sampler: str
    steps: int
    fid_corrupted_ref: float = float("nan")
    fid_clean_ref: float = float("nan")
    max_score: float = float("nan")
    feature_map: str = ""
    train_loss_final: float = float("nan")
    seconds: float = 0.0
    seed: int = 0
    error: str = ""

    def sort_key(self):
        kind_pos = [k.value for k in CorruptionKind].index(self.corruption)
        return (self.dataset, kind_pos, self.severity, self.model, self.sampler)


@dataclass
class SuiteResult:
    rows: list
    metadata: dict = field(default_factory=dict)


def _tile_samples(images: np.ndarray, max_tiles: int = 16) -> np.ndarray:
    n = min(images.shape[0], max_tiles)
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    c, h, w = images.shape[1:]
    grid = np.zeros((c, rows * h, cols * w), dtype=np.float32)
    for i in range(n):
        r, col = divmod(i, cols)
        grid[:, r * h:(r + 1) * h, col * w:(col + 1) * w] = images[i]
    return grid


def run_experiment(spec: ExperimentSpec):
    """One benchmark cell: corrupt, train, sample, score.

    Returns (FidResult, train loss curve, ExperimentArtifacts).
    """
    cell_seed = spec.cell_seed()
    clean = build_dataset(spec, RngStream(cell_seed, _STREAM_DATA))

    kind = CorruptionKind.parse(spec.corruption)
    if kind is CorruptionKind.IDENTITY:
        corrupted = clean
    else:
        cspec = CorruptionSpec.make(kind, spec.severity)
        corrupted = datamod.Dataset(
            name=clean.name,
            images=corrupt_batch(clean.images, cspec, RngStream(cell_seed, _STREAM_CORRUPT)),
            pixel_domain=datamod.UNIT)

    sched = linear_schedule(spec.T, spec.beta_start, spec.beta_end)
    train_set = datamod.to_signed(corrupted)
    flat = train_set.images.reshape(train_set.n, -1)
    shape = train_set.images.shape[1:]

    curve: list = []
    if spec.model == "analytic":
        model = AnalyticGaussianPredictor(mean_cov(flat), sched)
    else:
        model = TinyDenoiser(shape, hidden=(spec.hidden,), seed=cell_seed)
        model, curve = train(model, train_set.images, sched, spec.epochs,
                             min(spec.batch_size, train_set.n), spec.lr,
                             RngStream(cell_seed, _STREAM_TRAIN))

    cfg = SamplerConfig(kind=spec.sampler,
                        steps=spec.steps if spec.sampler == "ddim" else 0,
                        eta=spec.eta, seed=cell_seed)
    generated = sample(model, spec.n_samples, shape, sched, cfg,
                       RngStream(cell_seed, _STREAM_SAMPLE))
    generated_unit = 0.5 * (np.clip(generated, -1.0, 1.0) + 1.0)

    fmap = parse_feature_map(spec.features)
    result = score_experiment(clean.images, corrupted.images, generated_unit, fmap)
    artifacts = ExperimentArtifacts(sample_grid=_tile_samples(generated_unit),
                                    loss_curve=curve)
    return result, curve, artifacts


def _run_cell(spec: ExperimentSpec) -> SuiteRow:
    row = SuiteRow(
        digest=spec.digest(), dataset=spec.dataset, corruption=spec.corruption,
        severity=spec.severity, mode=spec.mode, model=spec.model,
        sampler=spec.sampler,
        steps=spec.steps if spec.sampler == "ddim" and spec.steps else spec.T,
        seed=spec.cell_seed())
    start = time.perf_counter()
    try:
        result, curve, _ = run_experiment(spec)
        row.fid_corrupted_ref = result.fid_corrupted_ref
        row.fid_clean_ref = result.fid_clean_ref
        row.max_score = result.max_score
        row.feature_map = result.feature_map
        row.train_loss_final = curve[-1] if curve else float("nan")
    except DiffBenchError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    if spec.record_timing:
        row.seconds = time.perf_counter() - start
    return row


_SUITE_SCHEMA = {
    "suite": {"name", "seed", "datasets", "corruptions", "severities",
              "samplers", "mode", "model", "record_timing"},
    "data": {"n_train", "side"},
    "schedule": {"T", "beta_start", "beta_end"},
    "train": {"epochs", "batch_size", "lr", "hidden"},
    "sample": {"n_samples", "ddim_steps", "eta"},
    "features": {"map"},
}


def parse_suite_config(path) -> tuple[dict, list[ExperimentSpec]]:
    """Read the suite config (INI sections, typed keys, fail-fast on unknowns)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    for section in parser.sections():
        if section not in _SUITE_SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key.lower() not in {k.lower() for k in _SUITE_SCHEMA[section]}:
                raise ConfigError(f"unknown key {key!r} in [{section}]")

    def get(section, key, fallback, cast):
        if section in parser and key in parser[section]:
            raw = parser[section][key]
            try:
                if cast is bool:
                    return raw.strip().lower() in ("1", "true", "yes", "on")
                return cast(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
        return fallback

    def get_list(section, key):
        raw = get(section, key, "", str)
        return [tok.strip() for tok in raw.split(",") if tok.strip()]

    datasets = get_list("suite", "datasets")
    corruptions = get_list("suite", "corruptions")
    severities = [int(s) for s in get_list("suite", "severities")] or [1]
    samplers = get_list("suite", "samplers") or ["ddpm"]
    if not datasets:
        raise ConfigError("[suite] datasets must list at least one dataset")
    if not corruptions:
        raise ConfigError("[suite] corruptions must list at least one kind")

    base = dict(
        mode=get("suite", "mode", "overlay", str),
        model=get("suite", "model", "analytic", str),
        record_timing=get("suite", "record_timing", True, bool),
        seed=get("suite", "seed", 0, int),
        dataset_n=get("data", "n_train", 300, int),
        side=get("data", "side", 8, int),
        T=get("schedule", "T", 200, int),
        beta_start=get("schedule", "beta_start", 1e-4, float),
        beta_end=get("schedule", "beta_end", 0.08, float),
        epochs=get("train", "epochs", 10, int),
        batch_size=get("train", "batch_size", 64, int),
        lr=get("train", "lr", 1e-4, float),
        hidden=get("train", "hidden", 768, int),
        n_samples=get("sample", "n_samples", 300, int),
        features=get("features", "map", "random_projection:16", str),
    )
    ddim_steps = get("sample", "ddim_steps", 20, int)
    eta = get("sample", "eta", 0.0, float)

    specs = []
    for ds in datasets:
        for kind in corruptions:
            for sev in severities:
                for sampler in samplers:
                    try:
                        specs.append(ExperimentSpec(
                            dataset=ds, corruption=kind, severity=sev,
                            sampler=sampler,
                            steps=ddim_steps if sampler == "ddim" else 0,
                            eta=eta if sampler == "ddim" else 0.0,
                            **base))
                    except (ValueError, DiffBenchError) as exc:
                        raise ConfigError(str(exc)) from exc
    meta = {"name": get("suite", "name", "suite", str),
            "seed": base["seed"],
            "artifact_version": ARTIFACT_VERSION}
    if base["record_timing"]:
        meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    return meta, specs


def run_suite_specs(specs: list[ExperimentSpec], metadata: dict | None = None,
                    workers: int = 1) -> SuiteResult:
    """Run cells (possibly concurrently) and merge rows in sorted key order."""
    if not specs:
        raise ConfigError("no experiment cells configured")
    keys = [s.cell_key() for s in specs]
    if len(set(keys)) != len(keys):
        raise ConfigError("duplicate experiment cells in configuration")
    if workers <= 1:
        rows = [_run_cell(s) for s in specs]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, specs))
    rows.sort(key=SuiteRow.sort_key)
    return SuiteResult(rows=rows, metadata=dict(metadata or {}))


def run_suite(config_path, workers: int = 1) -> SuiteResult:
    metadata, specs = parse_suite_config(config_path)
    return run_suite_specs(specs, metadata, workers=workers)
