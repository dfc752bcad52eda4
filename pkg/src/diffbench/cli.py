"""Command line front end.

Exit codes: 0 success, 1 configuration or input error, 2 at least one
suite cell failed (the other cells still ran and were reported).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import data as datamod
from .corruptions import CorruptionKind, CorruptionSpec, corrupt_batch, diamond_square
from .denoiser import TinyDenoiser, load_checkpoint, save_checkpoint, train
from .diffusion import SamplerConfig, linear_schedule, sample
from .errors import ConfigError, DiffBenchError
from .harness import parse_feature_map, run_suite
from .metrics import fid
from .report import emit_csv, emit_json, emit_markdown, emit_severity_chart, parse_json
from .rng import RngStream

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CELL_FAILURE = 2


def _load_batch(path: str) -> np.ndarray:
    """Unit-domain N x C x H x W batch from an .idx/.dfc/.ppm/.pgm file."""
    suffix = Path(path).suffix.lower()
    if suffix == ".idx":
        return datamod.load_idx(path).images
    if suffix in (".ppm", ".pgm"):
        return datamod.load_ppm(path)[None]
    x = datamod.load_tensor(path)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4:
        raise ConfigError(f"{path}: expected a 3-D or 4-D tensor, got rank {x.ndim}")
    return x


def _save_batch(images: np.ndarray, path: str) -> None:
    suffix = Path(path).suffix.lower()
    if suffix in (".ppm", ".pgm"):
        datamod.save_ppm(images[0], path)
    else:
        datamod.save_tensor(images, path)


def _add_schedule_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--T", type=int, default=200, help="diffusion steps")
    p.add_argument("--beta-start", type=float, default=1e-4)
    p.add_argument("--beta-end", type=float, default=0.08)


def cmd_corrupt(args) -> int:
    images = _load_batch(args.input)
    kind = CorruptionKind.parse(args.kind)
    if kind is not CorruptionKind.IDENTITY:
        spec = CorruptionSpec.make(kind, args.severity)
        images = corrupt_batch(images, spec, RngStream(args.seed, stream_id=1))
    _save_batch(images, args.output)
    if args.ppm_dir:
        out = Path(args.ppm_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(images):
            ext = "pgm" if img.shape[0] == 1 else "ppm"
            datamod.save_ppm(img, out / f"{i:05d}.{ext}")
    return EXIT_OK


def cmd_fractal_gen(args) -> int:
    rng = RngStream(args.seed, stream_id=1)
    side = (1 << args.k) + 1
    grids = np.empty((args.count, 1, side, side), dtype=np.float32)
    for i in range(args.count):
        grids[i, 0] = diamond_square(args.k, args.roughness, args.decay, rng).values
    _save_batch(grids, args.output)
    return EXIT_OK


def cmd_train(args) -> int:
    images = _load_batch(args.data)
    signed = 2.0 * images - 1.0
    sched = linear_schedule(args.T, args.beta_start, args.beta_end)
    model = TinyDenoiser(signed.shape[1:], hidden=(args.hidden,), seed=args.seed)
    batch = min(args.batch_size, signed.shape[0])
    model, curve = train(model, signed, sched, args.epochs, batch, args.lr,
                         RngStream(args.seed, stream_id=2))
    save_checkpoint(model, args.output)
    if args.curve:
        with open(args.curve, "w") as fh:
            fh.write("epoch,loss\n")
            for i, loss in enumerate(curve, start=1):
                fh.write(f"{i},{loss:.6f}\n")
    print(f"trained {args.epochs} epochs, final loss {curve[-1]:.6f}")
    return EXIT_OK


def cmd_sample(args) -> int:
    model = load_checkpoint(args.checkpoint)
    sched = linear_schedule(args.T, args.beta_start, args.beta_end)
    cfg = SamplerConfig(kind=args.sampler, steps=args.steps, eta=args.eta,
                        seed=args.seed)
    out = sample(model, args.n, model.input_shape, sched, cfg,
                 RngStream(args.seed, stream_id=3))
    unit = 0.5 * (np.clip(out, -1.0, 1.0) + 1.0)
    _save_batch(unit.astype(np.float32), args.output)
    return EXIT_OK


def cmd_fid(args) -> int:
    a = _load_batch(args.set_a)
    b = _load_batch(args.set_b)
    value = fid(a, b, parse_feature_map(args.features))
    print(f"{value:.6f}")
    return EXIT_OK


def cmd_run_suite(args) -> int:
    result = run_suite(args.config, workers=args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(emit_csv(result))
    (out / "report.json").write_text(emit_json(result))
    (out / "report.md").write_text(emit_markdown(result))
    try:
        (out / "chart.svg").write_text(emit_severity_chart(result))
    except DiffBenchError:
        pass  # fewer than two severities: no curve to draw
    failures = [r for r in result.rows if r.error]
    print(f"{len(result.rows)} cells, {len(failures)} failed; reports in {out}")
    for row in failures:
        print(f"  FAILED {row.dataset}/{row.corruption}/s{row.severity}"
              f"/{row.sampler}: {row.error}", file=sys.stderr)
    return EXIT_CELL_FAILURE if failures else EXIT_OK


def _emit(result, fmt: str) -> str:
    if fmt == "csv":
        return emit_csv(result)
    if fmt == "json":
        return emit_json(result)
    return emit_markdown(result)


def cmd_report(args) -> int:
    result = parse_json(Path(args.input).read_text())
    text = _emit(result, args.format)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_chart(args) -> int:
    result = parse_json(Path(args.input).read_text())
    Path(args.output).write_text(emit_severity_chart(result))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffbench",
        description="corruption robustness benchmark for small diffusion models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="apply a corruption to an image batch")
    p.add_argument("--input", required=True, help=".idx, .dfc, .ppm or .pgm")
    p.add_argument("--output", required=True, help=".dfc, .ppm or .pgm")
    p.add_argument("--kind", default="identity",
                   choices=[k.value for k in CorruptionKind])
    p.add_argument("--severity", type=int, default=1, choices=range(1, 6))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ppm-dir", default="", help="also dump per-image PPM files")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("fractal-gen", help="generate plasma fractal fields")
    p.add_argument("--k", type=int, default=5, help="grid side is 2^k + 1")
    p.add_argument("--roughness", type=float, default=1.0)
    p.add_argument("--decay", type=float, default=2.0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_fractal_gen)

    p = sub.add_parser("train", help="train the small noise predictor")
    p.add_argument("--data", required=True, help="unit-domain image batch file")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--hidden", type=int, default=768)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="checkpoint path (.dfc)")
    p.add_argument("--curve", default="", help="optional loss curve CSV path")
    _add_schedule_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw images from a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("-n", type=int, default=16)
    p.add_argument("--sampler", default="ddpm", choices=["ddpm", "ddim"])
    p.add_argument("--steps", type=int, default=0, help="0 = full schedule")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    _add_schedule_args(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fid", help="Frechet distance between two image sets")
    p.add_argument("set_a")
    p.add_argument("set_b")
    p.add_argument("--features", default="random_projection:16")
    p.set_defaults(func=cmd_fid)

    p = sub.add_parser("run-suite", help="run a configured experiment grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run_suite)

    p = sub.add_parser("report", help="re-emit a suite JSON in another format")
    p.add_argument("--input", required=True, help="report.json from run-suite")
    p.add_argument("--format", default="markdown",
                   choices=["csv", "json", "markdown"])
    p.add_argument("--output", default="")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("chart", help="severity curve SVG from a suite JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_chart)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DiffBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
