"""Command-line entry point: train / eval / infer / serve / synth-data."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import torch

from .core import TrainConfig, denormalize_image, make_schedule
from .data import load_manifest, load_pair, split, write_synth_dataset
from .errors import HaifitError
from .losses import load_test_extractor
from .metrics import MetricsReport, fid_from_samples, lpips_distance, psnr, ssim
from .trainer import generate_images, load_generator, progressive_train


def _parse_schedule(text: str):
    levels = [int(x) for x in text.split(",")]
    return make_schedule(levels[0], levels[-1])


def _load_config(args) -> TrainConfig:
    """Config file first, then flag overrides."""
    values: dict = {}
    if getattr(args, "config", None):
        values = json.loads(Path(args.config).read_text())
    config = TrainConfig.from_dict(values) if "schedule" in values else TrainConfig(**values)
    if getattr(args, "schedule", None):
        config.schedule = _parse_schedule(args.schedule)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "batch_size", None) is not None:
        config.batch_size = args.batch_size
    if getattr(args, "epochs_per_stage", None) is not None:
        config.epochs_per_stage = args.epochs_per_stage
    if getattr(args, "max_epochs", None) is not None:
        config.max_epochs = args.max_epochs
    if getattr(args, "no_afrm", False):
        config.use_afrm = False
    if getattr(args, "no_cscm", False):
        config.use_cscm = False
    return config


def cmd_train(args) -> int:
    config = _load_config(args)
    print(f"loss weights: l1={config.lambda_l1} adv={config.lambda_adv} "
          f"style={config.lambda_style} per={config.lambda_per}")
    manifest = load_manifest(args.data_root)
    if args.train_count:
        manifest = split(manifest, args.train_count, config.seed)
    pairs = [load_pair(manifest, i, config.schedule.finest) for i in manifest.train_ids]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = progressive_train(config, pairs, load_test_extractor(),
                             out_dir=str(out), log_path=str(out / "train_log.jsonl"))
    print(f"final checkpoint: {out / 'final.ckpt'} (fingerprint {ckpt.fingerprint()})")
    return 0


def cmd_eval(args) -> int:
    generator, ckpt = load_generator(args.checkpoint)
    finest = ckpt.config.schedule.finest
    manifest = load_manifest(args.data_root)
    ids = manifest.test_ids or manifest.ids
    extractor = load_test_extractor()
    psnrs, ssims, lpips_vals = [], [], []
    real_feats, fake_feats = [], []
    wall = 0.0
    for pair_id in ids:
        pair = load_pair(manifest, pair_id, finest)
        t0 = time.perf_counter()
        gen = generate_images(generator, pair.sketch)
        wall += time.perf_counter() - t0
        gen_arr = denormalize_image(gen).astype(np.float64)
        ref_arr = denormalize_image(pair.photo).astype(np.float64)
        psnrs.append(psnr(gen_arr, ref_arr))
        ssims.append(ssim(gen_arr, ref_arr))
        lpips_vals.append(lpips_distance(gen.data, pair.photo.data, extractor))
        with torch.no_grad():
            real_feats.append(extractor.fid_features(pair.photo.data).numpy()[0])
            fake_feats.append(extractor.fid_features(gen.data).numpy()[0])
    report = MetricsReport(
        psnr_db=float(np.mean(psnrs)), ssim=float(np.mean(ssims)),
        lpips=float(np.mean(lpips_vals)),
        fid=fid_from_samples(np.array(real_feats), np.array(fake_feats)),
        n=len(ids), config_fingerprint=ckpt.fingerprint(),
    )
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    print(f"inference wall clock: {wall / len(ids) * 1000:.1f} ms/image "
          f"(model {ckpt.fingerprint()})")
    return 0


def cmd_infer(args) -> int:
    from .server import run_inference

    generator, ckpt = load_generator(args.checkpoint)
    png = run_inference(generator, Path(args.sketch).read_bytes(),
                        ckpt.config.schedule.finest)
    Path(args.out).write_bytes(png)
    print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import os

    import uvicorn

    from .server import create_app

    checkpoint = args.checkpoint or os.environ.get("HAIFIT_CHECKPOINT")
    if not checkpoint:
        print("error: --checkpoint or HAIFIT_CHECKPOINT required", file=sys.stderr)
        return 2
    app = create_app(checkpoint, max_bytes=args.max_bytes)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_synth_data(args) -> int:
    manifest = write_synth_dataset(args.out, args.count, args.resolution, args.seed or 0)
    print(f"wrote {len(manifest.ids)} pairs under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="haifit",
                                description="Sketch-to-image translation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--config", help="JSON file with TrainConfig fields")
        sp.add_argument("--schedule", help="comma-separated resolutions, e.g. 32,64,128,256")
        sp.add_argument("--no-afrm", action="store_true", help="ablate the abstract branch")
        sp.add_argument("--no-cscm", action="store_true", help="ablate cross-level fusion")

    sp = sub.add_parser("train", help="run progressive training")
    common(sp)
    sp.add_argument("--data-root", required=True)
    sp.add_argument("--out", required=True, help="output directory for checkpoints")
    sp.add_argument("--train-count", type=int, default=None)
    sp.add_argument("--batch-size", type=int, default=None)
    sp.add_argument("--epochs-per-stage", type=int, default=None)
    sp.add_argument("--max-epochs", type=int, default=None)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="metrics report over a dataset")
    sp.add_argument("--data-root", required=True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", help="report file path")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("infer", help="one sketch file to one image file")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--sketch", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("serve", help="run the HTTP inference service")
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--max-bytes", type=int, default=8 * 1024 * 1024)
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("synth-data", help="write synthetic paired sketches/photos")
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--resolution", type=int, default=256)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth_data)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HaifitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
