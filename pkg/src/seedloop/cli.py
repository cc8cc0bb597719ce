"""Command-line entry points for the seed screening workflow."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import cgan
from .acquisition import AcquisitionConfig, acquire_batch
from .classifier.metrics import evaluate
from .classifier.models import ModelSpec, TrainConfig, init_model, load_model, save_model
from .classifier.training import train
from .dataset import (
    CANONICAL_CLASSES,
    Dataset,
    ImageRecord,
    balancing_plan,
    class_stats,
    load_manifest,
    save_manifest,
    stratified_split,
    strip_labels,
)
from .loop import LoopConfig, resume, run, start_run
from .oracle import oracle_annotator, oracle_from_dataset
from .segmentation import SegmentationConfig, TrayImage, pair_views, segment_tray
from .synthetic import make_dataset


def _res(text: str) -> tuple[int, int]:
    side = int(text)
    return (side, side)


def _load_image(path: str) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"))


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out_dir)
    data = make_dataset(args.n, seed=args.seed, kind=args.kind, size=args.size)
    train_pool, val = stratified_split(data, 1.0 - args.val_fraction, seed=args.seed)
    if args.seed_labeled >= len(train_pool):
        raise SystemExit("--seed-labeled must be smaller than the non-validation records")
    seed_set, rest = stratified_split(
        train_pool, args.seed_labeled / len(train_pool), seed=args.seed + 1
    )
    images = out / "images"
    save_manifest(seed_set, out / "labeled.jsonl", image_dir=images)
    save_manifest(strip_labels(rest), out / "pool.jsonl", image_dir=images)
    save_manifest(val, out / "val.jsonl", image_dir=images)
    save_manifest(rest, out / "gt.jsonl", image_dir=images)
    print(
        f"wrote {len(seed_set)} labeled / {len(rest)} pool / {len(val)} val records to {out}"
    )
    return 0


def cmd_segment(args: argparse.Namespace) -> int:
    settings: dict = {}
    if args.config:
        settings.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    if args.threshold is not None:
        settings["threshold_method"] = args.threshold
    if args.min_area is not None:
        settings["min_area_px"] = args.min_area
    if args.padding is not None:
        settings["crop_padding_px"] = args.padding
    if args.min_separation is not None:
        settings["distance_peak_min_separation_px"] = args.min_separation
    config = SegmentationConfig(**settings)
    top = segment_tray(TrayImage(_load_image(args.image), view=args.view), config)
    out = Path(args.out_dir)
    images = out / "images"
    images.mkdir(parents=True, exist_ok=True)
    records: list[ImageRecord] = []

    def save_crops(crops, view: str, pair_ids=None) -> None:
        for i, crop in enumerate(crops):
            rid = f"{args.prefix}-{view}-{i:04d}"
            Image.fromarray(crop.pixels).save(images / f"{rid}.png")
            records.append(
                ImageRecord(
                    id=rid,
                    view=view,
                    source="captured",
                    path=str(Path("images") / f"{rid}.png"),
                    pair_id=None if pair_ids is None else pair_ids[i],
                )
            )

    if args.bottom_image:
        bottom_img = _load_image(args.bottom_image)
        bottom = segment_tray(TrayImage(bottom_img, view="bottom"), config)
        pairs = pair_views(top, bottom, image_width=bottom_img.shape[1])
        top_index = {id(c): i for i, c in enumerate(top)}
        bottom_index = {id(c): i for i, c in enumerate(bottom)}
        pair_of_top = {}
        pair_of_bottom = {}
        for k, (t, b) in enumerate(pairs):
            pid = f"{args.prefix}-p{k:04d}"
            pair_of_top[top_index[id(t)]] = pid
            pair_of_bottom[bottom_index[id(b)]] = pid
        save_crops(top, "top", [pair_of_top[i] for i in range(len(top))])
        save_crops(bottom, "bottom", [pair_of_bottom[i] for i in range(len(bottom))])
        print(f"segmented {len(top)} seeds per view, paired {len(pairs)}")
    else:
        save_crops(top, args.view)
        print(f"segmented {len(top)} seeds")
    save_manifest(Dataset(records), out / "manifest.jsonl")
    print(f"crops and manifest written to {out}")
    return 0


def _split_train_val(args: argparse.Namespace) -> tuple[Dataset, Dataset]:
    data = load_manifest(args.manifest).labeled_subset()
    if args.val_manifest:
        return data, load_manifest(args.val_manifest).labeled_subset()
    return stratified_split(data, 1.0 - args.val_fraction, seed=args.seed)


def cmd_train(args: argparse.Namespace) -> int:
    train_set, val_set = _split_train_val(args)
    spec = ModelSpec(
        backend_id=args.backend,
        input_resolution=_res(args.resolution),
        num_classes=len(CANONICAL_CLASSES),
        init_seed=args.seed,
    )
    config = TrainConfig(
        max_epochs=args.epochs,
        early_stop_patience=args.patience,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
    )
    model = init_model(spec)
    model, history = train(model, train_set, val_set, config)
    for entry in history:
        print(
            f"epoch {entry['epoch']}  train_acc {entry['train_acc']:.4f}  "
            f"val_acc {entry['val_acc']:.4f}  val_loss {entry['val_loss']:.4f}"
        )
    save_model(model, args.out)
    best = max(e["val_acc"] for e in history)
    print(f"saved model to {args.out} (best val accuracy {best:.4f})")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    data = load_manifest(args.manifest).labeled_subset()
    model = load_model(args.model)
    report = evaluate(model, data, fuse_views=args.fuse_views, fuse_rule=args.fuse_rule)
    text = report.to_text()
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_acquire(args: argparse.Namespace) -> int:
    pool = load_manifest(args.pool)
    model = load_model(args.model)
    config = AcquisitionConfig(
        top_k=min(args.top_k, len(pool)),
        batch_size=min(args.batch, args.top_k, len(pool)),
        seed=args.seed,
        strategy=args.strategy,
    )
    batch = acquire_batch(model, pool, config, cycle=args.cycle)
    payload = {
        "cycle": batch.cycle,
        "items": [
            {"id": it.id, "suggested_label": it.suggested_label, "entropy": it.entropy}
            for it in batch.items
        ],
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"acquired {len(batch.items)} of {len(pool)} pool images -> {args.out}")
    return 0


def cmd_gan_train(args: argparse.Namespace) -> int:
    data = load_manifest(args.manifest).labeled_subset()
    config = cgan.GanConfig(
        resolution=_res(args.resolution),
        dim_z=args.dim_z,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
    )
    generator, discriminator, history = cgan.train_cgan(
        data, config, max_steps=args.max_steps, log_every=args.log_every
    )
    cgan.save_gan(generator, discriminator, args.out)
    if history:
        d_loss, g_loss = history[-1]
        print(f"trained {len(history)} steps (final d_loss {d_loss:.4f}, g_loss {g_loss:.4f})")
    print(f"saved GAN to {args.out}")
    return 0


def cmd_gan_sample(args: argparse.Namespace) -> int:
    generator, _ = cgan.load_gan(args.gan)
    records = cgan.sample(generator, args.label, args.n, seed=args.seed)
    out = Path(args.out_dir)
    save_manifest(Dataset(records), out / "manifest.jsonl", image_dir=out / "images")
    print(f"wrote {len(records)} generated {args.label!r} images to {out}")
    return 0


def cmd_gan_interpolate(args: argparse.Namespace) -> int:
    generator, _ = cgan.load_gan(args.gan)
    import torch

    g1 = torch.Generator().manual_seed(args.seed)
    g2 = torch.Generator().manual_seed(args.seed + 1)
    z1 = torch.randn(generator.config.dim_z, generator=g1).numpy()
    z2 = torch.randn(generator.config.dim_z, generator=g2).numpy()
    frames = cgan.interpolate(generator, z1, z2, args.label, steps=args.steps)
    strip = np.concatenate(
        [np.clip(np.rint(f * 255.0), 0, 255).astype(np.uint8) for f in frames], axis=1
    )
    Image.fromarray(strip).save(args.out)
    print(f"wrote {args.steps}-frame interpolation strip to {args.out}")
    return 0


def cmd_balance(args: argparse.Namespace) -> int:
    data = load_manifest(args.manifest).labeled_subset()
    generator, _ = cgan.load_gan(args.gan)
    stats = class_stats(data)
    target = "max_class" if args.target is None else args.target
    plan = balancing_plan(stats, target)
    augmented = cgan.augment_dataset(data, generator, plan, seed=args.seed)
    out = Path(args.out_dir)
    save_manifest(augmented, out / "manifest.jsonl", image_dir=out / "images")
    after = class_stats(augmented)
    print(f"counts before: {stats.counts}")
    print(f"counts after:  {after.counts}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    if args.resume:
        state = resume(out_dir)
        print(f"resumed run at cycle {state.cycle} ({len(state.labeled)} labeled)")
    else:
        if not (args.labeled and args.pool and args.val):
            raise SystemExit("fresh runs need --labeled, --pool and --val manifests")
        config = LoopConfig(
            model_spec=ModelSpec(
                backend_id=args.backend,
                input_resolution=_res(args.resolution),
                num_classes=len(CANONICAL_CLASSES),
            ),
            train_config=TrainConfig(
                max_epochs=args.epochs,
                early_stop_patience=args.patience,
                batch_size=args.batch_size,
                learning_rate=args.lr,
            ),
            acquisition=AcquisitionConfig(
                top_k=args.top_k, batch_size=args.batch, strategy=args.strategy
            ),
            seed=args.seed,
            val_source=str(args.val),
        )
        state = start_run(
            labeled=load_manifest(args.labeled),
            unlabeled=load_manifest(args.pool),
            val=load_manifest(args.val),
            config=config,
            out_dir=out_dir,
        )

    if args.serve:
        from .service import serve

        ui_dir = args.ui_dir
        if ui_dir is None:
            bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
            ui_dir = bundled if bundled.is_dir() else None
        serve(state, cycles=args.cycles, host=args.host, port=args.port, ui_dir=ui_dir)
        return 0

    if not args.oracle:
        raise SystemExit("provide --oracle GT_MANIFEST for unattended runs, or --serve")
    truth = oracle_from_dataset(
        load_manifest(args.oracle).labeled_subset(),
        noise_rate=args.oracle_noise,
        seed=args.seed,
    )
    remaining = args.cycles - state.cycle
    if remaining <= 0:
        print(f"run already has {state.cycle} cycles completed; nothing to do")
        return 0
    records = run(state, oracle_annotator(truth), cycles=remaining)
    for rec in records:
        print(
            f"cycle {rec.cycle}: val_accuracy {rec.val_accuracy:.4f}  "
            f"annotation {rec.annotation_seconds:.2f}s  labeled_total {rec.labeled_total}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seedloop",
        description="Seed quality screening: segmentation, classification, "
        "GAN balancing and batch active learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled fixture")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n", type=int, default=1200)
    p.add_argument("--kind", choices=("shapes", "solid"), default="shapes")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--seed-labeled", type=int, default=64,
                   help="records labeled up front; the rest become the pool")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="split tray photos into per-seed crops")
    p.add_argument("--in", dest="image", required=True, help="top-view tray photo")
    p.add_argument("--bottom-image", help="mirrored bottom-view tray photo")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--view", default="top", choices=("top", "bottom"))
    p.add_argument("--prefix", default="seed")
    p.add_argument("--config", help="JSON file with segmentation settings")
    p.add_argument("--threshold", type=float, default=None,
                   help="fixed gray threshold; omit for Otsu")
    p.add_argument("--min-area", type=int, default=None)
    p.add_argument("--padding", type=int, default=None)
    p.add_argument("--min-separation", type=int, default=None)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train", help="train the seed classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--val-manifest")
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--backend", default="smallcnn")
    p.add_argument("--resolution", default="32")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="report accuracy metrics for a model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--fuse-views", action="store_true")
    p.add_argument("--fuse-rule", default="mean", choices=("mean", "max", "product"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("acquire", help="pick the next annotation batch")
    p.add_argument("--model", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--top-k", type=int, default=5000)
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--strategy", default="entropy_kmeans",
                   choices=("entropy_kmeans", "entropy_top", "random"))
    p.add_argument("--cycle", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("gan-train", help="train the conditional GAN")
    p.add_argument("--manifest", required=True)
    p.add_argument("--resolution", default="64")
    p.add_argument("--epochs", type=int, default=250)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--dim-z", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gan_train)

    p = sub.add_parser("gan-sample", help="sample class-conditional images")
    p.add_argument("--gan", required=True)
    p.add_argument("--class", dest="label", required=True, choices=CANONICAL_CLASSES)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gan_sample)

    p = sub.add_parser("gan-interpolate", help="latent interpolation strip")
    p.add_argument("--gan", required=True)
    p.add_argument("--class", dest="label", required=True, choices=CANONICAL_CLASSES)
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gan_interpolate)

    p = sub.add_parser("balance", help="augment a manifest to equal class counts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--gan", required=True)
    p.add_argument("--target", type=int, default=None,
                   help="per-class target; defaults to the largest class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("run", help="drive the batch active-learning loop")
    p.add_argument("--labeled", help="initial labeled manifest")
    p.add_argument("--pool", help="unlabeled pool manifest")
    p.add_argument("--val", help="validation manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--cycles", type=int, default=8)
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--top-k", type=int, default=5000)
    p.add_argument("--strategy", default="entropy_kmeans",
                   choices=("entropy_kmeans", "entropy_top", "random"))
    p.add_argument("--backend", default="smallcnn")
    p.add_argument("--resolution", default="32")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle", help="labeled manifest used as simulated-annotator ground truth")
    p.add_argument("--oracle-noise", type=float, default=0.0)
    p.add_argument("--serve", action="store_true", help="serve the annotation UI instead")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
