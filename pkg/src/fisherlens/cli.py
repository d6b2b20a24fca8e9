"""Command-line surface: ingest -> prepare -> train -> eval -> predict, plus
face detection and grayscale utilities.

Exit codes are uniform across subcommands: 0 success, 2 usage or validation
error, 3 I/O error, 4 empty result (nothing detected / nothing survived).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import evaluate, figures, jsonio, netpbm
from .cascade import (
    detect_face_sequence,
    detect_multiscale,
    load_cascade_sequence,
    packaged_cascade_dir,
)
from .dataset import (
    DatasetManifest,
    ingest_ck,
    load_gray,
    parse_label,
    prepare_faces,
    seed_from_env,
    split,
    Rng,
)
from .errors import EmptyResultError, FisherlensError
from .fisherface import SampleMatrix, load_model, predict, save_model, train_fisherface
from .imgproc import GrayImage, crop, gray_average, gray_luminosity, resize_bilinear


def _parse_size(text: str):
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise FisherlensError(f"size must look like 48x48, got {text!r}")
    try:
        w, h = int(parts[0]), int(parts[1])
    except ValueError:
        raise FisherlensError(f"size must look like 48x48, got {text!r}") from None
    if w < 1 or h < 1:
        raise FisherlensError(f"size must be positive, got {text!r}")
    return w, h


def _parse_subset(text: str):
    return tuple(parse_label(part) for part in text.split(",") if part.strip())


def _load_cascades(directory):
    return load_cascade_sequence(directory if directory else packaged_cascade_dir())


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    w, h = _parse_size(args.size)
    if os.path.exists(args.out) and not args.force:
        raise FisherlensError(f"{args.out} exists; pass --force to overwrite")
    manifest = ingest_ck(args.images, args.labels, w, h)
    manifest.save(args.out)
    print(f"wrote {len(manifest)} records to {args.out}")
    return 0


def cmd_prepare(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    if args.size is not None:
        w, h = _parse_size(args.size)
        manifest = DatasetManifest(w, h, manifest.records)
    cascades = _load_cascades(args.cascades)
    report = prepare_faces(manifest, cascades, args.out_root, gray_method=args.gray)
    out_path = os.path.join(args.out_root, "manifest.json")
    report.manifest.save(out_path)
    for rec in report.skipped:
        print(f"no face: {rec.image_path}", file=sys.stderr)
    for rec, message in report.errors:
        print(f"error on {rec.image_path}: {message}", file=sys.stderr)
    print(
        f"prepared {len(report.manifest)} faces"
        f" (skipped {len(report.skipped)}, errors {len(report.errors)}) -> {out_path}"
    )
    return 0


def _train_on_manifest(manifest: DatasetManifest, seed: int, fraction: float, k_pca=None):
    train_m, _ = split(manifest, fraction, Rng(seed))
    cache: dict = {}
    faces = [
        evaluate.load_face(cache, r.image_path, manifest.face_w, manifest.face_h)
        for r in train_m.records
    ]
    x = SampleMatrix.from_faces(faces, [r.label for r in train_m.records])
    return train_fisherface(x, k_pca=k_pca)


def cmd_train(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    seed = seed_from_env(args.seed)
    model = _train_on_manifest(manifest, seed, args.split, args.pca_dims)
    save_model(model, args.out)
    print(f"wrote model ({model.dim} dimensions, {len(model.class_list)} classes) to {args.out}")
    return 0


def cmd_eval(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    seed = seed_from_env(args.seed)
    subset = _parse_subset(args.subset) if args.subset else None
    cfg = evaluate.TrialConfig(
        seed=seed, fraction=args.split, subset=subset, trials=args.trials
    )
    report = evaluate.run_repeated(manifest, cfg)
    text, doc = evaluate.render_report(report)
    sys.stdout.write(text)
    if args.report_dir:
        os.makedirs(args.report_dir, exist_ok=True)
        jsonio.dump_path(doc, os.path.join(args.report_dir, "report.json"))
        with open(os.path.join(args.report_dir, "report.txt"), "w", encoding="ascii") as fh:
            fh.write(text)
        evaluate.write_trials_csv(report, os.path.join(args.report_dir, "trials.csv"))
        evaluate.write_confusion_csv(report.pooled, os.path.join(args.report_dir, "confusion.csv"))
        figures.save_confusion_figure(report.pooled, os.path.join(args.report_dir, "confusion.png"))
        figures.save_accuracy_figure(report, os.path.join(args.report_dir, "accuracy.png"))
        print(f"report written to {args.report_dir}", file=sys.stderr)
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    face = load_gray(args.infile, args.gray)
    if args.raw_image:
        cascades = _load_cascades(args.cascades)
        rect = detect_face_sequence(cascades, face)
        if rect is None:
            raise EmptyResultError(f"no face detected in {args.infile}")
        face = resize_bilinear(crop(face, rect), model.face_w, model.face_h)
    pred = predict(model, face)
    print(f"{pred.label.name} {format(pred.distance, '.17g')}")
    if pred.runner_up is not None:
        label, distance = pred.runner_up
        print(f"runner_up {label.name} {format(distance, '.17g')}")
    return 0


def cmd_detect(args) -> int:
    cascades = _load_cascades(args.cascades)
    img = load_gray(args.infile, args.gray)
    detections = []
    for model in cascades:
        detections = detect_multiscale(
            model,
            img,
            scale_factor=args.scale_factor,
            min_neighbors=args.min_neighbors,
            min_size=args.min_size,
            threads=args.threads,
        )
        if detections:
            break
    doc = {
        "image": args.infile,
        "detections": [
            {
                "x": d.rect.x,
                "y": d.rect.y,
                "w": d.rect.w,
                "h": d.rect.h,
                "neighbors": d.neighbors,
            }
            for d in detections
        ],
    }
    if args.out:
        jsonio.dump_path(doc, args.out)
        print(f"{len(detections)} detection(s) -> {args.out}")
    else:
        print(jsonio.dumps(doc))
    return 0


def cmd_gray(args) -> int:
    img = netpbm.read_image(args.infile)
    if isinstance(img, GrayImage):
        gray = img
    elif args.method == "average":
        gray = gray_average(img)
    else:
        gray = gray_luminosity(img)
    netpbm.write_image(gray, args.out)
    print(f"wrote {gray.width}x{gray.height} grayscale image to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fisherlens",
        description="facial emotion recognition: cascade face detection plus "
        "a Fisherface (PCA+LDA) classifier",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress details")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a dataset manifest from an image/label tree")
    p.add_argument("--images", required=True, help="root of subject/session image folders")
    p.add_argument("--labels", required=True, help="root of subject/session label folders")
    p.add_argument("--out", required=True, help="manifest file to write")
    p.add_argument("--size", default="48x48", help="face size for later preparation (WxH)")
    p.add_argument("--force", action="store_true", help="overwrite an existing --out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("prepare", help="detect, crop, resize and save faces")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cascades", default=None, help="cascade XML directory (default: bundled)")
    p.add_argument("--out-root", required=True, help="directory for prepared faces")
    p.add_argument("--size", default=None, help="override manifest face size (WxH)")
    p.add_argument("--gray", choices=("luminosity", "average"), default="luminosity")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a Fisherface model on a split of the manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=None, help="default: FISHERLENS_SEED or 42")
    p.add_argument("--split", type=float, default=0.8, help="training fraction (0, 1)")
    p.add_argument("--pca-dims", type=int, default=None, help="override the PCA dimension")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="repeated seeded train/test trials with a report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=None, help="default: FISHERLENS_SEED or 42")
    p.add_argument("--split", type=float, default=0.8, help="training fraction (0, 1)")
    p.add_argument("--subset", default=None, help="comma-separated emotion names or codes")
    p.add_argument("--report-dir", default=None, help="also write report files and figures here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify one face image")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--raw-image", action="store_true", help="detect and crop the face first")
    p.add_argument("--cascades", default=None, help="cascade XML directory (default: bundled)")
    p.add_argument("--gray", choices=("luminosity", "average"), default="luminosity")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("detect", help="run the face detector on one image")
    p.add_argument("--cascades", default=None, help="cascade XML directory (default: bundled)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None, help="write detections document here")
    p.add_argument("--scale-factor", type=float, default=1.1)
    p.add_argument("--min-neighbors", type=int, default=3)
    p.add_argument("--min-size", type=int, default=24)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--gray", choices=("luminosity", "average"), default="luminosity")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("gray", help="convert a color image to grayscale")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--method", choices=("average", "luminosity"), default="luminosity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gray)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except EmptyResultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FisherlensError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
