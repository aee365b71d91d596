"""Command line interface.

One binary with subcommands covering the full workflow: train and evaluate
the quality classifier, score directories, run GAN training sessions,
enhance images, and build comparison reports and grids. Every invocation
writes a manifest.json next to its outputs recording the command, argv,
settings, and SHA-256 checksums of produced artifacts, so runs are
self-describing.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import torch

from .data import (
    BAD,
    GOOD,
    IMAGE_EXTENSIONS,
    SplitSpec,
    save_split,
    scan_paired,
    scan_unpaired,
    split,
    to_torch,
)
from .errors import (
    AquaganError,
    CheckpointError,
    DataError,
    DecodeError,
    NumericError,
    ShapeError,
    SpecMismatchError,
)
from .imagecore import decode_image, encode_image, load_image_resized, quantize, resize_to
from .losses import VARIANTS, get_variant
from .metrics import (
    MetricRow,
    build_report,
    count_confusion,
    markdown_confusion_table,
    markdown_metric_tables,
    psnr,
    ssim,
    uiqm,
    write_report_csv,
)
from .nets import (
    ClassifierSpec,
    Generator,
    GeneratorSpec,
    build_classifier,
    load_checkpoint,
    restore,
    save_checkpoint,
)
from .training import (
    TrainConfig,
    config_dict,
    train_classifier,
    train_gan,
    write_config_text,
    write_log_csv,
)

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage by default; 2 is reserved for data
    # errors here, so usage problems must exit 1 instead
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_train_flags(p, input_size=256):
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input-size", type=int, default=input_size)
    p.add_argument("--deterministic", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aquagan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify-train", help="train the quality classifier")
    p.add_argument("--data", required=True, help="tree with good/ and bad/ images")
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = sub.add_parser("classify-eval", help="confusion metrics on a labeled tree")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="tree with good/ and bad/ images")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--deterministic", action="store_true")

    p = sub.add_parser("score", help="score a directory of images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="directory of images")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--deterministic", action="store_true")

    p = sub.add_parser("gan-train", help="run one GAN training session")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", required=True, choices=sorted(VARIANTS))
    p.add_argument("--checkpoint", required=True, help="discriminator (classifier) checkpoint")
    _add_train_flags(p)

    p = sub.add_parser("enhance", help="run the generator over a directory")
    p.add_argument("--checkpoint", required=True, help="generator checkpoint")
    p.add_argument("--data", required=True, help="directory of input images")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--deterministic", action="store_true")

    p = sub.add_parser("evaluate", help="report PSNR/SSIM/UIQM against references")
    p.add_argument("--enhanced", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--input", default=None, help="optional unenhanced input directory")
    p.add_argument("--out", required=True)

    p = sub.add_parser("grid", help="side-by-side comparison strips")
    p.add_argument("--input", required=True)
    p.add_argument("--enhanced", required=True, nargs="+")
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True)

    return parser


# ---------------------------------------------------------------------------
# shared plumbing


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, argv, config: dict, paths: dict, seed, started: float):
    artifacts = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            artifacts[str(p.relative_to(out_dir))] = _sha256_file(p)
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "paths": {k: str(v) for k, v in paths.items()},
        "seed": seed,
        "artifacts": artifacts,
        "duration_s": round(time.time() - started, 3),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        lr=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        input_size=args.input_size,
        deterministic=args.deterministic,
    )


def _apply_cli_determinism(args):
    if getattr(args, "deterministic", False):
        torch.set_num_threads(1)


def _load_classifier(path):
    ckpt = load_checkpoint(path)
    spec = ClassifierSpec(**ckpt.spec)
    model = build_classifier(spec)
    restore(model, ckpt, kind="classifier", spec=spec)
    model.eval()
    return model, spec, ckpt


def _load_generator(path):
    ckpt = load_checkpoint(path)
    raw = dict(ckpt.spec)
    raw["channels"] = tuple(raw["channels"])
    spec = GeneratorSpec(**raw)
    model = Generator(spec)
    restore(model, ckpt, kind="generator", spec=spec)
    model.eval()
    return model, spec, ckpt


def _list_images(directory: Path):
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"not a directory: {directory}")
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def _score_paths(model, spec, paths, batch_size):
    """Score image files in batches; unreadable files are skipped with a warning.

    Returns (path, score, label) triples in input order.
    """
    rows = []
    readable = []
    for p in paths:
        try:
            readable.append((p, load_image_resized(p, spec.input_size, spec.input_size)))
        except (DecodeError, OSError) as exc:
            log.warning("skipping %s: %s", p, exc)
    with torch.no_grad():
        for start in range(0, len(readable), batch_size):
            chunk = readable[start : start + batch_size]
            scores = model(to_torch([img for _, img in chunk]))
            for (p, _), s in zip(chunk, scores):
                value = float(s)
                rows.append((p, value, GOOD if value < 0.5 else BAD))
    return rows


def _write_scores_csv(rows, path):
    lines = ["image,score,label"]
    lines += [f"{name},{value:.6f},{label}" for name, value, label in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def _variant_weight_summary(variant) -> dict:
    # only the weights of terms the variant actually uses appear, so a
    # variant without a GDL term has no lambda_gdl key at all
    out = {"w_gan": variant.weights.w_gan, "w_sim": variant.weights.w_sim}
    if "ang" in variant.terms:
        out["lambda_ang"] = variant.weights.lambda_ang
    if "gdl" in variant.terms:
        out["lambda_gdl"] = variant.weights.lambda_gdl
    return out


# ---------------------------------------------------------------------------
# subcommands


def _cmd_classify_train(args, argv):
    started = time.time()
    out = _out_dir(args)
    config = _train_config(args)
    samples = scan_unpaired(args.data)
    train, val = split(samples, SplitSpec(seed=args.seed, val_fraction=0.15))
    model, tlog = train_classifier(train, val, config)
    spec = ClassifierSpec(input_size=args.input_size)
    meta = {
        "kind": "classifier",
        "config": config_dict(config),
        "epochs_run": (tlog.rows[-1].epoch + 1) if tlog.rows else 0,
    }
    save_checkpoint(out / "classifier.ckpt", model, kind="classifier", spec=spec, meta=meta)
    write_log_csv(tlog, out / "log.csv")
    save_split(out / "split.json", train, val)
    write_config_text(config_dict(config), out / "config.txt")
    _write_manifest(
        out, "classify-train", argv, config_dict(config),
        {"data": args.data, "out": out}, args.seed, started,
    )
    return 0


def _cmd_classify_eval(args, argv):
    started = time.time()
    _apply_cli_determinism(args)
    out = _out_dir(args)
    model, spec, _ = _load_classifier(args.checkpoint)
    samples = scan_unpaired(args.data)
    rows = _score_paths(model, spec, [s.path for s in samples], args.batch_size)
    predicted_by_path = {path: label for path, _, label in rows}
    actual, predicted = [], []
    for s in samples:
        if s.path not in predicted_by_path:
            continue
        actual.append(s.label == GOOD)
        predicted.append(predicted_by_path[s.path] == GOOD)
    if not actual:
        raise DataError("no readable images to evaluate")
    counts = count_confusion(actual, predicted)
    root = Path(args.data)
    _write_scores_csv(
        [(p.relative_to(root).as_posix(), v, lab) for p, v, lab in rows],
        out / "scores.csv",
    )
    table = markdown_confusion_table(counts)
    header = (
        f"tp = {counts.tp}, fp = {counts.fp}, tn = {counts.tn}, fn = {counts.fn} "
        f"(positive class: good, threshold 0.5)\n\n"
    )
    (out / "confusion.md").write_text(header + table)
    _write_manifest(
        out, "classify-eval", argv, {"batch_size": args.batch_size},
        {"data": args.data, "checkpoint": args.checkpoint, "out": out}, None, started,
    )
    return 0


def _cmd_score(args, argv):
    started = time.time()
    _apply_cli_determinism(args)
    out = _out_dir(args)
    model, spec, _ = _load_classifier(args.checkpoint)
    paths = _list_images(args.data)
    if not paths:
        raise DataError(f"no images under {args.data}")
    rows = _score_paths(model, spec, paths, args.batch_size)
    _write_scores_csv([(p.name, v, lab) for p, v, lab in rows], out / "scores.csv")
    _write_manifest(
        out, "score", argv, {"batch_size": args.batch_size},
        {"data": args.data, "checkpoint": args.checkpoint, "out": out}, None, started,
    )
    return 0


def _cmd_gan_train(args, argv):
    started = time.time()
    out = _out_dir(args)
    config = _train_config(args)
    variant = get_variant(args.variant)
    if variant.paired:
        samples = scan_paired(args.data)
    else:
        samples = [s for s in scan_unpaired(args.data) if s.label != GOOD]
    disc, disc_spec, _ = _load_classifier(args.checkpoint)
    if disc_spec.input_size != args.input_size:
        raise SpecMismatchError(
            f"discriminator expects {disc_spec.input_size}px inputs but "
            f"--input-size is {args.input_size}"
        )
    generator, disc, tlog = train_gan(samples, variant, disc, config)
    epochs_run = (tlog.rows[-1].epoch + 1) if tlog.rows else 0
    weights = _variant_weight_summary(variant)
    meta = {
        "variant": variant.tag,
        "weights": weights,
        "epochs_run": epochs_run,
        "selection": "final-epoch",
        "config": config_dict(config),
    }
    gen_spec = GeneratorSpec(input_size=args.input_size)
    save_checkpoint(out / "generator.ckpt", generator, kind="generator", spec=gen_spec, meta=meta)
    if variant.trains_discriminator:
        save_checkpoint(
            out / "discriminator.ckpt", disc, kind="classifier", spec=disc_spec,
            meta={"variant": variant.tag, "config": config_dict(config)},
        )
    write_log_csv(tlog, out / "log.csv")
    write_config_text(config_dict(config), out / "config.txt")
    manifest_config = dict(config_dict(config))
    manifest_config["epochs"] = (
        config.epochs if config.epochs is not None else epochs_run
    )
    manifest_config["variant"] = variant.tag
    manifest_config["weights"] = weights
    _write_manifest(
        out, "gan-train", argv, manifest_config,
        {"data": args.data, "checkpoint": args.checkpoint, "out": out}, args.seed, started,
    )
    return 0


def _cmd_enhance(args, argv):
    started = time.time()
    _apply_cli_determinism(args)
    out = _out_dir(args)
    model, spec, _ = _load_generator(args.checkpoint)
    paths = _list_images(args.data)
    if not paths:
        raise DataError(f"no images under {args.data}")
    readable = []
    for p in paths:
        try:
            readable.append((p.name, load_image_resized(p, spec.input_size, spec.input_size)))
        except (DecodeError, OSError) as exc:
            log.warning("skipping %s: %s", p, exc)
    with torch.no_grad():
        for start in range(0, len(readable), args.batch_size):
            chunk = readable[start : start + args.batch_size]
            outputs = model(to_torch([img for _, img in chunk]))
            arr = outputs.numpy().transpose(0, 2, 3, 1).astype(np.float64)
            for (name, _), img in zip(chunk, arr):
                encode_image(quantize(np.clip(img, 0.0, 1.0)), out / name)
    _write_manifest(
        out, "enhance", argv, {"batch_size": args.batch_size, "input_size": spec.input_size},
        {"data": args.data, "checkpoint": args.checkpoint, "out": out}, None, started,
    )
    return 0


def _stem_map(directory):
    return {p.stem: p for p in _list_images(directory)}


def _metric_rows(candidates: dict, references: dict, stems) -> list:
    rows = []
    for stem in stems:
        ref = decode_image(references[stem])
        img = decode_image(candidates[stem])
        if img.shape != ref.shape:
            img = resize_to(img, ref.shape[0], ref.shape[1])
        rows.append(
            MetricRow(image=stem, psnr_db=psnr(img, ref), ssim=ssim(img, ref), uiqm=uiqm(img))
        )
    return rows


def _cmd_evaluate(args, argv):
    started = time.time()
    out = _out_dir(args)
    enhanced = _stem_map(args.enhanced)
    reference = _stem_map(args.reference)
    stems = sorted(set(enhanced) & set(reference))
    if not stems:
        raise DataError("no matching stems between enhanced and reference directories")
    method_label = Path(args.enhanced).name
    method_report = build_report(_metric_rows(enhanced, reference, stems))
    goal_rows = [
        MetricRow(image=s, psnr_db=psnr(img := decode_image(reference[s]), img),
                  ssim=ssim(img, img), uiqm=uiqm(img))
        for s in stems
    ]
    goal_report = build_report(goal_rows)
    quality_rows = []
    uiqm_rows = []
    if args.input:
        inputs = _stem_map(args.input)
        common = [s for s in stems if s in inputs]
        if common:
            input_report = build_report(_metric_rows(inputs, reference, common))
            quality_rows.append(("Input", input_report))
            uiqm_rows.append(("Input", input_report))
    quality_rows.append((method_label, method_report))
    uiqm_rows.append((method_label, method_report))
    uiqm_rows.append(("Goal", goal_report))
    write_report_csv(method_report, out / "report.csv")
    (out / "report.md").write_text(markdown_metric_tables(quality_rows, uiqm_rows))
    _write_manifest(
        out, "evaluate", argv, {"method": method_label, "stems": len(stems)},
        {"enhanced": args.enhanced, "reference": args.reference,
         "input": args.input or "", "out": out}, None, started,
    )
    return 0


def _label_tile(img_u8: np.ndarray, text: str) -> np.ndarray:
    from PIL import Image, ImageDraw

    bar = Image.new("RGB", (img_u8.shape[1], 14), (255, 255, 255))
    ImageDraw.Draw(bar).text((2, 1), text, fill=(0, 0, 0))
    return np.concatenate([np.asarray(bar), img_u8], axis=0)


def _grid_tile(path, height: int) -> np.ndarray:
    img = decode_image(path)
    h, w = img.shape[:2]
    width = max(2, round(w * height / h))
    return quantize(resize_to(img, height, width))


def _cmd_grid(args, argv):
    started = time.time()
    out = _out_dir(args)
    height = 160
    inputs = _stem_map(args.input)
    reference = _stem_map(args.reference)
    methods = [(Path(d).name, _stem_map(d)) for d in args.enhanced]
    stems = sorted(set(inputs) & set(reference))
    if not stems:
        raise DataError("no matching stems between input and reference directories")
    made = 0
    for stem in stems:
        columns = [("input", inputs[stem])]
        missing = False
        for name, files in methods:
            if stem not in files:
                log.warning("skipping %s: no file in method %s", stem, name)
                missing = True
                break
            columns.append((name, files[stem]))
        if missing:
            continue
        columns.append(("reference", reference[stem]))
        tiles = [_label_tile(_grid_tile(p, height), label) for label, p in columns]
        sep = np.full((tiles[0].shape[0], 4, 3), 255, dtype=np.uint8)
        strip = tiles[0]
        for t in tiles[1:]:
            strip = np.concatenate([strip, sep, t], axis=1)
        encode_image(strip, out / f"{stem}.png")
        made += 1
    if made == 0:
        raise DataError("no grid strips could be assembled")
    _write_manifest(
        out, "grid", argv, {"methods": [m for m, _ in methods], "strips": made},
        {"input": args.input, "reference": args.reference, "out": out}, None, started,
    )
    return 0


_COMMANDS = {
    "classify-train": _cmd_classify_train,
    "classify-eval": _cmd_classify_eval,
    "score": _cmd_score,
    "gan-train": _cmd_gan_train,
    "enhance": _cmd_enhance,
    "evaluate": _cmd_evaluate,
    "grid": _cmd_grid,
}


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args, argv)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, DecodeError, CheckpointError, SpecMismatchError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AquaganError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
