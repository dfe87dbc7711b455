"""Command line interface.

Exit codes are shared by every subcommand: 0 success, 1 I/O failure
(missing or unreadable files, undecodable images), 2 invalid arguments or
contract violations.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (
    GRADES,
    SingleClassError,
    TrainingSet,
    accuracy,
    classify_many,
    load_model,
    save_model,
    svm_train,
)
from .enhance import METHODS, InvalidDepthError
from .features import FEATURE_NAMES, extract_all, features_to_csv, format_table, format_value
from .imgcore import ImageFormatError, load_image, save_image
from .pipeline import ConfigError, PipelineConfig, expand_inputs, process_image, run_pipeline
from .quality import (
    CSV_HEADER,
    QualityReport,
    compare_methods,
    report_row,
    run_with_report,
)
from .segment import RoiMask, extract_roi, kmeans, largest_component, outline

log = logging.getLogger("mrigrade")

EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2

EPILOG = "exit codes: 0 success, 1 I/O failure, 2 invalid arguments or contract violation"


class UsageError(ValueError):
    pass


def _write_text(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _method_params(args) -> dict:
    return {
        "r": args.r,
        "spread_factor": args.spread_factor,
        "min_partition_width": args.min_width,
        "allocation": args.allocation,
    }


def _add_method_params(p) -> None:
    g = p.add_argument_group("equalizer parameters")
    g.add_argument("--r", type=int, default=2, help="RMSHE recursion depth, 0..7 (default: 2)")
    g.add_argument("--spread-factor", type=float, default=3.0, help="DHE domination factor (default: 3.0)")
    g.add_argument("--min-width", type=int, default=3, help="DHE minimum partition width (default: 3)")
    g.add_argument(
        "--allocation",
        choices=("span", "span_log_population"),
        default="span",
        help="DHE output-range allocation (default: span)",
    )


def _add_segment_params(p, k_default=None) -> None:
    g = p.add_argument_group("segmentation parameters")
    g.add_argument("-k", "--clusters", type=int, default=k_default, help=f"K-means cluster count (default: {k_default})")
    g.add_argument("--max-iter", type=int, default=100, help="K-means sweep limit (default: 100)")
    g.add_argument("--tol", type=float, default=0.25, help="K-means centroid tolerance in gray levels (default: 0.25)")
    g.add_argument("--init", choices=("even", "random"), default="even", help="centroid initialization (default: even)")
    g.add_argument("--seed", type=int, default=0, help="seed for --init random (default: 0)")
    g.add_argument("--roi", default="brightest", help="'brightest' or a cluster index (default: brightest)")
    g.add_argument("--connectivity", type=int, choices=(4, 8), default=8, help="component connectivity (default: 8)")
    g.add_argument("--all-components", action="store_true", help="keep the whole cluster instead of its largest blob")


def _add_glcm_params(p) -> None:
    g = p.add_argument_group("texture parameters")
    g.add_argument("--levels", type=int, default=8, help="GLCM quantization levels (default: 8)")
    g.add_argument("--offset", default="0,1", help="GLCM offset dy,dx (default: 0,1)")
    g.add_argument(
        "--variance-scale",
        choices=("normalized", "raw"),
        default="normalized",
        help="variance divided by 255^2 or in raw units (default: normalized)",
    )


def _roi(text: str):
    return "brightest" if text in ("brightest", "brightest_centroid") else int(text)


def _offset(text: str) -> tuple:
    try:
        dy, dx = (int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"offset must look like 'dy,dx', got {text!r}") from None
    return dy, dx


def _segment(img, args):
    lm = kmeans(img, args.clusters, max_iter=args.max_iter, tol=args.tol, init=args.init, seed=args.seed)
    mask = extract_roi(img, lm, _roi(args.roi))
    if not args.all_components:
        mask = largest_component(mask, args.connectivity)
    return lm, mask


# --------------------------------------------------------------------------
# subcommands


def cmd_enhance(args) -> int:
    img = load_image(args.input)
    out, rep = run_with_report(args.method, img, _method_params(args))
    save_image(out, args.output)
    sys.stdout.write(",".join(CSV_HEADER) + "\n")
    sys.stdout.write(",".join(report_row(args.method.upper(), rep)) + "\n")
    return EXIT_OK


def cmd_metrics(args) -> int:
    params = _method_params(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.batch:
        paths = expand_inputs(args.images)
        if not paths:
            raise UsageError("no input images found")
        w.writerow(("image",) + CSV_HEADER)
        sums = {m: [] for m in METHODS}
        for path in paths:
            reports = compare_methods(load_image(path), params)
            for m, rep in reports.items():
                w.writerow([path.name] + report_row(m, rep))
                sums[m].append(rep)
        if args.summary:
            for m in METHODS:
                reps = sums[m]
                mean = QualityReport(
                    mse=float(np.mean([r.mse for r in reps])),
                    psnr=float(np.mean([r.psnr for r in reps])),
                    ambe=float(np.mean([r.ambe for r in reps])),
                    additions=None,
                    multiplications=None,
                )
                w.writerow(["MEAN"] + report_row(m, mean))
    else:
        ref_path, *candidates = args.images
        ref = load_image(ref_path)
        w.writerow(CSV_HEADER)
        if candidates:
            for c in candidates:
                rep = QualityReport.between(ref, load_image(c))
                w.writerow(report_row(Path(c).name, rep))
        else:
            for m, rep in compare_methods(ref, params).items():
                w.writerow(report_row(m, rep))
    _write_text(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_segment(args) -> int:
    img = load_image(args.input)
    lm, mask = _segment(img, args)
    base = load_image(args.outline_base) if args.outline_base else img
    out_dir = Path(args.output_dir)
    stem = Path(args.input).stem
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(lm.visualize(), args.labels_out or out_dir / f"{stem}.labels.pgm")
    save_image(mask.to_image(), args.mask_out or out_dir / f"{stem}.mask.pgm")
    save_image(outline(base, mask), args.outline_out or out_dir / f"{stem}.outline.pgm")
    cents = " ".join(format(c, ".6g") for c in lm.centroids)
    sys.stdout.write(
        f"centroids: {cents}\niterations: {lm.iterations} converged: {lm.converged}\n"
        f"roi pixels: {mask.count}\n"
    )
    return EXIT_OK


def cmd_features(args) -> int:
    if args.mask is None and args.clusters is None:
        raise UsageError("give --mask or segmentation parameters (-k)")
    paths = expand_inputs(args.inputs)
    if not paths:
        raise UsageError("no input images found")
    if args.mask is not None and len(paths) != 1:
        raise UsageError("--mask applies to a single input image")
    offset = _offset(args.offset)
    rows = []
    for path in paths:
        img = load_image(path)
        if args.mask is not None:
            mask = RoiMask.from_image(load_image(args.mask))
        else:
            _, mask = _segment(img, args)
        fv = extract_all(img, mask, levels=args.levels, offset=offset, variance_scale=args.variance_scale)
        rows.append((path.name, fv))
    text = format_table(rows) if args.table else features_to_csv(rows)
    _write_text(text, args.output)
    return EXIT_OK


def read_feature_csv(path, require_grade: bool = False):
    """Rows of ``(name, features, grade)`` from a feature or summary CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [n for n in FEATURE_NAMES if n not in (reader.fieldnames or [])]
        if missing:
            raise UsageError(f"{path}: missing feature columns {', '.join(missing)}")
        if require_grade and "grade" not in reader.fieldnames:
            raise UsageError(f"{path}: no 'grade' column")
        rows = []
        for i, row in enumerate(reader):
            if row.get("status", "ok") != "ok":
                continue
            name = row.get("image") or f"row{i + 1}"
            try:
                values = [float(row[n]) for n in FEATURE_NAMES]
            except ValueError as exc:
                raise UsageError(f"{path}: row {i + 1}: {exc}") from None
            grade = (row.get("grade") or "").strip()
            if require_grade and grade not in GRADES:
                raise UsageError(f"{path}: row {i + 1}: grade must be Benign or Malignant, got {grade!r}")
            rows.append((name, values, grade))
    return rows


def cmd_train(args) -> int:
    rows = read_feature_csv(args.csv, require_grade=True)
    grades = [g for _, _, g in rows]
    if len(set(grades)) < 2:
        raise SingleClassError("training data must contain both Benign and Malignant rows")
    ts = TrainingSet(np.array([v for _, v, _ in rows]), grades)
    model = svm_train(ts, C=args.C, tol=args.svm_tol, max_passes=args.max_passes)
    save_model(model, args.output)
    sys.stdout.write(f"training rows: {len(ts)}\ntraining accuracy: {accuracy(model, ts)!r}\n")
    if args.test:
        test_rows = read_feature_csv(args.test, require_grade=True)
        if len(ts) <= len(test_rows):
            log.warning("training rows (%d) should outnumber testing rows (%d)", len(ts), len(test_rows))
        tx = np.array([v for _, v, _ in test_rows])
        pred = [g for g, _ in classify_many(model, tx)]
        acc = float(np.mean([p == t for p, (_, _, t) in zip(pred, test_rows)]))
        sys.stdout.write(f"testing rows: {len(test_rows)}\ntesting accuracy: {acc!r}\n")
    return EXIT_OK


def cmd_classify(args) -> int:
    model = load_model(args.model)
    cfg = PipelineConfig.from_file(args.config).validate() if args.config else PipelineConfig()
    names, vectors = [], []
    for item in args.inputs:
        p = Path(item)
        if p.suffix.lower() == ".csv":
            for name, values, _ in read_feature_csv(p):
                names.append(name)
                vectors.append(values)
        else:
            for path in expand_inputs([p]):
                fv = process_image(load_image(path), cfg)["features"]
                names.append(path.name)
                vectors.append(list(fv.as_tuple()))
    if not vectors:
        raise UsageError("nothing to classify")
    if model.n_train and len(vectors) >= model.n_train:
        log.warning("testing rows (%d) should be fewer than training rows (%d)", len(vectors), model.n_train)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("image", "grade", "decision_value"))
    for name, (grade, value) in zip(names, classify_many(model, np.array(vectors))):
        w.writerow([name, grade, format_value(value)])
    _write_text(out.getvalue(), args.output)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.model:
        overrides["model"] = args.model
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = cfg.replace(**overrides)
    cfg.validate()
    if args.model_required and not cfg.model:
        raise UsageError("no model configured")
    results = run_pipeline(args.images, cfg, jobs=args.jobs)
    if not results:
        raise UsageError("no input images found")
    failed = [r for r in results if r.status != "ok"]
    sys.stdout.write(
        f"processed {len(results)} image(s), {len(failed)} failed; summary: {Path(cfg.output_dir) / 'summary.csv'}\n"
    )
    return EXIT_IO if failed else EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrigrade",
        description="MRI histogram enhancement, K-means tumor segmentation, feature extraction and SVM grading.",
        epilog=EPILOG,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-image progress")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text):
        return sub.add_parser(name, help=help_text, description=help_text, epilog=EPILOG)

    p = add("enhance", "Equalize one image and print its quality report as CSV.")
    p.add_argument("input", help="input PGM/PNG image")
    p.add_argument("--method", type=str.lower, choices=[m.lower() for m in METHODS], default="rmshe", help="equalizer (default: rmshe)")
    p.add_argument("-o", "--output", required=True, help="output image (.pgm or .png)")
    _add_method_params(p)
    p.set_defaults(func=cmd_enhance)

    p = add("metrics", "Quality table (PSNR, MSE, AMBE, op counts) as CSV.")
    p.add_argument("images", nargs="+", help="reference image then processed images; with no processed images all four methods are compared; with --batch every path (or directory) is an input")
    p.add_argument("--batch", action="store_true", help="compare all four methods on every input image")
    p.add_argument("--summary", action="store_true", help="with --batch, append per-method MEAN rows")
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")
    _add_method_params(p)
    p.set_defaults(func=cmd_metrics)

    p = add("segment", "K-means segmentation, ROI mask and outline.")
    p.add_argument("input", help="input PGM/PNG image")
    _add_segment_params(p, k_default=3)
    p.add_argument("--output-dir", default=".", help="directory for default output names (default: .)")
    p.add_argument("--labels-out", help="label visualization (centroid value per pixel)")
    p.add_argument("--mask-out", help="ROI mask PGM (0/255)")
    p.add_argument("--outline-out", help="outlined image")
    p.add_argument("--outline-base", help="draw the outline on this image instead of the input")
    p.set_defaults(func=cmd_segment)

    p = add("features", "The 16 shape/intensity/texture features as CSV.")
    p.add_argument("inputs", nargs="+", help="images or directories (one CSV row per image, ordered by file name)")
    p.add_argument("--mask", help="ROI mask image (nonzero = inside); single input only")
    _add_segment_params(p, k_default=None)
    _add_glcm_params(p)
    p.add_argument("--table", action="store_true", help="print a parameters-by-image table instead of CSV")
    p.add_argument("-o", "--output", help="write output here instead of stdout")
    p.set_defaults(func=cmd_features)

    p = add("train", "Train the linear SVM from a labeled feature CSV.")
    p.add_argument("csv", help="CSV with the 16 feature columns and a grade column (Benign/Malignant)")
    p.add_argument("-o", "--output", required=True, help="model file to write")
    p.add_argument("--C", type=float, default=1.0, help="soft-margin penalty (default: 1.0)")
    p.add_argument("--svm-tol", type=float, default=1e-3, help="KKT tolerance (default: 0.001)")
    p.add_argument("--max-passes", type=int, default=10, help="idle sweeps before stopping (default: 10)")
    p.add_argument("--test", help="labeled CSV to report held-out accuracy on")
    p.set_defaults(func=cmd_train)

    p = add("classify", "Grade images or feature CSV rows as Benign or Malignant.")
    p.add_argument("model", help="model file from 'train'")
    p.add_argument("inputs", nargs="+", help="feature CSV files, images or directories")
    p.add_argument("--config", help="pipeline config used to extract features from images")
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_classify)

    p = add("pipeline", "Enhance, segment, extract features and classify a batch of images.")
    p.add_argument("images", nargs="+", help="images or directories")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("--output-dir", help="override output_dir")
    p.add_argument("--model", help="override model path")
    p.add_argument("--seed", type=int, help="override seed")
    p.add_argument("--jobs", type=int, default=1, help="images processed concurrently (default: 1)")
    p.add_argument("--model-required", action="store_true", help="fail unless a model is configured")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ImageFormatError, OSError) as exc:
        print(f"mrigrade {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, IndexError, ConfigError, InvalidDepthError) as exc:
        print(f"mrigrade {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
