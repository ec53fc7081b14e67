"""Command-line front end.

Exit codes: 0 success, 2 usage or validation error, 3 dataset generation
failure, 4 partial batch failure, 5 failed numeric check.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from PIL.PngImagePlugin import PngInfo

from . import __version__
from .detect import DetectParams, detect_tampering, detections_record
from .errors import (
    CorruptImage,
    EmptyCorpus,
    ForensicsError,
    ImageNotFound,
    InvalidParameter,
    NoAdmissiblePlacement,
    ParseError,
    UnknownImage,
    UnsupportedFormat,
)
from .evalkit import evaluate, format_report
from .gradcheck import run_loss_checks
from .imaging import DEFAULT_CONVERSION_QUALITY, DEFAULT_ELA_QUALITY, DEFAULT_SCALE, compute_ela, load_for_ela
from .synth import IMAGE_SUFFIXES, AreaConstraints, generate_dataset

log = logging.getLogger("elaforensics")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GENERATION = 3
EXIT_PARTIAL = 4
EXIT_CHECK = 5


def _quality(text: str) -> int:
    try:
        q = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"quality must be an integer, got {text!r}")
    if not 1 <= q <= 100:
        raise argparse.ArgumentTypeError(f"quality must be in [1, 100], got {q}")
    return q


def _bounded(name: str, lo: float, hi: float, lo_open: bool = False, hi_open: bool = False):
    def parse(text: str) -> float:
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}")
        too_low = v <= lo if lo_open else v < lo
        too_high = v >= hi if hi_open else v > hi
        if too_low or too_high:
            lb, rb = "(" if lo_open else "[", ")" if hi_open else "]"
            raise argparse.ArgumentTypeError(f"{name} must be in {lb}{lo}, {hi}{rb}, got {v}")
        return v

    return parse


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return v


_positive = _bounded("value", 0.0, float("inf"), lo_open=True)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- ela


def cmd_ela(args) -> int:
    img = load_for_ela(args.input, args.convert_quality)
    result = compute_ela(img, args.quality, args.scale)
    config = {
        "input": str(args.input),
        "quality": args.quality,
        "scale": args.scale,
        "convert_quality": args.convert_quality,
    }
    meta = PngInfo()
    meta.add_text("elaforensics", json.dumps(config, sort_keys=True))
    result.heatmap.to_pil().save(args.output, format="PNG", pnginfo=meta)
    if args.blocks:
        Path(args.blocks).write_text(result.blocks_json() + "\n", encoding="utf-8")
    print(json.dumps({**result.summary(), "config": config}, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    constraints = AreaConstraints(args.min_area_frac, args.max_area_frac)
    try:
        manifest = generate_dataset(
            args.sources,
            args.targets,
            args.count,
            args.out,
            constraints,
            seed=args.seed,
            quality=args.quality,
            emit_originals=args.originals,
            max_retries=args.max_retries,
        )
    except NoAdmissiblePlacement as exc:
        print(f"error: {exc} (sample index {exc.sample_index})", file=sys.stderr)
        return EXIT_GENERATION
    except EmptyCorpus as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    print(f"wrote {len(manifest['samples'])} samples to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- detect


def _detect_one(job):
    path, params, convert_quality = job
    try:
        img = load_for_ela(path, convert_quality)
        return path, detect_tampering(img, params), None
    except ForensicsError as exc:
        return path, None, f"{type(exc).__name__}: {exc}"


def _batch_inputs(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise ImageNotFound(f"no such directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def _record_path(path: Path, root: Path | None) -> str:
    if root is None:
        return str(path)
    try:
        return path.resolve().relative_to(root.resolve()).as_posix()
    except ValueError:
        return str(path)


def cmd_detect(args) -> int:
    params = DetectParams(
        quality=args.quality,
        scale=args.scale,
        percentile=args.percentile,
        min_area=args.min_area,
        nms_iou=args.nms_iou,
        connectivity=args.connectivity,
    )
    if args.batch:
        paths = _batch_inputs(Path(args.batch))
        root = Path(args.root) if args.root else Path(args.batch)
    else:
        paths = sorted(Path(p) for p in args.inputs)
        root = Path(args.root) if args.root else None
    if not paths:
        print("error: no input images", file=sys.stderr)
        return EXIT_USAGE
    jobs = [(p, params, args.convert_quality) for p in paths]
    workers = args.jobs or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_detect_one, jobs))
    else:
        results = [_detect_one(j) for j in jobs]

    lines, failures = [], {}
    for path, dets, err in sorted(results, key=lambda r: _record_path(r[0], root)):
        if err is not None:
            log.error("%s: %s", path, err)
            failures[str(path)] = err
            continue
        lines.append(json.dumps(detections_record(_record_path(path, root), dets)) + "\n")
    out = Path(args.output)
    out.write_text("".join(lines), encoding="utf-8")
    _write_json(
        out.with_name(out.name + ".meta.json"),
        {
            "params": params.to_dict(),
            "convert_quality": args.convert_quality,
            "root": None if root is None else str(root),
            "n_inputs": len(paths),
            "n_written": len(lines),
            "failures": failures,
        },
    )
    print(f"wrote detections for {len(lines)}/{len(paths)} images to {out}")
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    report = evaluate(args.detections, args.ground_truth, args.iou)
    print(format_report(report))
    if args.report:
        _write_json(Path(args.report), report)
    return EXIT_OK


# ---------------------------------------------------------------- losscheck


def cmd_losscheck(args) -> int:
    results = run_loss_checks(args.seed, args.points)
    failed = [r for r in results if not r.passed]
    width = max(len(r.name) for r in results)
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  max_rel_err={r.max_error:.3e}  tol={r.tolerance:.0e}  {status}")
    for r in failed:
        print(f"error: check {r.name} failed at {r.worst_point}", file=sys.stderr)
    return EXIT_CHECK if failed else EXIT_OK


# ---------------------------------------------------------------- corpus


def cmd_corpus(args) -> int:
    from .scenes import write_corpus

    src, tgt = write_corpus(args.out, args.sources, args.targets, args.size, args.seed)
    print(f"wrote sources to {src} and targets to {tgt}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elaforensics", description="Error Level Analysis splice forensics")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def ela_options(p):
        p.add_argument("--quality", type=_quality, default=DEFAULT_ELA_QUALITY,
                       help="JPEG quality of the ELA re-save (default: %(default)s)")
        p.add_argument("--scale", type=_positive, default=DEFAULT_SCALE,
                       help="heatmap amplification factor (default: %(default)s)")
        p.add_argument("--convert-quality", type=_quality, default=DEFAULT_CONVERSION_QUALITY,
                       help="quality used to bring non-JPEG inputs into the JPEG domain (default: %(default)s)")

    p = sub.add_parser("ela", help="compute an ELA heatmap")
    p.add_argument("input", type=Path)
    ela_options(p)
    p.add_argument("-o", "--output", type=Path, required=True, help="heatmap PNG to write")
    p.add_argument("--blocks", type=Path, help="optional JSON file for the 8x8 block-score grid")
    p.set_defaults(func=cmd_ela)

    p = sub.add_parser("synth", help="generate a synthetic spliced dataset")
    p.add_argument("--sources", type=Path, required=True, help="directory with annotations.jsonl and source images")
    p.add_argument("--targets", type=Path, required=True, help="directory of host images")
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--min-area-frac", type=_bounded("min-area-frac", 0, 1), default=0.01)
    p.add_argument("--max-area-frac", type=_bounded("max-area-frac", 0, 1), default=0.25)
    p.add_argument("--quality", type=_quality, default=95, help="JPEG quality of written samples (default: %(default)s)")
    p.add_argument("--originals", action="store_true", help="also write the untampered hosts")
    p.add_argument("--max-retries", type=_positive_int, default=100)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="run the baseline ELA detector")
    p.add_argument("inputs", nargs="*", type=Path)
    p.add_argument("--batch", type=Path, help="process every JPEG/PNG in this directory")
    p.add_argument("--root", type=Path, help="record image paths relative to this directory")
    ela_options(p)
    p.add_argument("--percentile", type=_bounded("percentile", 0, 100, True, True), default=DetectParams.percentile)
    p.add_argument("--min-area", type=_bounded("min-area", 0, float("inf")), default=DetectParams.min_area)
    p.add_argument("--nms-iou", type=_bounded("nms-iou", 0, 1), default=DetectParams.nms_iou)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=4)
    p.add_argument("--jobs", type=_positive_int, default=None, help="worker processes (default: all cores)")
    p.add_argument("-o", "--output", type=Path, required=True, help="detections JSON-lines file")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--detections", type=Path, required=True)
    p.add_argument("--ground-truth", type=Path, required=True)
    p.add_argument("--iou", type=_bounded("iou", 0, 1, lo_open=True), default=0.5,
                   help="a detection matches when IoU is strictly greater (default: %(default)s)")
    p.add_argument("-o", "--report", type=Path, help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("losscheck", help="finite-difference checks of the loss gradients")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--points", type=_positive_int, default=100)
    p.set_defaults(func=cmd_losscheck)

    p = sub.add_parser("corpus", help="write a procedural source/target corpus for synth")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sources", type=_positive_int, default=20)
    p.add_argument("--targets", type=_positive_int, default=20)
    p.add_argument("--size", type=_positive_int, default=256)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "detect" and bool(args.batch) == bool(args.inputs):
        print("error: give input images or --batch DIR, not both or neither", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "synth" and args.min_area_frac > args.max_area_frac:
        print("error: --min-area-frac exceeds --max-area-frac", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ImageNotFound, UnsupportedFormat, CorruptImage, ParseError, UnknownImage, InvalidParameter) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ForensicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())
