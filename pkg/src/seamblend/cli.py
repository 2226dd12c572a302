"""Command-line surface: blend, refine-mask, poisson, metrics, compare.

Every report embeds a manifest (tool version, resolved flags, input
digests) sufficient to re-run the command. Outputs are byte-identical
across re-runs with identical inputs; measured wall times are therefore
left out of reports unless --timings is passed.

Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 solver or
optimizer divergence. Failures print one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__
from .errors import (
    DivergedError,
    SeamblendError,
    SolverDidNotConvergeError,
    UnreadableImageError,
    UnsupportedFormatError,
    UnwritableImageError,
    ValidationError,
)
from .image import BlendTask, Placement, composite_copy_paste, load_mask, load_png, save_png
from .losses import LossWeights, saturation_excess
from .metrics import MetricReport, compare_images, iou
from .morphology import refine_mask
from .optimizer import BlendRun, StageConfig, blend, _build_report, _execute
from .poisson import DEFAULT_MAX_ITERS, DEFAULT_TOL, poisson_blend

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICS = 4

def _parse_offset(text: str) -> Placement:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValidationError(f"--offset must be 'X,Y', got {text!r}")
    try:
        x, y = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ValidationError(f"--offset must be two integers, got {text!r}") from exc
    return Placement(offset_x=x, offset_y=y)


def _sha256(path: str) -> str:
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError as exc:
        raise UnreadableImageError(f"{path}: unreadable ({exc})") from exc


def _manifest(args: argparse.Namespace, input_flags: tuple[str, ...]) -> dict:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    digests = {}
    for flag in input_flags:
        path = resolved.get(flag)
        if path is not None:
            digests[flag] = _sha256(path)
    return {
        "tool": "seamblend",
        "version": __version__,
        "subcommand": args.command,
        "arguments": resolved,
        "input_digests": digests,
    }


def _write_report(report: MetricReport, manifest: dict, path: str | None) -> None:
    payload = report.to_dict()
    payload["manifest"] = manifest
    text = json.dumps(payload, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UnwritableImageError(f"{path}: unwritable ({exc})") from exc


def _write_history(history_rows, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "grad", "style", "content", "sat", "total"])
            for it, bd in history_rows:
                writer.writerow([it, repr(bd.grad), repr(bd.style), repr(bd.content),
                                 repr(bd.sat), repr(bd.total)])
    except OSError as exc:
        raise UnwritableImageError(f"{path}: unwritable ({exc})") from exc


def _load_task(args: argparse.Namespace) -> BlendTask:
    source = load_png(args.source)
    target = load_png(args.target)
    mask = load_mask(args.mask, threshold=args.threshold)
    return BlendTask(source=source, target=target, mask=mask,
                     placement=_parse_offset(args.offset))


def _zeroed(wall_times: dict | None, keep: bool) -> dict | None:
    if wall_times is None or keep:
        return wall_times
    return {k: 0.0 for k in wall_times}


def cmd_blend(args: argparse.Namespace) -> int:
    manifest = _manifest(args, ("source", "target", "mask"))
    task = _load_task(args)
    refined = refine_mask(task.mask, args.erode, args.dilate, args.radius)
    stage1 = StageConfig(
        weights=LossWeights(args.w_grad1, args.w_style1, args.w_content1, args.w_sat1),
        iterations=args.iters1, step_size=args.step_size, momentum=args.momentum,
        backtracking=not args.no_backtracking)
    stage2 = StageConfig(
        weights=LossWeights(args.w_grad2, args.w_style2, args.w_content2, args.w_sat2),
        iterations=0 if args.no_stage2 else args.iters2,
        step_size=args.step_size, momentum=args.momentum,
        backtracking=not args.no_backtracking)
    run = BlendRun(task=task, refined_mask=refined, stage1=stage1, stage2=stage2,
                   record_every=args.record_every, random_init=args.random_init,
                   seed=args.seed)
    reference = task.target if args.reference == "target" else None
    stage1_image, history1, final, history2, wall_times = _execute(run)
    report = _build_report(run, final, history1, history2, wall_times,
                           reference, args.reference)
    report.wall_times = _zeroed(report.wall_times, args.timings)
    save_png(final, args.out)
    _write_report(report, manifest, args.report)
    if args.history is not None:
        offset = run.stage1.iterations
        rows = list(history1) + [(it + offset, bd) for it, bd in history2]
        _write_history(rows, args.history)
    return EXIT_OK


def cmd_refine_mask(args: argparse.Namespace) -> int:
    mask = load_mask(args.mask, threshold=args.threshold)
    refined = refine_mask(mask, args.erode, args.dilate, args.radius)
    img = np.repeat(refined[:, :, None].astype(np.float64), 3, axis=2)
    save_png(img, args.out)
    return EXIT_OK


def cmd_poisson(args: argparse.Namespace) -> int:
    manifest = _manifest(args, ("source", "target", "mask"))
    task = _load_task(args)
    refined = refine_mask(task.mask, args.erode, args.dilate, args.radius)
    t0 = time.perf_counter()
    result = poisson_blend(task, refined, tol=args.tol, max_iters=args.max_iters)
    elapsed = time.perf_counter() - t0
    save_png(result, args.out)
    reference = task.target if args.reference == "target" else composite_copy_paste(task)
    psnr_db, ssim_val, mse_val = compare_images(result, reference)
    raw = saturation_excess(result, task.target)
    report = MetricReport(
        psnr_db=psnr_db, ssim=ssim_val, mse=mse_val,
        l_sat_raw=raw, l_sat_hinged=max(0.0, raw),
        iou=iou(task.mask, refined),
        wall_times=_zeroed({"solve": elapsed}, args.timings),
        reference=args.reference)
    _write_report(report, manifest, args.report)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    manifest = _manifest(args, ("image", "reference", "mask_a", "mask_b"))
    image = load_png(args.image)
    reference = load_png(args.reference)
    psnr_db, ssim_val, mse_val = compare_images(image, reference)
    raw = saturation_excess(image, reference)
    iou_val = None
    flags = []
    if (args.mask_a is None) != (args.mask_b is None):
        raise ValidationError("--mask-a and --mask-b must be given together")
    if args.mask_a is not None:
        mask_a = load_mask(args.mask_a, threshold=args.threshold)
        mask_b = load_mask(args.mask_b, threshold=args.threshold)
        iou_val = iou(mask_a, mask_b)
        if not mask_a.any() and not mask_b.any():
            flags.append("both_masks_empty")
    report = MetricReport(psnr_db=psnr_db, ssim=ssim_val, mse=mse_val,
                          l_sat_raw=raw, l_sat_hinged=max(0.0, raw),
                          iou=iou_val, reference=args.reference, flags=flags)
    _write_report(report, manifest, args.report)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    import os

    manifest = _manifest(args, ("source", "target", "mask"))
    task = _load_task(args)
    refined = refine_mask(task.mask, args.erode, args.dilate, args.radius)
    os.makedirs(args.out_dir, exist_ok=True)

    copy_paste = composite_copy_paste(task)
    t0 = time.perf_counter()
    poisson_img = poisson_blend(task, refined, tol=args.tol, max_iters=args.max_iters)
    t1 = time.perf_counter()
    stage1 = StageConfig(
        weights=LossWeights(args.w_grad1, args.w_style1, args.w_content1, args.w_sat1),
        iterations=args.iters1, step_size=args.step_size, momentum=args.momentum)
    stage2 = StageConfig(
        weights=LossWeights(args.w_grad2, args.w_style2, args.w_content2, args.w_sat2),
        iterations=args.iters2, step_size=args.step_size, momentum=args.momentum)
    run = BlendRun(task=task, refined_mask=refined, stage1=stage1, stage2=stage2,
                   record_every=args.record_every)
    two_stage_img, two_stage_report = blend(run)
    two_stage_report.wall_times = _zeroed(two_stage_report.wall_times, args.timings)

    def simple_report(img, iou_val):
        psnr_db, ssim_val, mse_val = compare_images(img, copy_paste)
        raw = saturation_excess(img, task.target)
        return MetricReport(psnr_db=psnr_db, ssim=ssim_val, mse=mse_val,
                            l_sat_raw=raw, l_sat_hinged=max(0.0, raw),
                            iou=iou_val, reference="copy-paste",
                            wall_times=_zeroed({"solve": t1 - t0}, args.timings)
                            if img is poisson_img else None)

    methods = [
        ("copy-paste", copy_paste, simple_report(copy_paste, None)),
        ("poisson", poisson_img, simple_report(poisson_img, iou(task.mask, refined))),
        ("two-stage", two_stage_img, two_stage_report),
    ]

    for name, img, report in methods:
        save_png(img, os.path.join(args.out_dir, f"{name}.png"))
        _write_report(report, manifest, os.path.join(args.out_dir, f"report-{name}.json"))

    sheet = np.concatenate([img for _, img, _ in methods], axis=1)
    save_png(sheet, os.path.join(args.out_dir, "contact-sheet.png"))

    csv_path = os.path.join(args.out_dir, "metrics.csv")
    try:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "psnr_db", "ssim", "mse", "l_sat_raw",
                             "l_sat_hinged", "iou"])
            for name, _, report in methods:
                d = report.to_dict()
                writer.writerow([name, d["psnr_db"], d["ssim"], d["mse"],
                                 d["l_sat_raw"], d["l_sat_hinged"], d["iou"]])
    except OSError as exc:
        raise UnwritableImageError(f"{csv_path}: unwritable ({exc})") from exc
    return EXIT_OK


def _add_mask_refinement_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--erode", type=int, default=2, help="erosion iterations (default 2)")
    p.add_argument("--dilate", type=int, default=4, help="dilation iterations (default 4)")
    p.add_argument("--radius", type=int, default=1,
                   help="square structuring element radius (default 1)")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="mask binarization luma threshold (default 0.5)")


def _add_task_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--source", required=True, help="source object PNG")
    p.add_argument("--target", required=True, help="target background PNG")
    p.add_argument("--mask", required=True, help="black-and-white mask PNG (source-sized)")
    p.add_argument("--offset", required=True,
                   help="placement 'X,Y': target column,row of the source's top-left")


def _add_stage_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--w-grad1", type=float, default=1e4)
    p.add_argument("--w-style1", type=float, default=1e3)
    p.add_argument("--w-content1", type=float, default=1.0)
    p.add_argument("--w-sat1", type=float, default=0.0)
    p.add_argument("--w-grad2", type=float, default=0.0)
    p.add_argument("--w-style2", type=float, default=1e5)
    p.add_argument("--w-content2", type=float, default=1.0)
    p.add_argument("--w-sat2", type=float, default=1e5)
    p.add_argument("--iters1", type=int, default=1000)
    p.add_argument("--iters2", type=int, default=1000)
    p.add_argument("--step-size", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--timings", action="store_true",
                   help="include measured wall times in the report "
                        "(off by default so re-runs are byte-identical)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seamblend",
                                     description="Blend a masked object into a target image.")
    parser.add_argument("--version", action="version", version=f"seamblend {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("blend", help="two-stage iterative blend")
    _add_task_flags(p)
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--report", default=None, help="JSON report path (stdout if omitted)")
    p.add_argument("--history", default=None, help="loss-history CSV path")
    _add_stage_flags(p)
    p.add_argument("--no-backtracking", action="store_true")
    p.add_argument("--no-stage2", action="store_true", help="stop after stage 1")
    p.add_argument("--random-init", action="store_true",
                   help="start from seeded noise instead of the composite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reference", choices=("copy-paste", "target"), default="copy-paste",
                   help="reference image for PSNR/SSIM/MSE in the report")
    _add_mask_refinement_flags(p)
    p.set_defaults(func=cmd_blend)

    p = sub.add_parser("refine-mask", help="erode/dilate mask cleanup")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    _add_mask_refinement_flags(p)
    p.set_defaults(func=cmd_refine_mask)

    p = sub.add_parser("poisson", help="Poisson seamless-clone baseline")
    _add_task_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    p.add_argument("--reference", choices=("copy-paste", "target"), default="copy-paste")
    p.add_argument("--timings", action="store_true")
    _add_mask_refinement_flags(p)
    p.set_defaults(func=cmd_poisson)

    p = sub.add_parser("metrics", help="quality metrics between two images")
    p.add_argument("--image", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--mask-a", default=None, help="first mask for IoU")
    p.add_argument("--mask-b", default=None, help="second mask for IoU")
    p.add_argument("--report", default=None, help="JSON report path (stdout if omitted)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("compare", help="copy-paste vs poisson vs two-stage on one task")
    _add_task_flags(p)
    p.add_argument("--out-dir", required=True)
    _add_stage_flags(p)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    _add_mask_refinement_flags(p)
    p.set_defaults(func=cmd_compare)

    return parser


def _fail(code: int, kind: str, exc: Exception) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UnreadableImageError, UnsupportedFormatError, UnwritableImageError) as exc:
        return _fail(EXIT_IO, "io", exc)
    except (SolverDidNotConvergeError, DivergedError) as exc:
        return _fail(EXIT_NUMERICS, "numerics", exc)
    except SeamblendError as exc:
        return _fail(EXIT_VALIDATION, "validation", exc)


if __name__ == "__main__":
    sys.exit(main())
