"""Command-line interface.

Six subcommands cover the pipeline: ``synth`` fabricates a scored
dataset, ``calibrate`` fits the coverage parameter, ``predict`` emits a
multi-labeled mask, ``evaluate`` measures held-out risk and set sizes,
``heatmap`` renders set sizes as an image, and ``validate`` Monte-Carlo
checks the guarantee end to end.

Exit codes: 0 on success, 1 on validation or feasibility errors, 2 on
I/O and file-format errors. ``--json`` switches stdout (and error
reporting on stderr) to machine-readable JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from ._parallel import default_threads, parallel_map
from .calibration import CalibrationArtifact, CalibrationConfig, calibrate
from .errors import CrcsegError, FormatError, ValidationError
from .heatmap import (
    NORM_BY_K,
    NORM_BY_MAX,
    PALETTES,
    HeatmapOptions,
    black_out,
    intensity_map,
    overlay,
    render,
)
from .images import read_image, write_image
from .lac import lac_set
from .losses import BINARY_THRESHOLD, LOSS_KINDS, WEIGHTED_MISCOVERAGE, LossSpec
from .manifest import read_manifest, resolve_paths
from .metrics import evaluate
from .npyio import read_mask, read_multimask, read_scores, write_multimask
from .synth import SynthConfig, validate_guarantee, write_dataset
from .types import Dims


def _loss_from_args(args) -> LossSpec:
    tau = getattr(args, "tau", None)
    weights = None
    weights_path = getattr(args, "weights", None)
    if weights_path is not None:
        with open(weights_path, "r", encoding="utf-8") as handle:
            loaded = json.load(handle)
        if not isinstance(loaded, list):
            raise ValidationError(f"{weights_path}: weights file must hold a JSON array")
        weights = tuple(float(w) for w in loaded)
    if args.loss == BINARY_THRESHOLD and tau is None:
        raise ValidationError("--loss binary-threshold requires --tau")
    if args.loss == WEIGHTED_MISCOVERAGE and weights is None:
        raise ValidationError("--loss weighted-miscoverage requires --weights")
    return LossSpec(kind=args.loss, tau=tau, weights=weights)


def _load_pairs(manifest_path, validate: bool, threads: int):
    entries = resolve_paths(read_manifest(manifest_path), os.path.dirname(manifest_path) or ".")

    def one(entry):
        scores = read_scores(entry.scores_path, validate=validate)
        mask = read_mask(entry.mask_path, k=scores.dims.k)
        return scores, mask

    return parallel_map(one, entries, threads)


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


def _cmd_calibrate(args) -> int:
    config = CalibrationConfig(
        alpha=args.alpha,
        loss=_loss_from_args(args),
        epsilon=args.epsilon,
        top1_fallback=not args.no_top1,
        seed=args.seed,
    )
    pairs = _load_pairs(args.manifest, validate=not args.no_validate, threads=args.threads)
    artifact = calibrate(pairs, config, threads=args.threads, created_at=args.timestamp)
    artifact.save(args.out)
    _emit(
        args,
        {
            "lambda_hat": artifact.lambda_hat,
            "alpha": artifact.alpha,
            "n": artifact.n,
            "risk_at_lambda_hat": artifact.risk_at_lambda_hat(),
            "out": args.out,
        },
        f"lambda_hat        {artifact.lambda_hat!r}\n"
        f"alpha             {artifact.alpha:g}\n"
        f"n                 {artifact.n}\n"
        f"risk(lambda_hat)  {artifact.risk_at_lambda_hat():.6f}\n"
        f"artifact          {args.out}",
    )
    return 0


def _cmd_predict(args) -> int:
    artifact = CalibrationArtifact.load(args.artifact)
    scores = read_scores(args.scores, validate=not args.no_validate)
    mask = lac_set(scores, artifact.lambda_hat, artifact.top1_fallback)
    write_multimask(args.out, mask)
    _emit(
        args,
        {"out": args.out, "lambda_hat": artifact.lambda_hat, "shape": list(mask.dims.shape)},
        f"wrote {args.out} (K={mask.dims.k}, {mask.dims.h}x{mask.dims.w}, "
        f"lambda_hat={artifact.lambda_hat!r})",
    )
    return 0


def _cmd_evaluate(args) -> int:
    artifact = CalibrationArtifact.load(args.artifact)
    pairs = _load_pairs(args.manifest, validate=not args.no_validate, threads=args.threads)
    report = evaluate(pairs, artifact, threads=args.threads)
    if args.out:
        report.save(args.out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as handle:
            handle.write(report.to_csv())
    _emit(
        args,
        {
            "empirical_risk": report.empirical_risk,
            "activation_ratio": report.activation_ratio,
            "n_test": report.n_test,
            "lambda_hat": report.lambda_hat,
            "alpha": report.alpha,
        },
        f"empirical_risk    {report.empirical_risk:.6f}\n"
        f"activation_ratio  {report.activation_ratio:.6f}\n"
        f"n_test            {report.n_test}\n"
        f"lambda_hat        {report.lambda_hat!r}\n"
        f"alpha             {report.alpha:g}",
    )
    return 0


def _cmd_heatmap(args) -> int:
    mask = read_multimask(args.multimask)
    options = HeatmapOptions(
        normalization=args.mode,
        colormap=args.colormap,
        overlay_blend=args.blend if args.overlay else None,
    )
    image = render(intensity_map(mask, options), options)
    if args.overlay:
        photo = read_image(args.overlay)
        image = overlay(image, photo, args.blend)
    if args.mask:
        truth = read_mask(args.mask, k=mask.dims.k)
        if args.void_black:
            image = black_out(image, truth.valid)
    write_image(args.out, image)
    _emit(
        args,
        {"out": args.out, "height": mask.dims.h, "width": mask.dims.w},
        f"wrote {args.out} ({mask.dims.h}x{mask.dims.w})",
    )
    return 0


def _cmd_synth(args) -> int:
    config = SynthConfig(
        dims=Dims(args.classes, args.height, args.width),
        n_images=args.images,
        blob_count=args.blobs,
        temperature=args.temperature,
        corruption=args.corruption,
        seed=args.seed,
    )
    manifest_path = write_dataset(config, args.out)
    _emit(
        args,
        {"manifest": manifest_path, "images": config.n_images},
        f"wrote {config.n_images} examples, manifest at {manifest_path}",
    )
    return 0


def _cmd_validate(args) -> int:
    config = SynthConfig(
        dims=Dims(args.classes, args.height, args.width),
        n_images=args.images,
        blob_count=args.blobs,
        temperature=args.temperature,
        corruption=args.corruption,
        seed=args.seed,
    )
    cal_config = CalibrationConfig(
        alpha=args.alpha,
        loss=_loss_from_args(args),
        epsilon=args.epsilon,
    )
    summary = validate_guarantee(
        config,
        cal_config,
        trials=args.trials,
        cal_fraction=args.cal_fraction,
        threads=args.threads,
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(summary.to_json())
    _emit(
        args,
        json.loads(summary.to_json()),
        f"trials            {summary.trials}\n"
        f"alpha             {summary.alpha:g}\n"
        f"mean_test_risk    {summary.mean_test_risk:.6f}\n"
        f"std_test_risk     {summary.std_test_risk:.6f}\n"
        f"standard_error    {summary.standard_error:.6f}\n"
        f"pass              {str(summary.passed).lower()}",
    )
    return 0 if summary.passed else 1


def _add_loss_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--loss", choices=LOSS_KINDS, required=True, help="loss to control")
    parser.add_argument("--tau", type=float, help="coverage threshold for binary-threshold")
    parser.add_argument("--weights", help="JSON file with one weight per class")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: CRCSEG_THREADS or all cores)")
    parser.add_argument("--json", action="store_true", help="machine-readable stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crcseg",
        description="Risk-controlling prediction sets for semantic segmentation.",
    )
    parser.add_argument("--version", action="version", version=f"crcseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit the coverage parameter on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--alpha", type=float, required=True, help="target risk level in (0, 1)")
    p.add_argument("--out", required=True, help="artifact JSON destination")
    _add_loss_flags(p)
    p.add_argument("--epsilon", type=float, default=1e-5, help="bisection tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-top1", action="store_true", help="disable the top-1 fallback")
    p.add_argument("--no-validate", action="store_true", help="skip softmax validation")
    p.add_argument("--timestamp", default=None, help="pin the artifact's created_at string")
    _add_common_flags(p)
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("predict", help="apply an artifact to one score tensor")
    p.add_argument("--artifact", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True, help="multi-mask NPY destination")
    p.add_argument("--no-validate", action="store_true")
    _add_common_flags(p)
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("evaluate", help="held-out risk and activation ratio")
    p.add_argument("--manifest", required=True)
    p.add_argument("--artifact", required=True)
    p.add_argument("--out", help="report JSON destination")
    p.add_argument("--csv", help="per-image CSV destination")
    p.add_argument("--no-validate", action="store_true")
    _add_common_flags(p)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("heatmap", help="render set sizes as an image")
    p.add_argument("--multimask", required=True)
    p.add_argument("--out", required=True, help=".png or .ppm destination")
    p.add_argument("--mode", choices=(NORM_BY_K, NORM_BY_MAX), default=NORM_BY_K,
                   help="divide counts by K or by the observed max")
    p.add_argument("--colormap", choices=sorted(PALETTES), default="thermal")
    p.add_argument("--overlay", help="photo (PNG or PPM) to blend under the heatmap")
    p.add_argument("--blend", type=float, default=0.5, help="heatmap weight in [0, 1]")
    p.add_argument("--mask", help="label mask, enables --void-black")
    p.add_argument("--void-black", action="store_true", help="black out IGNORE pixels")
    _add_common_flags(p)
    p.set_defaults(fn=_cmd_heatmap)

    p = sub.add_parser("synth", help="generate a synthetic scored dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--images", type=int, required=True)
    p.add_argument("--blobs", type=float, default=6.0)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--corruption", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    _add_common_flags(p)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("validate", help="Monte-Carlo check of the risk guarantee")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--images", type=int, required=True, help="images per trial (cal + test)")
    p.add_argument("--blobs", type=float, default=6.0)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--corruption", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, required=True)
    _add_loss_flags(p)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--cal-fraction", type=float, default=0.5)
    p.add_argument("--out", help="trial summary JSON destination")
    _add_common_flags(p)
    p.set_defaults(fn=_cmd_validate)

    return parser


def _fail(args, exc: Exception, code: str) -> None:
    if getattr(args, "json", False):
        payload = {"error": code, "message": str(exc)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    else:
        print(f"error[{code}]: {exc}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is None:
        try:
            args.threads = default_threads()
        except ValueError as exc:
            parser.error(str(exc))
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.fn(args)
    except FormatError as exc:
        _fail(args, exc, exc.code)
        return 2
    except OSError as exc:
        _fail(args, exc, "io")
        return 2
    except ValidationError as exc:
        _fail(args, exc, exc.code)
        return 1
    except CrcsegError as exc:
        _fail(args, exc, exc.code)
        return 1
    except ValueError as exc:
        _fail(args, exc, "validation")
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
