"""Command-line front end.

Subcommands: ``render``, ``flow``, ``warp``, ``loss``, ``rcn-check`` (alias ``gradcheck``),
``sample-stats`` and ``make-model``. Results go to stdout as JSON, logs to stderr.
Exit status: 0 success, 1 validation failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .losses import AvgPoolPyramid, LossWeights, appearance_loss, reconstruction_loss, total_loss
from .morphable_model import save_model, synthetic_face_model
from .rcn import finite_difference_check
from .sampling import DatasetManifest, sample_stats
from .scene import load_scene
from .temporal_flow import DenseFlowField, dense_flow, sparse_flow, temporal_loss, warp

log = logging.getLogger("faceflow")

GRAD_TOL = 1e-4


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")
    sys.stdout.flush()


def cmd_render(args) -> int:
    scene = load_scene(args.config)
    out = Path(args.out)
    written = []
    for k in range(len(scene.frames)):
        _, raster = scene.render(k)
        stem = out / f"frame_{k:04d}"
        written.append(str(fio.write_image(f"{stem}_color.{args.format}", raster.color)))
        mask_ext = "png" if args.format == "png" else "pgm"
        written.append(str(fio.write_image(f"{stem}_mask.{mask_ext}", raster.mask.astype(np.float64))))
        written.append(str(fio.write_raw(f"{stem}_depth.f64", raster.depth)))
        log.info("rendered frame %d: %d covered pixels", k, int(raster.mask.sum()))
    _emit({"frames": len(scene.frames), "width": scene.width, "height": scene.height, "files": written})
    return 0


def cmd_flow(args) -> int:
    if args.t < 1:
        raise UsageError("--t must be >= 1 (frame t needs a predecessor)")
    scene = load_scene(args.config)
    if args.t >= len(scene.frames):
        raise UsageError(f"--t {args.t} is past the last frame ({len(scene.frames) - 1})")
    geom = scene.frame_pair(args.t)
    field = (dense_flow if args.mode == "dense" else sparse_flow)(geom)
    out = Path(args.out)
    stem = f"{args.t:04d}"
    files = [
        fio.write_flo(out / f"flow_{stem}.flo", field.final),
        fio.write_raw(out / f"flow_{stem}_z.f64", field.final[:, :, 2]),
        fio.write_raw(out / f"vis_t_{stem}.f64", field.vis_t.astype(np.float64)),
        fio.write_raw(out / f"vis_prev_{stem}.f64", field.vis_prev.astype(np.float64)),
    ]
    support = field.vis_t & field.vis_prev
    _emit({"t": args.t, "mode": args.mode, "support_pixels": int(support.sum()),
           "covered_pixels": int(geom.raster_t.mask.sum()), "files": [str(f) for f in files]})
    return 0


def _load_flow_field(path, z_path=None) -> DenseFlowField:
    xy = fio.read_flo(path).astype(np.float64)
    z = np.zeros(xy.shape[:2]) if z_path is None else fio.read_raw(z_path, xy.shape[:2])
    return DenseFlowField.from_flow(np.concatenate([xy, z[..., None]], axis=2))


def cmd_warp(args) -> int:
    image = fio.read_image(args.image)
    field = _load_flow_field(args.flow)
    if image.shape[:2] != field.final.shape[:2]:
        raise UsageError(f"image {image.shape[:2]} and flow {field.final.shape[:2]} differ in size")
    fio.write_image(args.out, warp(image, field))
    _emit({"out": str(args.out)})
    return 0


def cmd_loss(args) -> int:
    y_t = fio.read_image(args.y_t)
    y_prev = fio.read_image(args.y_prev)
    x_i = fio.read_image(args.x_i)
    x_p = fio.read_image(args.x_p)
    weights = LossWeights(*args.weights)
    app = appearance_loss(AvgPoolPyramid(args.levels), y_t, x_p)
    rec = reconstruction_loss(y_t, x_i, args.mode)
    if args.mode == "intra":
        field = _load_flow_field(args.flow)
        tmp = temporal_loss(y_t, y_prev, field, region=args.region)
    else:
        tmp = 0.0
    total = total_loss(args.adv, app, rec, tmp, weights, provenance=args.mode)
    _emit({"mode": args.mode, "adv": args.adv, "app": app, "rec": rec, "tmp": tmp, "total": total,
           "weights": {"adv": weights.adv, "app": weights.app, "rec": weights.rec, "tmp": weights.tmp}})
    return 0


def cmd_rcn_check(args) -> int:
    blend = 0.0 if args.zero_blend else None
    report = finite_difference_check(seed=args.seed, channels=args.channels, height=args.height,
                                     width=args.width, alpha=blend, beta=blend,
                                     debug_flip_sign=args.inject_sign_bug)
    passed = all(err < GRAD_TOL for err in report.values())
    _emit({"seed": args.seed, "tolerance": GRAD_TOL, "max_rel_error": report, "pass": passed})
    return 0 if passed else 1


def cmd_sample_stats(args) -> int:
    if args.manifest:
        manifest = DatasetManifest.load(args.manifest)
    elif args.frames:
        manifest = DatasetManifest.from_frame_counts(args.frames)
    else:
        raise UsageError("give --manifest or --frames")
    _emit(sample_stats(manifest, args.sigma, args.seed, args.count))
    return 0


def cmd_make_model(args) -> int:
    model = synthetic_face_model(args.nx, args.ny, args.k_id, args.k_exp, seed=args.seed)
    manifest, blob = save_model(model, args.out)
    _emit({"manifest": str(manifest), "blob": str(blob), "V": model.n_vertices, "T": model.n_triangles,
           "K_id": model.k_id, "K_exp": model.k_exp})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faceflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render every frame of a scene")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("ppm", "png"), default="ppm")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("flow", help="mesh-derived flow from frame t back to t-1")
    p.add_argument("--config", required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("dense", "sparse"), default="dense")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("warp", help="backward-warp an image with a .flo field")
    p.add_argument("--image", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("loss", help="loss breakdown for one output frame pair")
    p.add_argument("--mode", choices=("intra", "inter"), required=True)
    p.add_argument("--y-t", required=True)
    p.add_argument("--y-prev", required=True)
    p.add_argument("--x-i", required=True)
    p.add_argument("--x-p", required=True)
    p.add_argument("--flow", help=".flo file (required for intra)")
    p.add_argument("--adv", type=float, default=0.0, help="precomputed adversarial term")
    p.add_argument("--weights", type=float, nargs=4, default=(10.0, 1.0, 10.0, 5.0),
                   metavar=("ADV", "APP", "REC", "TMP"))
    p.add_argument("--levels", type=int, default=3, help="average-pool pyramid depth")
    p.add_argument("--region", choices=("full", "interior", "support"), default="full")
    p.set_defaults(func=cmd_loss)

    for name in ("rcn-check", "gradcheck"):
        p = sub.add_parser(name, help="finite-difference check of the RCN gradients")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--channels", type=int, default=2)
        p.add_argument("--height", type=int, default=4)
        p.add_argument("--width", type=int, default=4)
        p.add_argument("--zero-blend", action="store_true", help="alpha = beta = 0")
        p.add_argument("--inject-sign-bug", action="store_true", help="negative control")
        p.set_defaults(func=cmd_rcn_check)

    p = sub.add_parser("sample-stats", help="summary of seeded training-triplet draws")
    p.add_argument("--manifest")
    p.add_argument("--frames", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated frame counts instead of a manifest")
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10000)
    p.set_defaults(func=cmd_sample_stats)

    p = sub.add_parser("make-model", help="write a synthetic blendshape model")
    p.add_argument("--out", required=True, help="output path stem (.bsm/.bin are added)")
    p.add_argument("--nx", type=int, default=24)
    p.add_argument("--ny", type=int, default=28)
    p.add_argument("--k-id", type=int, default=8)
    p.add_argument("--k-exp", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_model)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "loss" and args.mode == "intra" and not args.flow:
        parser.error("loss --mode intra needs --flow")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"faceflow {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"faceflow {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
