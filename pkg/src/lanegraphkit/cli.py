"""``lgk`` command line: synth, warp, aggregate, postmerge, eval, embed, render.

Exit codes: 0 success, 1 usage or validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from . import io_formats as fmt
from .bev_warp import BevGrid, crop_mask, crop_to_target, warp_frame
from .lane_graph import DEFAULT_CONNECT_TOL, clip_graph
from .metrics import DEFAULT_MATCH_DIST, evaluate
from .postmerge import MergeParams, post_merge, to_reference
from .render import render_svg
from .stetr import EmbeddingConfig, flatten_with_embeddings
from .synthetic import Layout, NoiseParams, generate_scene, gt_in_frame, lane_pattern, render_ground_pattern, simulate_frame_estimates
from .temporal_agg import AggregateOp, aggregate, default_pre_transform
from .tensor_core import FeatureMap


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_grid_flags(p):
    d = BevGrid()
    g = p.add_argument_group("BEV grid (metres, ego frame)")
    g.add_argument("--x-min", type=float, default=d.x_min, help="left edge of the target window, m (default %(default)s)")
    g.add_argument("--x-max", type=float, default=d.x_max, help="right edge of the target window, m (default %(default)s)")
    g.add_argument("--z-min", type=float, default=d.z_min, help="near edge of the target window, m (default %(default)s)")
    g.add_argument("--z-max", type=float, default=d.z_max, help="far edge of the target window, m (default %(default)s)")
    g.add_argument("--resolution", type=float, default=d.resolution, help="cell size, m/cell (default %(default)s)")
    g.add_argument("--fov-margin", type=float, default=d.fov_margin, help="extra FOV border per side, m (default %(default)s)")


def _grid(args) -> BevGrid:
    try:
        return BevGrid(args.x_min, args.x_max, args.z_min, args.z_max, args.resolution, args.fov_margin)
    except ValueError as exc:
        raise UsageError(f"--grid flags: {exc}") from None


def _load(what: str, path, loader):
    try:
        return loader(path)
    except fmt.FormatError as exc:
        raise UsageError(f"{what} {path}: {exc}") from None


# ---------------------------------------------------------------- synth


def cmd_synth(args):
    if args.frames < 1:
        raise UsageError("--frames must be >= 1")
    try:
        noise = NoiseParams(args.noise_sigma, args.noise_fragment, args.noise_dropout, args.noise_fp_rate, args.noise_prob_sigma)
        scene = generate_scene(args.seed, args.layout, args.lanes, args.frames, args.dt)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    grid = _grid(args)
    out = Path(args.out)
    indices = list(range(args.frames))
    ref = args.frames // 2
    estimates = simulate_frame_estimates(scene, indices, noise, args.seed, grid, ref)
    fmt.write_scene(out / "scene.json", scene)
    pattern = lane_pattern(scene.gt_graph)
    files = []
    for k in indices:
        rig = scene.rig(k)
        names = {
            "rig": f"rig_{k:03d}.json",
            "image": f"image_{k:03d}.lgkt",
            "estimate": f"estimate_{k:03d}.json",
            "gt": f"gt_{k:03d}.json",
        }
        fmt.write_rig(out / names["rig"], rig)
        to_global = rig.ego_pose
        image = render_ground_pattern(lambda x, z: pattern(x, z, to_global), rig, scene.image_shape)
        fmt.write_feature_map(out / names["image"], image)
        fmt.write_estimate(out / names["estimate"], estimates[k])
        fmt.write_graph(out / names["gt"], gt_in_frame(scene, k, grid))
        files.append({"index": k, "timestamp": scene.timestamps[k], **names})
    manifest = {
        "seed": args.seed,
        "layout": Layout(args.layout).value,
        "lanes": args.lanes,
        "dt": args.dt,
        "reference": ref,
        "noise": vars(noise),
        "frames": files,
    }
    fmt.atomic_write(out / "manifest.json", (json.dumps(manifest, indent=1) + "\n").encode())
    print(f"wrote {args.frames} frames to {out}")


# ---------------------------------------------------------------- warp


def cmd_warp(args):
    image = _load("--image", args.image, fmt.read_feature_map)
    rig = _load("--rig", args.rig, fmt.read_rig)
    ref = _load("--ref-rig", args.ref_rig, fmt.read_rig) if args.ref_rig else rig
    warped = warp_frame(image, rig, ref, _grid(args), args.relative_time)
    tensor, sidecar = fmt.write_warped(args.out, warped)
    print(f"wrote {tensor} and {sidecar} ({warped.mask.count()} valid cells)")


# ---------------------------------------------------------------- aggregate


def cmd_aggregate(args):
    frames = [_load("--frames", p, fmt.read_warped) for p in args.frames]
    grids = {f.grid for f in frames}
    if len(grids) > 1:
        raise UsageError("--frames were warped onto different grids")
    pre = default_pre_transform(args.seed)
    try:
        agg = aggregate(frames, args.op, None if args.seed is None else pre)
    except ValueError as exc:
        raise UsageError(f"--frames: {exc}") from None
    grid = frames[0].grid
    feats, coverage = agg.features, agg.coverage
    if not args.no_crop:
        feats, coverage = crop_to_target(feats, grid), crop_mask(coverage, grid)
    fmt.write_aggregate(args.out, feats, coverage, agg.frame_count, AggregateOp(args.op).value, grid, not args.no_crop)
    print(f"aggregated {agg.frame_count} frames into {Path(args.out).with_suffix('.lgkt')}")


# ---------------------------------------------------------------- postmerge


def cmd_postmerge(args):
    estimates = [_load("--estimates", p, fmt.read_estimate) for p in args.estimates]
    if not 0 <= args.ref < len(estimates):
        raise UsageError(f"--ref {args.ref} is out of range for {len(estimates)} estimates")
    if args.rigs:
        if len(args.rigs) != len(estimates):
            raise UsageError(f"--rigs needs one rig per estimate ({len(estimates)}), got {len(args.rigs)}")
        rigs = [_load("--rigs", p, fmt.read_rig) for p in args.rigs]
        estimates = [to_reference(e, r, rigs[args.ref]) for e, r in zip(estimates, rigs)]
    try:
        params = MergeParams(args.prob_thresh, args.dir_thresh, args.dist_thresh)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    graph = post_merge(estimates, args.ref, params, args.connect_tol)
    if not args.no_clip:
        graph = clip_graph(graph, _grid(args).target_window())
    fmt.write_graph(args.out, graph)
    print(f"merged graph with {len(graph)} centerlines and {len(graph.edges())} edges -> {args.out}")


# ---------------------------------------------------------------- eval


def cmd_eval(args):
    pred = _load("--pred", args.pred, fmt.read_graph)
    gt = _load("--gt", args.gt, fmt.read_graph)
    if not args.match_dist > 0:
        raise UsageError("--match-dist must be positive")
    report = evaluate(pred, gt, args.match_dist)
    text = json.dumps({"format": "lgk.eval", "version": 1, **report.to_dict()}, indent=1) + "\n"
    if args.out:
        fmt.atomic_write(args.out, text.encode())
    sys.stdout.write(text)


# ---------------------------------------------------------------- embed


def cmd_embed(args):
    if min(args.n, args.x, args.y, args.f) < 1:
        raise UsageError("--n, --x, --y and --f must all be >= 1")
    if args.offsets:
        try:
            offsets = [float(t) for t in args.offsets.split(",")]
        except ValueError:
            raise UsageError(f"--offsets must be comma separated numbers, got {args.offsets!r}") from None
        if len(offsets) != args.n:
            raise UsageError(f"--offsets has {len(offsets)} values but --n is {args.n}")
    else:
        offsets = [float(k - args.n // 2) for k in range(args.n)]
    try:
        cfg = EmbeddingConfig(args.f, args.temporal_dim)
    except ValueError as exc:
        raise UsageError(f"--f/--temporal-dim: {exc}") from None
    if args.features:
        if len(args.features) != args.n:
            raise UsageError(f"--features has {len(args.features)} files but --n is {args.n}")
        frames = [_load("--features", p, fmt.read_feature_map) for p in args.features]
    else:
        frames = [FeatureMap.zeros(args.x, args.y, args.f) for _ in range(args.n)]
    try:
        seq = flatten_with_embeddings(frames, offsets, cfg)
    except ValueError as exc:
        raise UsageError(f"--features: {exc}") from None
    tensor, sidecar = fmt.write_tokens(args.out, seq, offsets)
    print(f"wrote {len(seq)} tokens of dim {cfg.feature_dim} to {tensor} and {sidecar}")


# ---------------------------------------------------------------- render


def cmd_render(args):
    graphs = [_load("--graph", p, fmt.read_graph) for p in args.graph]
    window = None
    if args.window:
        window = tuple(args.window)
        if not (window[0] < window[1] and window[2] < window[3]):
            raise UsageError("--window must be X_MIN X_MAX Z_MIN Z_MAX with min < max")
    if not args.scale > 0:
        raise UsageError("--scale must be positive")
    svg = render_svg(graphs, [Path(p).stem for p in args.graph], window, args.scale)
    fmt.atomic_write(args.out, svg.encode())
    print(f"rendered {len(graphs)} graph(s) to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lgk", description="Lane graph toolkit: BEV warping, temporal aggregation and merging.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic scene bundle")
    p.add_argument("--seed", type=int, default=0, help="scene and noise seed (default %(default)s)")
    p.add_argument("--layout", choices=[l.value for l in Layout], default="straight", help="road layout (default %(default)s)")
    p.add_argument("--lanes", type=int, default=2, help="lane count (default %(default)s)")
    p.add_argument("--frames", type=int, default=3, help="number of frames (default %(default)s)")
    p.add_argument("--dt", type=float, default=2.0, help="time between frames, seconds (default %(default)s)")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="control point jitter, m (default %(default)s)")
    p.add_argument("--noise-fragment", type=float, default=0.0, help="per-line fragmentation probability (default %(default)s)")
    p.add_argument("--noise-dropout", type=float, default=0.0, help="per-line dropout probability (default %(default)s)")
    p.add_argument("--noise-fp-rate", type=float, default=0.0, help="expected false positives per frame (default %(default)s)")
    p.add_argument("--noise-prob-sigma", type=float, default=0.0, help="existence probability noise, logits (default %(default)s)")
    _add_grid_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("warp", help="warp a feature map onto the reference BEV grid")
    p.add_argument("--image", required=True, help="feature map tensor (.lgkt, H x W x C)")
    p.add_argument("--rig", required=True, help="rig JSON of the frame")
    p.add_argument("--ref-rig", help="rig JSON of the reference frame (default: --rig)")
    p.add_argument("--relative-time", type=float, default=0.0, help="signed frame offset from the reference, frames")
    _add_grid_flags(p)
    p.add_argument("--out", required=True, help="output prefix; writes <out>.lgkt and <out>.json")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("aggregate", help="fuse warped frames into one BEV map")
    p.add_argument("--frames", nargs="+", required=True, help="warped frame prefixes")
    p.add_argument("--op", choices=[o.value for o in AggregateOp], default="max", help="reduction (default %(default)s)")
    p.add_argument("--seed", type=int, help="seed of the residual pre-transform (default: identity)")
    p.add_argument("--no-crop", action="store_true", help="keep the full FOV instead of the target window")
    p.add_argument("--out", required=True, help="output prefix; writes <out>.lgkt and <out>.json")
    p.set_defaults(func=cmd_aggregate)

    d = MergeParams()
    p = sub.add_parser("postmerge", help="merge per-frame estimates into the reference lane graph")
    p.add_argument("--estimates", nargs="+", required=True, help="estimate JSON files, one per frame")
    p.add_argument("--ref", type=int, default=0, help="index of the reference estimate (default %(default)s)")
    p.add_argument("--rigs", nargs="+", help="rig JSON per estimate; moves estimates into the reference ego frame")
    p.add_argument("--prob-thresh", type=float, default=d.prob_thresh, help="existence threshold, [0,1] (default %(default)s)")
    p.add_argument("--dir-thresh", type=float, default=d.dir_thresh, help="heading dot-product threshold, [-1,1] (default %(default)s)")
    p.add_argument("--dist-thresh", type=float, default=d.dist_thresh, help="point match distance, m (default %(default)s)")
    p.add_argument("--connect-tol", type=float, default=DEFAULT_CONNECT_TOL, help="end-to-start join tolerance, m (default %(default)s)")
    p.add_argument("--no-clip", action="store_true", help="do not clip the merged graph to the target window")
    _add_grid_flags(p)
    p.add_argument("--out", required=True, help="output graph JSON")
    p.set_defaults(func=cmd_postmerge)

    p = sub.add_parser("eval", help="score a predicted graph against ground truth")
    p.add_argument("--pred", required=True, help="predicted graph JSON")
    p.add_argument("--gt", required=True, help="ground truth graph JSON")
    p.add_argument("--match-dist", type=float, default=DEFAULT_MATCH_DIST, help="match distance, m (default %(default)s)")
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("embed", help="flatten frames into a token sequence with spatio-temporal embeddings")
    p.add_argument("--n", type=int, required=True, help="number of frames")
    p.add_argument("--x", type=int, required=True, help="rows per frame, cells")
    p.add_argument("--y", type=int, required=True, help="columns per frame, cells")
    p.add_argument("--f", type=int, required=True, help="feature channels")
    p.add_argument("--offsets", help="comma separated relative frame offsets, frames (default: centred on the middle frame)")
    p.add_argument("--temporal-dim", type=int, help="channels for the temporal code (default: f/4)")
    p.add_argument("--features", nargs="+", help="feature map tensors, one per frame (default: zeros)")
    p.add_argument("--out", required=True, help="output prefix; writes <out>.lgkt and <out>.json")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("render", help="draw lane graphs as SVG")
    p.add_argument("--graph", nargs="+", required=True, help="graph JSON files")
    p.add_argument("--window", type=float, nargs=4, metavar=("X_MIN", "X_MAX", "Z_MIN", "Z_MAX"), help="view window, m")
    p.add_argument("--scale", type=float, default=10.0, help="pixels per metre (default %(default)s)")
    p.add_argument("--out", required=True, help="output SVG file")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"lgk {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"lgk {args.command}: I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
