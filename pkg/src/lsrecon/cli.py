"""``lsrecon`` command line: synth, fit, extract, eval and gradcheck.

Exit codes: 0 success, 1 numerical or acceptance failure, 2 usage error,
3 I/O or format error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .distance import Box, Sphere, Torus, analytic_sdf, sample_shape_surface
from .energy import LossWeights
from .errors import DomainError, FitDiverged, FormatError
from .gradcheck import ABS_TOL, REL_TOL, run_gradcheck
from .grid import GridSpec
from .metrics import DEFAULT_IOU_RES, chamfer, iou, voxelize_field, voxelize_mesh
from .optimizer import FitConfig, fit
from .surface import TriMesh, marching_cubes, sample_mesh_surface, shape_mesh

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2
EXIT_IO = 3

_DEFAULTS = LossWeights()


class UsageError(Exception):
    pass


def _add_common(p, seed=True):
    p.add_argument("--config", type=Path, help="flat 'key = value' file; command-line flags win")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads for numeric kernels")
    p.add_argument("--deterministic", action="store_true", help="single-threaded kernels, bit-reproducible output")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def _add_weights(p):
    p.add_argument("--alpha1", type=float, default=_DEFAULTS.alpha1, help="normal alignment weight")
    p.add_argument("--alpha2", type=float, default=_DEFAULTS.alpha2, help="unit gradient weight")
    p.add_argument("--alpha3", type=float, default=_DEFAULTS.alpha3, help="area weight")
    p.add_argument("--alpha4", type=float, default=_DEFAULTS.alpha4, help="volume weight")
    p.add_argument("--epsilon", type=float, default=_DEFAULTS.epsilon, help="mollifier half width")
    p.add_argument("--p", type=float, default=_DEFAULTS.p, help="exponent of the data and normal terms")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsrecon", description="Level-set surface reconstruction from oriented point clouds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="analytic shape -> ground-truth field, cloud and mesh")
    p.add_argument("shape", choices=("sphere", "box", "torus"))
    p.add_argument("--radius", type=float, default=0.5, help="sphere radius")
    p.add_argument("--half-extent", type=float, nargs="+", default=[0.4], help="box half extent (1 or 3 values)")
    p.add_argument("--major-radius", type=float, default=0.5, help="torus ring radius")
    p.add_argument("--minor-radius", type=float, default=0.2, help="torus tube radius")
    p.add_argument("--center", type=float, nargs=3, default=[0.0, 0.0, 0.0])
    p.add_argument("--count", type=int, default=2000, help="number of cloud samples")
    p.add_argument("--res", type=int, default=64, help="nodes per axis of the analytic field")
    p.add_argument("--mesh-res", type=int, default=128, help="marching cubes resolution of curved shapes")
    p.add_argument("--out-dir", type=Path, default=Path("."))
    p.add_argument("--name", default=None, help="file stem (default: the shape name)")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a level-set field to an oriented cloud")
    p.add_argument("--input", type=Path, required=True, help="cloud file (x y z nx ny nz per line)")
    p.add_argument("--res", type=int, default=32)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--step", type=float, default=None, help="step size (default 0.05 h^2)")
    p.add_argument("--momentum", type=float, default=0.9)
    _add_weights(p)
    p.add_argument("--init-radius", type=float, default=0.6)
    p.add_argument("--init-field", type=Path, default=None, help="start from this field instead of a sphere")
    p.add_argument("--stop-tol", type=float, default=1e-4)
    p.add_argument("--log-every", type=int, default=10)
    p.add_argument("--out", type=Path, required=True, help="output field file")
    p.add_argument("--log", type=Path, default=None, help="CSV loss log")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("extract", help="zero level set of a field as an OBJ mesh")
    p.add_argument("--field", type=Path, required=True)
    p.add_argument("--iso", type=float, default=0.0)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="IoU and Chamfer distance between two shapes (field or mesh)")
    p.add_argument("--pred", type=Path, required=True, help=".lsf field or .obj mesh")
    p.add_argument("--gt", type=Path, required=True, help=".lsf field or .obj mesh")
    p.add_argument("--iou-res", type=int, default=DEFAULT_IOU_RES)
    p.add_argument("--chamfer-samples", type=int, default=10000)
    p.add_argument("--min-iou", type=float, default=None, help="exit 1 when IoU is lower")
    p.add_argument("--max-chamfer", type=float, default=None, help="exit 1 when Chamfer is higher")
    p.add_argument("--out", type=Path, default=None, help="also write the report here")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="compare the loss gradient with finite differences")
    p.add_argument("--res", type=int, default=12)
    p.add_argument("--nodes", type=int, default=50)
    _add_weights(p)
    p.add_argument("--tol", type=float, default=REL_TOL, help="relative error tolerance")
    p.add_argument("--sabotage", action="store_true", help="corrupt the analytic gradient (negative control)")
    _add_common(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


# --- config handling ----------------------------------------------------------


def _subparser_action(parser):
    return next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))


def _convert(action, raw: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        low = raw.lower()
        if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise UsageError(f"config key {action.dest!r}: expected a boolean, got {raw!r}")
        return low in ("1", "true", "yes", "on")
    kind = action.type or str
    try:
        if action.nargs in ("+", "*") or isinstance(action.nargs, int):
            return [kind(tok) for tok in raw.split()]
        if raw.lower() == "none" and action.default is None:
            return None
        return kind(raw)
    except ValueError:
        raise UsageError(f"config key {action.dest!r}: bad value {raw!r}") from None


def _apply_config(parser, argv):
    """Parse ``argv``; values from ``--config`` fill in what the command line leaves unset."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    subs = _subparser_action(parser).choices
    command = next((tok for tok in argv if tok in subs), None)
    if known.config is not None and command is not None:
        values = io.read_config(known.config)
        sub = subs[command]
        actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
        defaults = {}
        for key, raw in values.items():
            if key not in actions:
                raise UsageError(f"unknown config key {key!r} for '{command}'")
            defaults[key] = _convert(actions[key], raw)
        sub.set_defaults(**defaults)
        # required flags may come from the file
        for key in defaults:
            actions[key].required = False
    return parser.parse_args(argv)


def _print_config(args):
    items = {k: v for k, v in vars(args).items() if k not in ("func",)}
    lines = []
    for key in sorted(items):
        v = items[key]
        if isinstance(v, (list, tuple)):
            v = " ".join(str(x) for x in v)
        lines.append(f"{key} = {v}")
    print("# resolved configuration", file=sys.stderr)
    print("\n".join(lines), file=sys.stderr)


@contextlib.contextmanager
def _thread_limit(args):
    threads = 1 if args.deterministic else args.threads
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=threads):
        yield


# --- commands --------------------------------------------------------------------


def _weights(args) -> LossWeights:
    return LossWeights(args.alpha1, args.alpha2, args.alpha3, args.alpha4, p=args.p, epsilon=args.epsilon)


def _make_shape(args):
    center = tuple(args.center)
    if args.shape == "sphere":
        return Sphere(center, args.radius)
    if args.shape == "box":
        he = args.half_extent
        if len(he) not in (1, 3):
            raise UsageError("--half-extent takes 1 or 3 values")
        return Box(center, tuple(he * 3 if len(he) == 1 else he))
    return Torus(center, args.major_radius, args.minor_radius)


def cmd_synth(args) -> int:
    try:
        shape = _make_shape(args)
    except DomainError as exc:
        raise UsageError(f"invalid shape: {exc}") from None
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    stem = args.name or args.shape
    args.out_dir.mkdir(parents=True, exist_ok=True)
    paths = [args.out_dir / f"{stem}{ext}" for ext in (".lsf", ".xyz", ".obj")]
    io.write_field(analytic_sdf(shape, GridSpec.cube(args.res)), paths[0])
    io.write_cloud(sample_shape_surface(shape, args.count, args.seed), paths[1])
    io.write_obj(shape_mesh(shape, args.mesh_res), paths[2])
    for path in paths:
        print(path)
    return EXIT_OK


def cmd_fit(args) -> int:
    cloud = io.read_cloud(args.input)
    spec = GridSpec.cube(args.res)
    cfg = FitConfig(
        max_iters=args.iters,
        step_size=args.step,
        momentum=args.momentum,
        stop_tol=args.stop_tol,
        weights=_weights(args),
        init=args.init_field if args.init_field is not None else args.init_radius,
        log_every=args.log_every,
        seed=args.seed,
    )
    print(f"# step size {cfg.resolved_step(spec)!r}", file=sys.stderr)
    code = EXIT_OK
    try:
        field, report = fit(cloud, spec, cfg)
    except FitDiverged as exc:
        print(f"error: {exc}; writing the last finite field", file=sys.stderr)
        field, report, code = exc.last_good, exc.report, EXIT_NUMERIC
    io.write_field(field, args.out)
    if args.log is not None:
        with open(args.log, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iter", "e_data", "e_normal", "e_sdf", "e_area", "e_vol", "total"])
            for it, b in report.history:
                writer.writerow([it] + [repr(x) for x in (b.e_data, b.e_normal, b.e_sdf, b.e_area, b.e_vol, b.total)])
    if report.history:
        print(f"iterations={report.iterations}")
        print(f"stop_reason={report.stop_reason}")
        print(f"initial_loss={report.initial.total!r}")
        print(f"final_loss={report.final.total!r}")
    return code


def cmd_extract(args) -> int:
    mesh = marching_cubes(io.read_field(args.field), args.iso)
    io.write_obj(mesh, args.out)
    print(f"vertices={len(mesh.vertices)}")
    print(f"triangles={len(mesh)}")
    if len(mesh) == 0:
        print("warning: the level set is empty", file=sys.stderr)
    return EXIT_OK


def _load_shape(path: Path):
    if path.suffix.lower() == ".obj":
        mesh = io.read_obj(path)
        return mesh, mesh
    phi = io.read_field(path)
    return phi, marching_cubes(phi)


def _occupancy(obj, res):
    if isinstance(obj, TriMesh):
        return voxelize_mesh(obj, res)
    return voxelize_field(obj, res)


def cmd_eval(args) -> int:
    if args.iou_res < 2 or args.chamfer_samples < 1:
        raise UsageError("--iou-res must be >= 2 and --chamfer-samples >= 1")
    pred, pred_mesh = _load_shape(args.pred)
    gt, gt_mesh = _load_shape(args.gt)
    score = iou(_occupancy(pred, args.iou_res), _occupancy(gt, args.iou_res))
    seed_pred, seed_gt = (int(s) for s in np.random.SeedSequence(args.seed).generate_state(2))
    if len(pred_mesh) and len(gt_mesh):
        dist = chamfer(
            sample_mesh_surface(pred_mesh, args.chamfer_samples, seed_pred),
            sample_mesh_surface(gt_mesh, args.chamfer_samples, seed_gt),
        )
    else:
        dist = float("inf")
    text = f"iou={score!r}\nchamfer={dist!r}\n"
    sys.stdout.write(text)
    if args.out is not None:
        Path(args.out).write_text(text, encoding="utf-8")
    failed = []
    if not np.isfinite(dist):
        failed.append("a surface is empty, Chamfer distance is undefined")
    if args.min_iou is not None and not score >= args.min_iou:
        failed.append(f"iou {score:.6g} < {args.min_iou}")
    if args.max_chamfer is not None and not dist <= args.max_chamfer:
        failed.append(f"chamfer {dist:.6g} > {args.max_chamfer}")
    for msg in failed:
        print(f"error: {msg}", file=sys.stderr)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_gradcheck(args) -> int:
    if not 4 <= args.res <= 16:
        raise UsageError("--res must lie in [4, 16]")
    if args.nodes < 1:
        raise UsageError("--nodes must be >= 1")
    report = run_gradcheck(args.res, args.seed, _weights(args), args.nodes, sabotage=args.sabotage)
    for r in report.results:
        print(f"{r.term}: max_rel={r.max_rel:.3e} max_abs={r.max_abs:.3e}")
    bad = [r for r in report.results if not r.passed(args.tol, ABS_TOL)]
    for r in bad:
        print(
            f"error: term {r.term} at node {r.worst_node}: analytic {r.worst_analytic!r} vs numeric {r.worst_numeric!r}",
            file=sys.stderr,
        )
    return EXIT_NUMERIC if bad else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        _print_config(args)
        with _thread_limit(args):
            return args.func(args)
    except UsageError as exc:
        print(f"lsrecon: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as exc:
        print(f"lsrecon: {exc}", file=sys.stderr)
        return EXIT_IO
    except DomainError as exc:
        print(f"lsrecon: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitDiverged as exc:  # pragma: no cover - handled inside cmd_fit
        print(f"lsrecon: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
