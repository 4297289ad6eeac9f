"""Command-line driver: generate, compress, reconstruct, report.

Exit codes: 0 success, 2 usage error, 3 data or format error,
4 reconstruction finished without convergence.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from .fields import (FieldFormatError, eval_field_f, eval_field_g, eval_field_smooth,
                     expression_field, gen_holed_mesh, polynomial_field, read_field,
                     write_field)
from .mesh import MeshFormatError, partition_cloud, read_mesh, write_mesh
from .pipeline import (ReconstructionReport, error_norm, reconstruct_at_level,
                       reconstruct_clod, reconstruct_partitioned_report,
                       write_report_csv)
from .sampler import (BernoulliSpec, BundleFormatError, choose_sample_count,
                      derive_rank_seed, make_bundle, read_bundle, write_bundle)
from .basis import build_basis, hierarchy_for_order
from .stomp import StompConfig
from .vtk import VtkFormatError, export_vtk

_EXIT_OK = 0
_EXIT_DATA = 3
_EXIT_NOT_CONVERGED = 4

_FIELD_KINDS = {
    "highfreq": "highfreq", "f_highfreq": "highfreq", "f-highfreq": "highfreq",
    "lowfreq": "lowfreq", "g_lowfreq": "lowfreq", "g-lowfreq": "lowfreq",
    "smooth": "smooth", "polynomial": "polynomial", "expr": "expr",
}


def _eval_kind(kind: str, cloud, args) -> np.ndarray:
    if kind == "highfreq":
        return eval_field_f(cloud.coords)
    if kind == "lowfreq":
        return eval_field_g(cloud.coords)
    if kind == "smooth":
        return eval_field_smooth(cloud.coords)
    if kind == "polynomial":
        return polynomial_field(cloud, args.degree, args.seed)
    if args.expr is None:
        raise ValueError("--expr is required for kind 'expr'")
    return expression_field(cloud, args.expr)


def _stomp_config(args) -> StompConfig:
    return StompConfig(threshold=args.threshold, max_stages=args.max_stages,
                       residual_tol=args.residual_tol, ridge=args.ridge)


def _parse_level(text: str) -> int | str:
    if text == "full":
        return "full"
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"--level must be an integer or 'full', got {text!r}") from None


def _rank_path(base: str, rank: int) -> Path:
    path = Path(base)
    return path.with_name(f"{path.stem}.rank{rank}{path.suffix}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_mesh(args) -> int:
    cloud = gen_holed_mesh(args.points, args.holes, args.seed, dim=args.dim,
                           radius_range=(args.radius_min, args.radius_max))
    write_mesh(args.out, cloud)
    print(f"wrote {args.out}: {cloud.n_points} points, dim {cloud.dim}, {args.holes} holes")
    if args.vtk:
        export_vtk(args.vtk, cloud, {})
        print(f"wrote {args.vtk}")
    return _EXIT_OK


def cmd_gen_field(args) -> int:
    cloud, _ = read_mesh(args.mesh)
    kind = _FIELD_KINDS[args.kind]
    values = _eval_kind(kind, cloud, args)
    name = args.name or kind
    write_field(args.out, name, values)
    print(f"wrote {args.out}: field '{name}' on {cloud.n_points} points")
    return _EXIT_OK


def cmd_compress(args) -> int:
    if args.ratio is not None and not args.ratio >= 1.0:
        raise ValueError(f"--ratio must be >= 1, got {args.ratio}")
    if args.samples is not None and args.samples < 1:
        raise ValueError(f"--samples must be positive, got {args.samples}")
    if args.sparsity is not None and args.sparsity < 1:
        raise ValueError(f"--sparsity must be positive, got {args.sparsity}")
    cloud, _ = read_mesh(args.mesh)
    name, values = read_field(args.field)
    if values.shape[0] != cloud.n_points:
        raise ValueError(f"field has {values.shape[0]} values for {cloud.n_points} points")

    def samples_for(n: int) -> int:
        if args.samples is not None:
            return args.samples
        if args.ratio is not None:
            return min(n, max(1, round(n / args.ratio)))
        return choose_sample_count(n, args.sparsity, args.constant)

    if args.partitions == 1:
        spec = BernoulliSpec(cloud.n_points, samples_for(cloud.n_points), args.seed)
        bundle = make_bundle(values, spec, name, rank_id=0)
        write_bundle(args.out, bundle)
        print(f"wrote {args.out}: M={spec.m} of N={spec.n} (R={spec.n / spec.m:.2f}), seed={spec.seed}")
        return _EXIT_OK
    parts = partition_cloud(cloud, args.partitions)
    for part in parts:
        spec = BernoulliSpec(part.size, samples_for(part.size),
                             derive_rank_seed(args.seed, part.rank_id))
        bundle = make_bundle(values[part.start : part.stop], spec, name, rank_id=part.rank_id)
        path = _rank_path(args.out, part.rank_id)
        write_bundle(path, bundle)
        print(f"wrote {path}: rank {part.rank_id}, M={spec.m} of N={spec.n}")
    return _EXIT_OK


def _single_report(level: int, seconds: float, result, f_r, err) -> ReconstructionReport:
    return ReconstructionReport(
        f_r=f_r, levels=np.array([level]), seconds=np.array([seconds]),
        stages=np.array([result.stages_used]), converged=np.array([result.converged]),
        errors=None if err is None else np.array([err]))


def cmd_reconstruct(args) -> int:
    cloud, cells = read_mesh(args.mesh)
    bundles = [read_bundle(p) for p in args.bundle]
    config = _stomp_config(args)
    level = _parse_level(args.level)
    reference = None
    if args.reference:
        _, reference = read_field(args.reference)
        if reference.shape[0] != cloud.n_points:
            raise ValueError("reference field length does not match mesh")

    if len(bundles) == 1:
        bundle = bundles[0]
        if args.clod:
            report = reconstruct_clod(bundle, cloud, args.order, args.stride,
                                      stomp=config, reference=reference)
        else:
            basis = build_basis(hierarchy_for_order(cloud, args.order), args.order)
            j = basis.n_levels if level == "full" else level
            t0 = time.perf_counter()
            f_r, _, result = reconstruct_at_level(bundle, cloud, args.order, j,
                                                  stomp=config, basis=basis)
            err = None if reference is None else error_norm(reference, f_r)
            report = _single_report(j, time.perf_counter() - t0, result, f_r, err)
        f_r = report.f_r
        converged = report.final_converged
        name = bundle.name
    else:
        parts = partition_cloud(cloud, len(bundles))
        f_r, rank_reports = reconstruct_partitioned_report(
            bundles, cloud, parts, args.order, level, stomp=config, reference=reference)
        err = None if reference is None else error_norm(reference, f_r)
        report = ReconstructionReport(
            f_r=f_r,
            levels=np.concatenate([r.levels for r in rank_reports]),
            seconds=np.concatenate([r.seconds for r in rank_reports]),
            stages=np.concatenate([r.stages for r in rank_reports]),
            converged=np.concatenate([r.converged for r in rank_reports]),
            errors=None if reference is None else
            np.concatenate([r.errors for r in rank_reports]))
        converged = bool(np.all(report.converged))
        name = bundles[0].name

    if args.out:
        write_field(args.out, f"{name}_recon", f_r)
        print(f"wrote {args.out}")
    if args.vtk:
        vtk_fields = {f"{name}_recon": f_r}
        if reference is not None:
            vtk_fields[name] = reference
        export_vtk(args.vtk, cloud, vtk_fields, cells=cells)
        print(f"wrote {args.vtk}")
    if args.report:
        write_report_csv(report, args.report)
        print(f"wrote {args.report}")
    if args.figures:
        from .plots import save_field_figure, save_level_figures

        for path in save_level_figures(report, args.figures):
            print(f"wrote {path}")
        if cloud.dim == 2:
            fig_fields = {f"{name}_recon": f_r}
            if reference is not None:
                fig_fields[name] = reference
            print(f"wrote {save_field_figure(cloud, fig_fields, args.figures + '_field.png')}")
    if reference is not None:
        print(f"normalized_l2_error = {error_norm(reference, f_r):.6e}")
    print(f"converged = {converged}")
    return _EXIT_OK if converged else _EXIT_NOT_CONVERGED


def cmd_metrics(args) -> int:
    _, ref = read_field(args.reference)
    _, rec = read_field(args.reconstructed)
    err = error_norm(ref, rec)
    print(f"normalized_l2_error = {err:.17g}")
    print(f"max_abs_difference = {np.max(np.abs(ref - rec)):.17g}")
    return _EXIT_OK


def cmd_sweep(args) -> int:
    cloud, _ = read_mesh(args.mesh)
    _, values = read_field(args.field)
    if values.shape[0] != cloud.n_points:
        raise ValueError(f"field has {values.shape[0]} values for {cloud.n_points} points")
    orders = [int(t) for t in args.orders.split(",") if t]
    ratios = [float(t) for t in args.ratios.split(",") if t]
    if not orders or not ratios:
        raise ValueError("need at least one order and one ratio")
    config = _stomp_config(args)
    errors = np.full((len(ratios), len(orders)), np.nan)
    rows = []
    for wi, w in enumerate(orders):
        basis = build_basis(hierarchy_for_order(cloud, w), w)
        for ri, ratio in enumerate(ratios):
            m = min(cloud.n_points, max(1, round(cloud.n_points / ratio)))
            spec = BernoulliSpec(cloud.n_points, m, args.seed)
            bundle = make_bundle(values, spec, "sweep")
            t0 = time.perf_counter()
            f_r, _, result = reconstruct_at_level(bundle, cloud, w, basis.n_levels,
                                                  stomp=config, basis=basis)
            elapsed = time.perf_counter() - t0
            err = error_norm(values, f_r)
            errors[ri, wi] = err
            rows.append([w, ratio, m, err, elapsed, result.stages_used, result.converged])
            print(f"w={w} R={ratio:g} M={m}: error={err:.4e} "
                  f"({elapsed:.1f}s, {result.stages_used} stages, converged={result.converged})")
    with open(args.report, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["order", "ratio", "samples", "error", "seconds", "stages", "converged"])
        for w, ratio, m, err, elapsed, stages, conv in rows:
            writer.writerow([w, format(ratio, ".17g"), m, format(err, ".17g"),
                             format(elapsed, ".17g"), stages, conv])
    print(f"wrote {args.report}")
    if args.figures:
        from .plots import save_sweep_figure

        path = save_sweep_figure(np.array(orders), np.array(ratios), errors,
                                 args.figures + "_sweep.png")
        print(f"wrote {path}")
    return _EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_stomp_args(sub):
    sub.add_argument("--threshold", type=float, default=2.5, help="stage threshold t (default 2.5)")
    sub.add_argument("--max-stages", type=int, default=10, help="stage cap (default 10)")
    sub.add_argument("--residual-tol", type=float, default=1e-6,
                     help="relative residual stop (default 1e-6)")
    sub.add_argument("--ridge", type=float, default=1e-12,
                     help="ridge used only on rank-deficient refits (default 1e-12)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshcs",
        description="Compress scalar fields on point clouds with seeded Bernoulli "
                    "projections; reconstruct via multiwavelets and StOMP.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-mesh", help="generate a holed-domain point cloud")
    p.add_argument("--points", type=int, required=True, help="exact point count")
    p.add_argument("--holes", type=int, default=0)
    p.add_argument("--dim", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius-min", type=float, default=0.05)
    p.add_argument("--radius-max", type=float, default=0.12)
    p.add_argument("--out", required=True)
    p.add_argument("--vtk", help="also export the bare cloud as VTK")
    p.set_defaults(func=cmd_gen_mesh)

    p = subs.add_parser("gen-field", help="evaluate an analytic field on a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--kind", required=True, choices=sorted(_FIELD_KINDS))
    p.add_argument("--degree", type=int, default=3, help="degree for kind 'polynomial'")
    p.add_argument("--expr", help="expression in x, y, z for kind 'expr'")
    p.add_argument("--seed", type=int, default=0, help="coefficient seed for 'polynomial'")
    p.add_argument("--name", help="stored field name (defaults to the kind)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_field)

    p = subs.add_parser("compress", help="sample a field into bundle file(s)")
    p.add_argument("--mesh", required=True)
    p.add_argument("--field", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--ratio", type=float, help="compression ratio R = N/M")
    group.add_argument("--samples", type=int, help="explicit sample count M")
    group.add_argument("--sparsity", type=int, help="estimated sparsity K; M = C K log2(N/K)")
    p.add_argument("--constant", type=float, default=4.0, help="C for --sparsity (default 4)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--partitions", type=int, default=1)
    p.add_argument("--out", required=True,
                   help="bundle path; with partitions > 1, rank is inserted before the suffix")
    p.set_defaults(func=cmd_compress)

    p = subs.add_parser("reconstruct", help="recover a field from bundle(s)")
    p.add_argument("--mesh", required=True)
    p.add_argument("--bundle", required=True, nargs="+",
                   help="one bundle, or one per partition rank")
    p.add_argument("--order", type=int, required=True, help="wavelet order w")
    p.add_argument("--level", default="full", help="detail level j or 'full'")
    p.add_argument("--clod", action="store_true", help="level-by-level warm-started solve")
    p.add_argument("--stride", type=int, default=2, help="CLOD level stride (default 2)")
    p.add_argument("--reference", help="field file with ground truth for error metrics")
    p.add_argument("--out", help="write the reconstructed field file here")
    p.add_argument("--vtk", help="export reconstruction (and reference) as VTK")
    p.add_argument("--report", help="write per-level CSV report here")
    p.add_argument("--figures", help="prefix for rendered PNG figures")
    _add_stomp_args(p)
    p.set_defaults(func=cmd_reconstruct)

    p = subs.add_parser("metrics", help="compare two field files")
    p.add_argument("--reference", required=True)
    p.add_argument("--reconstructed", required=True)
    p.set_defaults(func=cmd_metrics)

    p = subs.add_parser("sweep", help="error over wavelet orders and ratios")
    p.add_argument("--mesh", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--orders", required=True, help="comma list, e.g. 2,3,4,5,6,7,8")
    p.add_argument("--ratios", required=True, help="comma list, e.g. 10,20,40")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True, help="CSV output path")
    p.add_argument("--figures", help="prefix for the rendered PNG")
    _add_stomp_args(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MeshFormatError, BundleFormatError, FieldFormatError, VtkFormatError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
