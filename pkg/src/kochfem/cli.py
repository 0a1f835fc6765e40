"""Command-line front end: geometry, mesh, solve, table1, convergence, mosco.

Heavy numerical modules are imported inside main() so the --threads cap can
be exported to the BLAS environment before anything numeric loads.  Exit
codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _global_flags(parser: argparse.ArgumentParser, root: bool) -> None:
    """Shared flags, accepted both before and after the subcommand.

    The subparser copies use SUPPRESS defaults so a value parsed at the
    root is not overwritten when the subcommand omits the flag.
    """
    suppressed = argparse.SUPPRESS
    parser.add_argument("--config", metavar="PATH",
                        **({} if root else {"default": suppressed}),
                        help="flat key-value configuration file")
    parser.add_argument("--out", metavar="DIR",
                        **({} if root else {"default": suppressed}),
                        help="output directory (default: from config)")
    parser.add_argument("--threads", type=int, metavar="K",
                        **({} if root else {"default": suppressed}),
                        help="cap BLAS/OpenMP worker threads")
    parser.add_argument("--max-n", type=int, metavar="N",
                        **({"default": 4} if root else {"default": suppressed}),
                        help="deepest boundary level for table1/mosco "
                             "(default 4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kochfem",
        description="Magnetostatic field solver on pre-fractal snowflake "
                    "domains with corner-graded triangular meshes.")
    _global_flags(parser, root=True)
    sub = parser.add_subparsers(dest="command", required=True)

    def subparser(name: str, help_text: str) -> argparse.ArgumentParser:
        child = sub.add_parser(name, help=help_text)
        _global_flags(child, root=False)
        return child

    geo = subparser("geometry", "emit the boundary polygon and its "
                                "summary statistics")
    geo.add_argument("--level", type=int, help="boundary level override")

    mesh = subparser("mesh", "build the graded mesh and export it")
    _domain_flags(mesh)

    solve = subparser("solve", "run the full field pipeline")
    _domain_flags(solve)

    subparser("table1", "reproduce the peak-field summary table "
                        "across domains")

    conv = subparser("convergence", "error ladder against a nested reference")
    conv.add_argument("--level", type=int, help="boundary level (default 2)")
    conv.add_argument("--levels", type=int, default=4,
                      help="ladder length (default 4, minimum 4)")
    mode = conv.add_mutually_exclusive_group()
    mode.add_argument("--graded", dest="graded", action="store_true",
                      default=True, help="corner-graded meshes (default)")
    mode.add_argument("--uniform", dest="graded", action="store_false",
                      help="uniform refinement instead of grading")

    subparser("mosco", "L2 differences between consecutive boundary levels")
    return parser


def _domain_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--domain", choices=("snowflake", "circle", "square"),
                     help="domain kind override")
    sub.add_argument("--level", type=int, help="boundary level override")
    sub.add_argument("--h", type=float, help="grading parameter override")


def _formats(cfg) -> set[str]:
    return {token.strip() for token in cfg.formats.split(",")}


def cmd_geometry(cfg, out: Path, fmts: set[str]) -> int:
    from .config import domain_spec
    from .export import write_boundary_csv, write_summary_csv
    from .geometry import boundary_length, polygon_area

    spec = domain_spec(cfg)
    boundary = spec.boundary()
    measured = boundary_length(boundary)
    summary = [
        ("domain", spec.label),
        ("num_vertices", len(boundary.vertices)),
        ("num_reentrant", len(boundary.reentrant)),
        ("nominal_length", spec.nominal_boundary_length),
        ("polygon_length", measured),
        ("area", polygon_area(boundary)),
    ]
    write_boundary_csv(out / "boundary.csv", boundary)
    write_summary_csv(out / "geometry_summary.csv", summary)
    if "png" in fmts:
        from .plots import plot_boundary

        plot_boundary(out / "boundary.png", boundary)
    for key, value in summary:
        print(f"{key}: {value}")
    return 0


def cmd_mesh(cfg, out: Path, fmts: set[str]) -> int:
    from .config import domain_spec, grading_for
    from .export import write_mesh_csv, write_summary_csv
    from .fem import base_mesh_for
    from .mesh import check_grisvard, refine_to_size

    spec = domain_spec(cfg)
    g = grading_for(cfg)
    boundary = spec.boundary()
    mesh = refine_to_size(base_mesh_for(spec), boundary, g)
    report = check_grisvard(mesh, boundary, g)
    summary = [
        ("domain", spec.label),
        ("h", g.h),
        ("num_vertices", mesh.num_vertices),
        ("num_triangles", mesh.num_triangles),
        ("min_angle_deg", mesh.min_angle_deg()),
        ("max_diameter", float(mesh.diameters().max())),
        ("graded_size_ratio", report.max_ratio),
        ("graded_ok", report.passed),
    ]
    write_mesh_csv(out, mesh)
    write_summary_csv(out / "mesh_summary.csv", summary)
    if "png" in fmts:
        from .plots import plot_mesh

        plot_mesh(out / "mesh.png", mesh, boundary)
    for key, value in summary:
        print(f"{key}: {value}")
    return 0


def _run_pipeline(cfg, spec, g):
    from .config import source_for
    from .fem import solve_problem
    from .field import build_report

    source = source_for(cfg, spec)
    sol, _ = solve_problem(spec, source, g, mu=cfg.mu, tol=cfg.tol,
                           max_iter=cfg.max_iter)
    return sol, build_report(sol, spec, g)


def cmd_solve(cfg, out: Path, fmts: set[str]) -> int:
    from .config import domain_spec, grading_for
    from .export import (write_mesh_csv, write_report_csv,
                         write_solution_csv, write_vtk)

    spec = domain_spec(cfg)
    g = grading_for(cfg)
    sol, rep = _run_pipeline(cfg, spec, g)
    write_mesh_csv(out, sol.mesh)
    write_solution_csv(out / "solution.csv", sol)
    write_report_csv(out / "report.csv", [rep])
    if "vtk" in fmts:
        write_vtk(out / "solution.vtk", sol, title=spec.label)
    if "png" in fmts:
        from .plots import plot_field, plot_mesh

        boundary = spec.boundary()
        plot_mesh(out / "mesh.png", sol.mesh, boundary)
        plot_field(out / "field.png", sol, boundary)
    print(f"domain {rep.domain}: {sol.mesh.num_triangles} triangles, "
          f"{rep.cg_iterations} solver iterations")
    print(f"peak |B| = {rep.linf_b:.6g} at triangle {rep.linf_b_triangle}, "
          f"boundary length {rep.ell:.6g}")
    return 0


def cmd_table1(cfg, out: Path, fmts: set[str], max_n: int) -> int:
    from dataclasses import replace

    from .config import REFERENCE_PEAKS, domain_spec, grading_for, pinned_h
    from .export import write_report_csv, write_table_csv

    if not 0 <= max_n <= 5:
        from .errors import ConfigError

        raise ConfigError("table1 supports --max-n between 0 and 5 "
                          "(reference values stop at level 5)")
    reports = []
    reference = []
    for n in range(0, max_n + 1):
        if n == 0:
            row_cfg = replace(cfg, domain="circle", level=0)
        else:
            row_cfg = replace(cfg, domain="snowflake", level=n)
        spec = domain_spec(row_cfg)
        if cfg.h is None:
            row_cfg = replace(row_cfg,
                              h=pinned_h(row_cfg.domain, n, row_cfg.eta))
        g = grading_for(row_cfg)
        _, rep = _run_pipeline(row_cfg, spec, g)
        reports.append(rep)
        reference.append(REFERENCE_PEAKS.get(n))
        dev = "" if reference[-1] is None else (
            f"  dev {100.0 * (rep.linf_b - reference[-1]) / reference[-1]:+.2f}%")
        print(f"{rep.domain:12s} ell = {rep.ell:10.6f}  "
              f"|B|max = {rep.linf_b:8.3f}{dev}")
    write_table_csv(out / "table1.csv", reports, reference)
    write_report_csv(out / "report.csv", reports)
    if "png" in fmts:
        from .plots import plot_table

        plot_table(out / "table1.png", [r.domain for r in reports],
                   [r.ell for r in reports], [r.linf_b for r in reports],
                   reference)
    return 0


def cmd_convergence(cfg, out: Path, fmts: set[str], levels: int,
                    graded: bool) -> int:
    from .config import domain_spec, grading_for, source_for
    from .errors import ConfigError
    from .export import write_convergence_csv
    from .field import convergence_study

    if levels < 4:
        raise ConfigError("convergence needs --levels of at least 4")
    spec = domain_spec(cfg)
    g = grading_for(cfg)
    rec = convergence_study(spec, source_for(cfg, spec), g, levels=levels,
                            graded=graded, mu=cfg.mu, tol=cfg.tol)
    write_convergence_csv(out / "convergence.csv", rec)
    if "png" in fmts:
        from .plots import plot_convergence

        plot_convergence(out / "convergence.png", rec)
    mode = "graded" if graded else "uniform"
    print(f"domain {spec.label}, {mode} ladder, {levels} levels")
    for level, (h, e1, e2) in enumerate(zip(rec.h, rec.err_h1, rec.err_l2)):
        print(f"  level {level}: h = {h:.6g}  err_h1 = {e1:.6g}  "
              f"err_l2 = {e2:.6g}")
    print(f"observed orders: H1 {rec.order_h1:.3f}, L2 {rec.order_l2:.3f}")
    return 0


def cmd_mosco(cfg, out: Path, fmts: set[str], max_n: int) -> int:
    from .config import MOSCO_GRADING_H, source_for, domain_spec
    from .errors import ConfigError
    from .export import write_mosco_csv
    from .field import mosco_proxy
    from .mesh import GradingParams

    if not 3 <= max_n <= 7:
        raise ConfigError("mosco needs --max-n between 3 and 7")
    h = cfg.h if cfg.h is not None else MOSCO_GRADING_H
    g = GradingParams(h=h, eta=cfg.eta, sigma=cfg.sigma, cutoff=cfg.cutoff)
    levels = list(range(1, max_n + 1))
    from dataclasses import replace

    source = source_for(replace(cfg, domain="snowflake", level=1),
                        domain_spec(replace(cfg, domain="snowflake", level=1)))
    distances = mosco_proxy(levels, g, source=source, mu=cfg.mu, tol=cfg.tol)
    write_mosco_csv(out / "mosco.csv", levels, distances)
    if "png" in fmts:
        from .plots import plot_mosco

        plot_mosco(out / "mosco.png", levels, distances)
    for n, d in zip(levels, distances):
        print(f"  ||u_{n} - u_{n + 1}|| on level-{n} domain = {d:.6g}")
    decreasing = all(a > b for a, b in zip(distances, distances[1:]))
    print("sequence strictly decreasing" if decreasing
          else "warning: sequence not strictly decreasing")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error [config]: --threads must be at least 1",
                  file=sys.stderr)
            return 2
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)

    from .config import apply_overrides, load_config
    from .errors import ConfigError, KochfemError

    try:
        cfg = load_config(args.config)
        overrides = {}
        for key in ("domain", "level", "h"):
            if hasattr(args, key) and getattr(args, key) is not None:
                overrides[key] = getattr(args, key)
        cfg = apply_overrides(cfg, **overrides)
        out = Path(args.out) if args.out is not None else Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fmts = _formats(cfg)
        if args.command == "geometry":
            return cmd_geometry(cfg, out, fmts)
        if args.command == "mesh":
            return cmd_mesh(cfg, out, fmts)
        if args.command == "solve":
            return cmd_solve(cfg, out, fmts)
        if args.command == "table1":
            return cmd_table1(cfg, out, fmts, args.max_n)
        if args.command == "convergence":
            return cmd_convergence(cfg, out, fmts, args.levels, args.graded)
        return cmd_mosco(cfg, out, fmts, args.max_n)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    except KochfemError as exc:
        stage = {"GeometryError": "geometry", "MeshError": "mesh",
                 "SolverError": "solver"}.get(type(exc).__name__, "pipeline")
        print(f"error [{stage}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
