"""Finite-element magnetostatics on pre-fractal snowflake domains.

Submodules are imported lazily so the command-line front end can cap BLAS
thread pools before any numerical library loads.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_HOME = {
    "KochfemError": "errors", "GeometryError": "errors", "MeshError": "errors",
    "SolverError": "errors", "ConfigError": "errors",
    "Point2": "geometry", "PrefractalBoundary": "geometry",
    "DomainSpec": "geometry", "TRIANGLE_CENTROID": "geometry",
    "koch_subdivide": "geometry", "build_snowflake": "geometry",
    "classify_corners": "geometry", "interior_angles": "geometry",
    "boundary_length": "geometry", "polygon_area": "geometry",
    "distance_to_reentrant": "geometry", "distances_to_reentrant": "geometry",
    "point_in_polygon": "geometry", "points_in_polygon": "geometry",
    "circle_polygon": "geometry", "square_polygon": "geometry",
    "TriMesh": "mesh", "GradingParams": "mesh", "GradingReport": "mesh",
    "base_lattice_mesh": "mesh", "polygon_base_mesh": "mesh",
    "grisvard_target_size": "mesh", "target_sizes": "mesh",
    "refine_to_size": "mesh", "check_grisvard": "mesh",
    "uniform_refine": "mesh", "edge_table": "mesh", "MIN_ANGLE_DEG": "mesh",
    "SourceField": "fem", "SparseSystem": "fem", "CgResult": "fem",
    "FemSolution": "fem", "local_stiffness": "fem", "local_load": "fem",
    "assemble": "fem", "cg_solve": "fem", "solve_problem": "fem",
    "energy": "fem",
    "FieldReport": "field", "ConvergenceRecord": "field", "LinfB": "field",
    "element_gradients": "field", "element_gradient": "field",
    "b_field": "field", "linf_b": "field", "solution_norms": "field",
    "prolong": "field", "h1_l2_error": "field", "observed_order": "field",
    "convergence_study": "field", "mosco_proxy": "field",
    "l2_domain_distance": "field", "build_report": "field",
    "RunConfig": "config", "load_config": "config", "pinned_grading": "config",
    "MU_VACUUM": "config",
}

__all__ = sorted(_HOME) + ["__version__"]


def __getattr__(name: str):
    try:
        module = _HOME[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    return getattr(importlib.import_module(f".{module}", __name__), name)


def __dir__():
    return __all__
