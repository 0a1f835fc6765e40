"""Piecewise-linear Galerkin discretization of the potential equation.

Assembles -div((1/mu) grad u) = J with homogeneous Dirichlet data into a
symmetric positive-definite system over the interior vertices (boundary
rows are eliminated, not penalized) and solves it with diagonally
preconditioned conjugate gradients.  Stiffness entries come from the exact
edge-vector formula; load vectors use a degree-5 seven-point rule, enough to
keep quadrature error of the moderately wide Gaussian source below the
discretization error on every mesh this package produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import MeshError, SolverError
from .geometry import DomainSpec, Point2
from .mesh import GradingParams, TriMesh, base_lattice_mesh, polygon_base_mesh, refine_to_size

__all__ = [
    "SourceField",
    "SparseSystem",
    "CgResult",
    "FemSolution",
    "QUAD_BARY",
    "QUAD_WEIGHTS",
    "local_stiffness",
    "local_load",
    "assemble",
    "cg_solve",
    "solve_problem",
    "energy",
]

_S15 = math.sqrt(15.0)
_B1 = (6.0 + _S15) / 21.0
_B2 = (6.0 - _S15) / 21.0

#: Degree-5 symmetric triangle rule: barycentric nodes and unit-sum weights.
QUAD_BARY = np.array([
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [1.0 - 2.0 * _B1, _B1, _B1],
    [_B1, 1.0 - 2.0 * _B1, _B1],
    [_B1, _B1, 1.0 - 2.0 * _B1],
    [1.0 - 2.0 * _B2, _B2, _B2],
    [_B2, 1.0 - 2.0 * _B2, _B2],
    [_B2, _B2, 1.0 - 2.0 * _B2],
])
QUAD_WEIGHTS = np.array([9.0 / 40.0] + [(155.0 + _S15) / 1200.0] * 3
                        + [(155.0 - _S15) / 1200.0] * 3)


@dataclass(frozen=True)
class SourceField:
    """Closed-form source density J with its defining metadata.

    evaluate maps an (N, 2) coordinate array to N values.  amplitude, width
    and center describe the Gaussian variant; a source wrapped from a bare
    callable carries None there.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    amplitude: float | None = None
    width: float | None = None
    center: Point2 | None = None

    @classmethod
    def gaussian(cls, center, amplitude: float = 1.0e5,
                 width: float = 5.0) -> "SourceField":
        """amplitude * exp(-width * |x - center|^2), the driving current."""
        cx, cy = float(center[0]), float(center[1])

        def evaluate(points: np.ndarray) -> np.ndarray:
            p = np.asarray(points, dtype=float)
            return amplitude * np.exp(
                -width * ((p[:, 0] - cx) ** 2 + (p[:, 1] - cy) ** 2))

        return cls(evaluate=evaluate, amplitude=amplitude, width=width,
                   center=Point2(cx, cy))

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray]) -> "SourceField":
        return cls(evaluate=fn)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(points)


@dataclass(frozen=True)
class SparseSystem:
    """Symmetric positive-definite matrix in compressed sparse row layout.

    dim is the number of interior vertices; indptr/indices/data are the
    usual CSR triple with no explicitly stored zeros.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    dim: int

    def __post_init__(self):
        for name in ("indptr", "indices", "data"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_csr(cls, a: sp.csr_matrix) -> "SparseSystem":
        a = a.tocsr()
        a.sum_duplicates()
        a.eliminate_zeros()
        return cls(indptr=a.indptr, indices=a.indices, data=a.data,
                   dim=a.shape[0])

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr),
                             shape=(self.dim, self.dim))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._csr @ x

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()


@dataclass(frozen=True)
class CgResult:
    """Conjugate-gradient outcome: iterate, count, and residual trace."""

    x: np.ndarray
    iterations: int
    relative_residual: float
    residual_history: np.ndarray


@dataclass(frozen=True)
class FemSolution:
    """Nodal solution with its mesh and solver metadata.

    u holds one value per mesh vertex; boundary vertices are exactly zero.
    """

    mesh: TriMesh
    u: np.ndarray
    iterations: int
    relative_residual: float
    mu: float

    def __post_init__(self):
        u = np.ascontiguousarray(np.asarray(self.u, dtype=float))
        u.flags.writeable = False
        object.__setattr__(self, "u", u)


def local_stiffness(coords: np.ndarray) -> np.ndarray:
    """Element stiffness for unit permeability: K_ij = e_i . e_j / (4 area).

    e_i is the edge opposite vertex i.  Rows and columns sum to zero and the
    matrix is symmetric positive semidefinite with the constants as kernel.
    """
    c = np.asarray(coords, dtype=float)
    e = np.empty((3, 2))
    for i in range(3):
        e[i] = c[(i + 2) % 3] - c[(i + 1) % 3]
    area = 0.5 * (e[2][0] * (-e[1][1]) - e[2][1] * (-e[1][0]))
    if not area > 1e-14 * max(np.abs(e).max(), 1e-300) ** 2:
        raise MeshError(f"degenerate triangle (area {area:.3e})")
    return (e @ e.T) / (4.0 * area)


def local_load(coords: np.ndarray, source: SourceField) -> np.ndarray:
    """Load vector (J, phi_i) over one triangle by the seven-point rule."""
    c = np.asarray(coords, dtype=float)
    pts = QUAD_BARY @ c
    vals = source(pts)
    area = 0.5 * abs((c[1, 0] - c[0, 0]) * (c[2, 1] - c[0, 1])
                     - (c[1, 1] - c[0, 1]) * (c[2, 0] - c[0, 0]))
    return area * ((QUAD_WEIGHTS * vals) @ QUAD_BARY)


def _batch_stiffness(coords: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """Vectorized edge-vector stiffness for all triangles, shape (m, 3, 3)."""
    e = np.empty_like(coords)
    for i in range(3):
        e[:, i] = coords[:, (i + 2) % 3] - coords[:, (i + 1) % 3]
    k = np.einsum("tid,tjd->tij", e, e)
    return k / (4.0 * areas)[:, None, None]


def assemble(m: TriMesh, source: SourceField,
             mu: float = 1.0) -> tuple[SparseSystem, np.ndarray]:
    """Global interior-vertex system (stiffness/mu, load) for mesh m.

    Boundary vertices are eliminated up front: with homogeneous data they
    contribute nothing, so the reduced system stays symmetric positive
    definite.  Interior degrees of freedom are numbered by increasing vertex
    index; element contributions are summed in canonical CSR order, which
    makes the result bitwise reproducible.
    """
    if not mu > 0.0:
        raise SolverError("permeability mu must be positive")
    interior = ~m.boundary_vertex
    ni = int(interior.sum())
    if ni == 0:
        raise MeshError("mesh has no interior vertices; nothing to solve for")
    dof = np.cumsum(interior) - 1

    coords = m.tri_coords()
    areas = m.areas()
    if not (areas > 1e-16).all():
        raise MeshError("assembly requires strictly positive triangle areas")
    k_local = _batch_stiffness(coords, areas) / mu

    tris = m.triangles
    rows = tris[:, [0, 0, 0, 1, 1, 1, 2, 2, 2]].ravel()
    cols = tris[:, [0, 1, 2, 0, 1, 2, 0, 1, 2]].ravel()
    vals = k_local.reshape(-1)
    keep = interior[rows] & interior[cols]
    mat = sp.coo_matrix(
        (vals[keep], (dof[rows[keep]], dof[cols[keep]])),
        shape=(ni, ni)).tocsr()

    qpts = np.einsum("qi,tid->tqd", QUAD_BARY, coords)
    jvals = source(qpts.reshape(-1, 2)).reshape(len(tris), -1)
    load_local = areas[:, None] * (jvals @ (QUAD_WEIGHTS[:, None] * QUAD_BARY))
    rhs = np.zeros(ni)
    flat = tris.ravel()
    node_keep = interior[flat]
    np.add.at(rhs, dof[flat[node_keep]], load_local.reshape(-1)[node_keep])

    return SparseSystem.from_csr(mat), rhs


def cg_solve(a: SparseSystem, b: np.ndarray, tol: float = 1e-10,
             max_iter: int | None = None) -> CgResult:
    """Jacobi-preconditioned conjugate gradients to a relative residual.

    Deterministic: fixed operation order, no randomness.  Nonpositive
    curvature aborts immediately since it means the matrix is not positive
    definite, which for this package always indicates an assembly bug.
    """
    b = np.asarray(b, dtype=float)
    if max_iter is None:
        max_iter = max(10_000, int(math.ceil(50.0 * math.sqrt(a.dim))))
    diag = a.diagonal()
    if not (diag > 0.0).all():
        raise SolverError("system diagonal has nonpositive entries")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CgResult(x=np.zeros_like(b), iterations=0,
                        relative_residual=0.0, residual_history=np.zeros(0))

    x = np.zeros_like(b)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    history = []
    for k in range(1, max_iter + 1):
        ap = a.matvec(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            raise SolverError(
                f"nonpositive curvature at iteration {k} (p'Ap = {pap:.3e})",
                residual_history=np.asarray(history))
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rel = float(np.linalg.norm(r)) / bnorm
        history.append(rel)
        if rel <= tol:
            return CgResult(x=x, iterations=k, relative_residual=rel,
                            residual_history=np.asarray(history))
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"conjugate gradients did not reach tolerance {tol:g} in "
        f"{max_iter} iterations (last residual {history[-1]:.3e})",
        residual_history=np.asarray(history))


def base_mesh_for(spec: DomainSpec) -> TriMesh:
    """Level-appropriate base triangulation for a domain description."""
    boundary = spec.boundary()
    if spec.kind == "snowflake":
        return base_lattice_mesh(boundary)
    return polygon_base_mesh(boundary)


def solve_problem(spec: DomainSpec, source: SourceField, g: GradingParams,
                  mu: float = 1.0, tol: float = 1e-10,
                  max_iter: int | None = None,
                  ) -> tuple[FemSolution, list[TriMesh]]:
    """Full pipeline: boundary, base mesh, graded refinement, assemble, solve.

    Returns the solution on the refined mesh together with the two-level
    hierarchy [base, refined]; the refined mesh's parent_triangle points into
    the base mesh, and base vertices come first in its vertex array.
    """
    boundary = spec.boundary()
    if spec.kind == "snowflake":
        base = base_lattice_mesh(boundary)
    else:
        base = polygon_base_mesh(boundary)
    refined = refine_to_size(base, boundary, g)
    system, rhs = assemble(refined, source, mu)
    result = cg_solve(system, rhs, tol=tol, max_iter=max_iter)
    u = np.zeros(refined.num_vertices)
    u[~refined.boundary_vertex] = result.x
    solution = FemSolution(mesh=refined, u=u, iterations=result.iterations,
                           relative_residual=result.relative_residual, mu=mu)
    return solution, [base, refined]


def energy(sol: FemSolution) -> float:
    """Dirichlet energy (1/mu) * int |grad u_h|^2, via element stiffness."""
    k = _batch_stiffness(sol.mesh.tri_coords(), sol.mesh.areas()) / sol.mu
    uv = sol.u[sol.mesh.triangles]
    return float(np.einsum("ti,tij,tj->", uv, k, uv))
