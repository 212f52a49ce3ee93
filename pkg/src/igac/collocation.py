"""Isogeometric collocation: point generation, assembly and dense LU solve."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import ContractError, SingularSystemError
from .nurbs import GeometryMap, NurbsField, rational_basis
from .problems import IDENTITY, BvpProblem, on_boundary, operator_basis_values
from .splines import TensorKnotGrid, greville_abscissae, knot_grid_size

__all__ = [
    "CollocationPoints",
    "CollocationSystem",
    "NumericalSolution",
    "Discretization",
    "discretize",
    "generate_collocation_points",
    "POINT_SCHEMES",
    "assemble",
    "factorize",
    "solve",
    "solve_problem",
]

PIVOT_TOL = 1e-13
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class CollocationPoints:
    """Collocation lattice split into interior and boundary points (flat C order)."""

    interior: np.ndarray
    boundary: np.ndarray

    @property
    def n(self) -> int:
        return len(self.interior) + len(self.boundary)

    @property
    def all(self) -> np.ndarray:
        return np.vstack([self.interior, self.boundary])


POINT_SCHEMES = ("greville", "uniform")


def generate_collocation_points(grid: TensorKnotGrid, scheme: str = "greville") -> CollocationPoints:
    """Tensor-product collocation lattice, one point per basis function.

    ``"greville"`` uses the Greville abscissae of each direction.
    ``"uniform"`` spaces the same number of points evenly over each
    parametric interval; it ignores the knot positions and is kept for
    comparison only. A point is a boundary point when any of its
    coordinates is a domain end.
    """
    if scheme == "greville":
        axes = [greville_abscissae(kv) for kv in grid.vectors]
    elif scheme == "uniform":
        axes = [np.linspace(*kv.domain, kv.num_basis) for kv in grid.vectors]
    else:
        raise ContractError(f"unknown collocation scheme {scheme!r}; expected one of {POINT_SCHEMES}")
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dim)
    mask = on_boundary(grid, pts)
    return CollocationPoints(pts[~mask], pts[mask])


@dataclass(frozen=True)
class Discretization:
    """Trial space at one refinement level: refined geometry plus a zero field."""

    k: int
    geometry: GeometryMap
    trial: NurbsField

    @property
    def grid(self) -> TensorKnotGrid:
        return self.trial.grid

    @property
    def rho(self) -> float:
        return knot_grid_size(self.grid)


def discretize(problem: BvpProblem, k: int) -> Discretization:
    """Refine the problem geometry uniformly by ``k`` and build the isoparametric trial space."""
    geom = problem.geometry.refine(k) if k else problem.geometry
    return Discretization(k, geom, NurbsField(geom.grid, geom.weights, np.zeros(geom.grid.shape)))


@dataclass(frozen=True)
class CollocationSystem:
    """Dense square collocation system; interior rows come first."""

    matrix: np.ndarray
    rhs: np.ndarray
    points: np.ndarray
    roles: np.ndarray
    trial: NurbsField
    n_interior: int


def _dense_rows(index, values, n):
    rows = np.zeros((index.shape[0], n))
    np.put_along_axis(rows, index, values, axis=1)
    return rows


def assemble(
    problem: BvpProblem,
    trial: NurbsField,
    pts: Optional[CollocationPoints] = None,
    geometry: Optional[GeometryMap] = None,
    source: Optional[Callable] = None,
    boundary: Optional[Callable] = None,
    row_scaling: str = "none",
) -> CollocationSystem:
    """Build the collocation system for ``problem`` in the space of ``trial``.

    Parameters
    ----------
    trial : NurbsField
        Supplies grid and weights; its coefficients are ignored.
    pts : CollocationPoints, optional
        Defaults to the Greville lattice of ``trial.grid``.
    geometry : GeometryMap, optional
        Geometry to differentiate through; defaults to ``problem.geometry``.
        Passing the refined geometry of a :class:`Discretization` lets the
        rational basis be shared between geometry and trial field.
    source, boundary : callable, optional
        Functions of *parametric* points overriding ``f(F(eta))`` and
        ``g(F(eta))``.
    row_scaling : {"none", "weight-power"}
        ``"weight-power"`` multiplies interior rows by ``W^(m+1)`` and
        boundary rows by ``W``, the polynomial form of the same system.
    """
    geom = geometry if geometry is not None else problem.geometry
    if pts is None:
        pts = generate_collocation_points(trial.grid)
    n = trial.grid.size
    if pts.n != n:
        raise ContractError(f"{pts.n} collocation points for {n} unknowns")
    blocks, rhs = [], []
    for role_pts, op, fn, default in (
        (pts.interior, problem.operator, source, problem.source_at),
        (pts.boundary, IDENTITY, boundary, problem.boundary_at),
    ):
        if len(role_pts) == 0:
            blocks.append(np.zeros((0, n)))
            rhs.append(np.zeros(0))
            continue
        index, vals = operator_basis_values(op, trial.grid, trial.weights, geom, role_pts)
        A = _dense_rows(index, vals, n)
        b = np.asarray((fn or default)(role_pts), dtype=float).reshape(-1)
        if row_scaling == "weight-power":
            W = rational_basis(trial.grid, trial.weights, role_pts, 0).W
            s = W ** (op.order + 1) if op is problem.operator else W
            A, b = A * s[:, None], b * s
        elif row_scaling != "none":
            raise ContractError(f"unknown row scaling {row_scaling!r}")
        blocks.append(A)
        rhs.append(b)
    roles = np.array(["interior"] * len(pts.interior) + ["boundary"] * len(pts.boundary))
    return CollocationSystem(np.vstack(blocks), np.concatenate(rhs), pts.all, roles, trial, len(pts.interior))


@dataclass(frozen=True)
class NumericalSolution:
    """Solved trial field ``T_r`` with solve diagnostics."""

    field: NurbsField
    rho: float
    n: int
    cond_est: float
    residual: float
    lu: tuple = dc_field(repr=False, compare=False, default=None)


def factorize(matrix: np.ndarray):
    """LU factorization with partial pivoting and a 1-norm condition estimate.

    Raises
    ------
    SingularSystemError
        If a pivot falls below ``1e-13 * max|entry|``.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError("collocation matrix must be square")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A)
    scale = np.abs(A).max()
    pivots = np.abs(np.diag(lu))
    if scale == 0 or pivots.min() < PIVOT_TOL * scale:
        raise SingularSystemError(
            f"collocation matrix is singular (smallest pivot {pivots.min():.3e}, max entry {scale:.3e})"
        )
    rcond, _ = lapack.dgecon(lu, np.abs(A).sum(axis=0).max(), norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    return (lu, piv), float(cond)


def solve(system: CollocationSystem, factorization=None) -> NumericalSolution:
    """Solve the collocation system; check the residual invariant."""
    if factorization is None:
        factorization = factorize(system.matrix)
    (lu, piv), cond = factorization
    coeffs = sla.lu_solve((lu, piv), system.rhs)
    res = np.abs(system.matrix @ coeffs - system.rhs).max() if system.rhs.size else 0.0
    bound = RESIDUAL_TOL * (1.0 + np.abs(system.rhs).max(initial=0.0))
    if not res <= bound:
        raise SingularSystemError(f"collocation residual {res:.3e} exceeds {bound:.3e}")
    field = system.trial.with_coefficients(coeffs)
    return NumericalSolution(field, knot_grid_size(field.grid), field.grid.size, cond, float(res), (lu, piv))


def solve_problem(problem: BvpProblem, k: int, scheme: str = "greville", **kwargs):
    """Discretize at refinement ``k``, assemble and solve.

    Extra keyword arguments go to :func:`assemble`.
    Returns ``(solution, discretization, system)``.
    """
    disc = discretize(problem, k)
    pts = generate_collocation_points(disc.grid, scheme)
    system = assemble(problem, disc.trial, pts, geometry=disc.geometry, **kwargs)
    return solve(system), disc, system
