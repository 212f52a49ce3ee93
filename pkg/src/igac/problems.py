"""Boundary-value problem definitions and the built-in problem registry.

A problem couples a geometry map with a differential operator, a source
``f`` and Dirichlet data ``g`` (both functions of physical coordinates), and
an exact solution used for error measurement and self-checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Callable, Optional

import numpy as np

from .errors import ContractError
from .nurbs import (
    GeometryMap,
    NurbsField,
    as_points,
    evaluate,
    geometry_terms,
    loads_geometry,
    rational_basis,
)
from .splines import KnotVector, TensorKnotGrid

__all__ = [
    "OperatorSpec",
    "IDENTITY",
    "FIRST_DERIVATIVE",
    "MINUS_LAPLACIAN_PLUS_IDENTITY",
    "BvpProblem",
    "BUILTIN_PROBLEMS",
    "builtin_problem",
    "intro_1d",
    "source_1d",
    "annulus_2d",
    "cube_3d",
    "operator_values",
    "operator_basis_values",
    "apply_operator",
    "apply_boundary",
    "on_boundary",
]

TWO_PI = 2.0 * np.pi

_ORDERS = {"identity": 0, "first-derivative": 1, "minus-laplacian-plus-identity": 2}


@dataclass(frozen=True)
class OperatorSpec:
    """Differential operator acting on physical coordinates.

    ``kind`` is one of ``"first-derivative"`` (1D only),
    ``"minus-laplacian-plus-identity"`` or ``"identity"`` (used by the norm
    estimators as a reference operator).
    """

    kind: str

    def __post_init__(self):
        if self.kind not in _ORDERS:
            raise ContractError(f"unknown operator kind {self.kind!r}")

    @property
    def order(self) -> int:
        """Highest derivative order ``m`` used by the operator."""
        return _ORDERS[self.kind]

    def _apply(self, r0, r1, r2, gt):
        # r0 (m,S), r1 (m,S,d), r2 (m,S,d,d): rational functions and parametric derivatives
        if self.kind == "identity":
            return r0
        if self.kind == "first-derivative":
            if gt.jacobian.shape[1] != 1:
                raise ContractError("first-derivative operator is one-dimensional")
            return r1[..., 0] / gt.jacobian[:, None, 0, 0]
        lap = np.einsum("msab,mab->ms", r2, gt.metric) - np.einsum("msa,ma->ms", r1, gt.curvature)
        return r0 - lap


IDENTITY = OperatorSpec("identity")
FIRST_DERIVATIVE = OperatorSpec("first-derivative")
MINUS_LAPLACIAN_PLUS_IDENTITY = OperatorSpec("minus-laplacian-plus-identity")


def operator_basis_values(operator: OperatorSpec, grid: TensorKnotGrid, weights, geom: GeometryMap, points):
    """Operator applied to every rational basis function that is nonzero at each point.

    Returns ``(index, values)``, both ``(m, S)``: ``values[m, s]`` is
    ``D(w_i B_i / W)`` at point ``m`` for flat basis index ``i = index[m, s]``.
    """
    order = operator.order
    rb = rational_basis(grid, weights, points, order)
    shared = geom.grid == grid and np.array_equal(geom.weights, np.broadcast_to(weights, grid.shape))
    if order == 0:
        return rb.index, rb.r0
    gb = rb if shared else None
    gt = geometry_terms(geom, points, order, basis=gb)
    return rb.index, operator._apply(rb.r0, rb.r1, rb.r2, gt)


def operator_values(operator: OperatorSpec, field: NurbsField, geom: GeometryMap, points) -> np.ndarray:
    """``D T_r`` at an ``(m, dim)`` array of parametric points."""
    index, vals = operator_basis_values(operator, field.grid, field.weights, geom, points)
    return np.einsum("ms,ms->m", vals, field.coefficients.ravel()[index])


@dataclass(frozen=True)
class BvpProblem:
    """Dirichlet boundary-value problem ``D T = f`` in the domain, ``T = g`` on its boundary.

    All callables take an ``(m, dim)`` array of physical points.  ``exact_laplacian``
    is needed for the self-check of second-order problems, and
    ``exact_derivative(x, k)`` (1D only) supplies ``T^(k)`` for rate bounds.
    """

    name: str
    geometry: GeometryMap
    operator: OperatorSpec
    source: Callable[[np.ndarray], np.ndarray]
    boundary: Callable[[np.ndarray], np.ndarray]
    exact: Callable[[np.ndarray], np.ndarray]
    exact_gradient: Callable[[np.ndarray], np.ndarray]
    exact_laplacian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    exact_derivative: Optional[Callable[[np.ndarray, int], np.ndarray]] = None

    @property
    def dim(self) -> int:
        return self.geometry.dim

    def source_at(self, eta) -> np.ndarray:
        """Source composed with the geometry, ``f(F(eta))``."""
        return self.source(self.geometry(eta))

    def boundary_at(self, eta) -> np.ndarray:
        return self.boundary(self.geometry(eta))

    def exact_at(self, eta) -> np.ndarray:
        return self.exact(self.geometry(eta))

    def exact_operator(self, x) -> np.ndarray:
        """``D T`` of the exact solution, from its closed-form derivatives."""
        kind = self.operator.kind
        if kind == "identity":
            return self.exact(x)
        if kind == "first-derivative":
            return self.exact_gradient(x)[:, 0]
        if self.exact_laplacian is None:
            raise ContractError("problem has no exact Laplacian")
        return self.exact(x) - self.exact_laplacian(x)

    def self_check(self, n: int = 100, seed: int = 0) -> tuple[float, float]:
        """Relative PDE residual and boundary mismatch of the exact solution.

        Samples ``n`` random interior and ``n`` random boundary points.
        """
        rng = np.random.default_rng(seed)
        dom = self.geometry.grid.domain
        eta = dom[:, 0] + (dom[:, 1] - dom[:, 0]) * rng.random((n, self.dim))
        x = self.geometry(eta)
        f = self.source(x)
        pde = np.abs(self.exact_operator(x) - f).max() / max(1.0, np.abs(f).max())
        face = rng.integers(0, self.dim, n)
        side = rng.integers(0, 2, n)
        eta[np.arange(n), face] = dom[face, side]
        xb = self.geometry(eta)
        bc = np.abs(self.boundary(xb) - self.exact(xb)).max()
        return float(pde), float(bc)


# -- built-in problems ----------------------------------------------------


def _affine_1d(a: float, b: float) -> GeometryMap:
    kv = KnotVector(3, [0, 0, 0, 0, 1, 1, 1, 1])
    cp = a + (b - a) * np.array([0, 1 / 3, 2 / 3, 1])
    return GeometryMap(TensorKnotGrid.of(kv), 1.0, cp[:, None])


def intro_1d(a: float = 0.0, b: float = 2.0, exact=None, exact_gradient=None) -> BvpProblem:
    """First-order problem ``T' = f`` on ``[a, b]`` with both end values imposed.

    The default exact solution is ``sin(pi x)``.  Custom solutions are passed
    as vectorized callables of ``x`` (shape ``(m,)``); ``f`` and ``g`` follow
    from them, so the end data are always consistent.
    """
    if exact is None:
        exact = lambda s: np.sin(np.pi * s)  # noqa: E731
        exact_gradient = lambda s: np.pi * np.cos(np.pi * s)  # noqa: E731
        derivative = lambda s, k: np.pi**k * np.sin(np.pi * s + k * np.pi / 2)  # noqa: E731
    else:
        if exact_gradient is None:
            raise ContractError("a custom exact solution needs its derivative")
        derivative = None
    T = lambda x: np.asarray(exact(x[:, 0]), dtype=float) * np.ones(len(x))  # noqa: E731
    dT = lambda x: np.asarray(exact_gradient(x[:, 0]), dtype=float)[..., None] * np.ones((len(x), 1))  # noqa: E731
    return BvpProblem(
        name="intro-1d",
        geometry=_affine_1d(a, b),
        operator=FIRST_DERIVATIVE,
        source=lambda x: dT(x)[:, 0],
        boundary=T,
        exact=T,
        exact_gradient=dT,
        exact_derivative=None if derivative is None else (lambda x, k: derivative(x[:, 0], k)),
    )


def source_1d() -> BvpProblem:
    """``-T'' + T = (1 + 4 pi^2) sin(2 pi x)`` on [0, 1], ``T = sin(2 pi x)``."""
    T = lambda x: np.sin(TWO_PI * x[:, 0])  # noqa: E731
    return BvpProblem(
        name="source-1d",
        geometry=_affine_1d(0.0, 1.0),
        operator=MINUS_LAPLACIAN_PLUS_IDENTITY,
        source=lambda x: (1 + TWO_PI**2) * np.sin(TWO_PI * x[:, 0]),
        boundary=lambda x: np.zeros(len(x)),
        exact=T,
        exact_gradient=lambda x: TWO_PI * np.cos(TWO_PI * x),
        exact_laplacian=lambda x: -(TWO_PI**2) * T(x),
        exact_derivative=lambda x, k: TWO_PI**k * np.sin(TWO_PI * x[:, 0] + k * np.pi / 2),
    )


def _annulus_geometry() -> GeometryMap:
    text = resources.files("igac").joinpath("data/quarter_annulus.txt").read_text(encoding="utf-8")
    return loads_geometry(text)


def annulus_2d() -> BvpProblem:
    """``-Lap T + T = f`` on the quarter annulus ``1 <= r <= 4``, ``T = 0`` on the boundary.

    ``T = (r^2 - 1)(r^2 - 16) sin x sin y``; ``f`` is the closed form
    ``-Lap T + T``.
    """

    def T(x):
        s = x[:, 0] ** 2 + x[:, 1] ** 2
        return (s - 1) * (s - 16) * np.sin(x[:, 0]) * np.sin(x[:, 1])

    def grad(x):
        X, Y = x[:, 0], x[:, 1]
        s = X**2 + Y**2
        A, dA = (s - 1) * (s - 16), 2 * s - 17
        return np.stack(
            [
                2 * X * dA * np.sin(X) * np.sin(Y) + A * np.cos(X) * np.sin(Y),
                2 * Y * dA * np.sin(X) * np.sin(Y) + A * np.sin(X) * np.cos(Y),
            ],
            axis=1,
        )

    def lap(x):
        X, Y = x[:, 0], x[:, 1]
        s = X**2 + Y**2
        A, dA = (s - 1) * (s - 16), 2 * s - 17
        sxsy = np.sin(X) * np.sin(Y)
        cross = 4 * dA * (X * np.cos(X) * np.sin(Y) + Y * np.sin(X) * np.cos(Y))
        return (16 * s - 68) * sxsy + cross - 2 * A * sxsy

    def f(x):
        X, Y = x[:, 0], x[:, 1]
        return (
            (3 * X**4 - 67 * X**2 - 67 * Y**2 + 3 * Y**4 + 6 * X**2 * Y**2 + 116) * np.sin(X) * np.sin(Y)
            + (68 * X - 8 * X**3 - 8 * X * Y**2) * np.cos(X) * np.sin(Y)
            + (68 * Y - 8 * Y**3 - 8 * Y * X**2) * np.cos(Y) * np.sin(X)
        )

    return BvpProblem(
        name="annulus-2d",
        geometry=_annulus_geometry(),
        operator=MINUS_LAPLACIAN_PLUS_IDENTITY,
        source=f,
        boundary=lambda x: np.zeros(len(x)),
        exact=T,
        exact_gradient=grad,
        exact_laplacian=lap,
    )


def cube_3d() -> BvpProblem:
    """``-Lap T + T = (1 + 12 pi^2) T`` on the unit cube, ``T = prod sin(2 pi x_i)``."""
    T = lambda x: np.prod(np.sin(TWO_PI * x), axis=1)  # noqa: E731

    def grad(x):
        s, c = np.sin(TWO_PI * x), np.cos(TWO_PI * x)
        return TWO_PI * np.stack(
            [c[:, 0] * s[:, 1] * s[:, 2], s[:, 0] * c[:, 1] * s[:, 2], s[:, 0] * s[:, 1] * c[:, 2]], axis=1
        )

    kv = KnotVector(3, [0, 0, 0, 0, 1, 1, 1, 1])
    i = np.arange(4) / 3
    cp = np.stack(np.meshgrid(i, i, i, indexing="ij"), axis=-1)
    return BvpProblem(
        name="cube-3d",
        geometry=GeometryMap(TensorKnotGrid.of(kv, kv, kv), 1.0, cp),
        operator=MINUS_LAPLACIAN_PLUS_IDENTITY,
        source=lambda x: (1 + 3 * TWO_PI**2) * T(x),
        boundary=lambda x: np.zeros(len(x)),
        exact=T,
        exact_gradient=grad,
        exact_laplacian=lambda x: -3 * TWO_PI**2 * T(x),
    )


_REGISTRY = {
    "intro-1d": intro_1d,
    "source-1d": source_1d,
    "annulus-2d": annulus_2d,
    "cube-3d": cube_3d,
}

BUILTIN_PROBLEMS = tuple(_REGISTRY)


def builtin_problem(name: str) -> BvpProblem:
    """Look up a built-in problem by name.

    Raises
    ------
    KeyError
        For unknown names.
    """
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {', '.join(BUILTIN_PROBLEMS)}") from None
    return factory()


def apply_operator(problem: BvpProblem, field: NurbsField, eta) -> float:
    """``D T_r`` at one parametric point, in physical coordinates."""
    return float(operator_values(problem.operator, field, problem.geometry, [np.atleast_1d(eta)])[0])


def on_boundary(grid: TensorKnotGrid, points) -> np.ndarray:
    """Mask of points with at least one coordinate on a domain end."""
    pts = as_points(grid, points)
    dom = grid.domain
    return np.any((pts == dom[:, 0]) | (pts == dom[:, 1]), axis=1)


def apply_boundary(problem: BvpProblem, field: NurbsField, eta) -> float:
    """Dirichlet trace ``T_r(eta)`` at a point of the parametric boundary."""
    pt = np.atleast_1d(np.asarray(eta, dtype=float))[None, :]
    if not on_boundary(field.grid, pt)[0]:
        raise ContractError(f"point {pt[0].tolist()} is not on the parametric boundary")
    return float(evaluate(field, pt)[0])
