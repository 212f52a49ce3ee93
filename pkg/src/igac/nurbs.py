"""Rational (NURBS) scalar fields and geometry maps.

All evaluation happens on the parameter domain.  Derivatives of the rational
functions ``w_i B_i / W`` are formed pointwise with the quotient rule, and
physical derivatives follow from the chain rule through the geometry map.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import ContractError, DomainError, SingularGeometryError
from .splines import (
    KnotVector,
    TensorKnotGrid,
    basis_derivatives,
    greville_abscissae,
    insert_knots,
    uniform_insertion_knots,
)

__all__ = [
    "NurbsField",
    "GeometryMap",
    "PhysicalDerivatives",
    "RationalBasis",
    "GeometryTerms",
    "as_points",
    "iter_chunks",
    "rational_basis",
    "geometry_terms",
    "evaluate",
    "parametric_derivatives",
    "physical_derivatives",
    "eval_field",
    "eval_parametric_derivs",
    "physical_derivs",
    "load_geometry",
    "loads_geometry",
    "dumps_geometry",
]

DET_TOL = 1e-12
CHUNK = 4096


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _refine_homogeneous(grid, weights, coeffs, k):
    # insert into homogeneous coordinates (w*c, w) so the rational function is preserved
    hom = np.concatenate([coeffs * weights[..., None], weights[..., None]], axis=-1)
    vectors = []
    for axis, kv in enumerate(grid.vectors):
        kv, hom = insert_knots(kv, uniform_insertion_knots(kv, k), hom, axis=axis)
        vectors.append(kv)
    w = hom[..., -1]
    return TensorKnotGrid(tuple(vectors)), w, hom[..., :-1] / w[..., None]


class NurbsField:
    """Scalar NURBS function ``sum_i p_i w_i B_i / W`` on a tensor knot grid.

    Parameters
    ----------
    grid : TensorKnotGrid
    weights : array_like, shape ``grid.shape``
        Positive weights ``w_i``.
    coefficients : array_like, shape ``grid.shape``
        Control coefficients ``p_i``.
    """

    def __init__(self, grid: TensorKnotGrid, weights, coefficients):
        weights = _frozen(np.broadcast_to(weights, grid.shape))
        coefficients = _frozen(coefficients)
        if coefficients.size != grid.size:
            raise ContractError("coefficient count must equal the number of basis functions")
        coefficients = coefficients.reshape(grid.shape)
        coefficients.setflags(write=False)
        if not np.all(weights > 0):
            raise ContractError("weights must be positive")
        self.grid = grid
        self.weights = weights
        self.coefficients = coefficients

    @classmethod
    def constant(cls, grid, value, weights=1.0):
        return cls(grid, weights, np.full(grid.shape, float(value)))

    @property
    def degrees(self):
        return self.grid.degrees

    def with_coefficients(self, coefficients) -> "NurbsField":
        return NurbsField(self.grid, self.weights, np.reshape(coefficients, self.grid.shape))

    def refine(self, k: int) -> "NurbsField":
        """Uniform knot insertion that leaves the function unchanged."""
        grid, w, c = _refine_homogeneous(self.grid, self.weights, self.coefficients[..., None], k)
        return NurbsField(grid, w, c[..., 0])

    def __call__(self, points):
        return evaluate(self, points)


class GeometryMap:
    """Vector-valued NURBS map from the parameter domain onto the physical domain."""

    def __init__(self, grid: TensorKnotGrid, weights, control_points):
        cp = _frozen(control_points)
        if cp.shape != grid.shape + (grid.dim,):
            raise ContractError(f"control points must have shape {grid.shape + (grid.dim,)}")
        weights = _frozen(np.broadcast_to(weights, grid.shape))
        if not np.all(weights > 0):
            raise ContractError("weights must be positive")
        self.grid = grid
        self.weights = weights
        self.control_points = cp

    @classmethod
    def identity(cls, grid: TensorKnotGrid) -> "GeometryMap":
        """Map reproducing ``x = eta`` (Greville control points, unit weights)."""
        axes = [greville_abscissae(kv) for kv in grid.vectors]
        cp = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return cls(grid, 1.0, cp)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def component(self, c: int) -> NurbsField:
        return NurbsField(self.grid, self.weights, self.control_points[..., c])

    def refine(self, k: int) -> "GeometryMap":
        return GeometryMap(*_refine_homogeneous(self.grid, self.weights, self.control_points, k))

    def __call__(self, points) -> np.ndarray:
        rb = rational_basis(self.grid, self.weights, points, 0)
        return np.einsum("ms,msc->mc", rb.r0, self.control_points.reshape(-1, self.dim)[rb.index])


@dataclass(frozen=True)
class PhysicalDerivatives:
    value: float
    gradient: np.ndarray
    hessian: Optional[np.ndarray] = None

    @property
    def laplacian(self) -> float:
        if self.hessian is None:
            raise ContractError("second derivatives were not requested")
        return float(np.trace(self.hessian))


@dataclass
class RationalBasis:
    """Rational basis functions ``w_i B_i / W`` that are nonzero at each point.

    ``index[m, s]`` is the flat basis index of local function ``s`` at point
    ``m``; ``r1[m, s, a]`` and ``r2[m, s, a, b]`` hold parametric first and
    second derivatives.  ``W`` holds the weight function and its derivatives.
    """

    index: np.ndarray
    r0: np.ndarray
    r1: Optional[np.ndarray]
    r2: Optional[np.ndarray]
    W: np.ndarray
    W1: Optional[np.ndarray]
    W2: Optional[np.ndarray]


@dataclass
class GeometryTerms:
    """Pointwise geometry data for the chain rule.

    ``metric`` is ``J^-1 J^-T`` and ``curvature`` is ``J^-1 h`` with
    ``h_c = <d2F_c, metric>``; together they give the physical Laplacian
    ``<H_eta, metric> - grad_eta . curvature``.
    """

    x: np.ndarray
    jacobian: np.ndarray
    det: np.ndarray
    inv_jacobian: np.ndarray
    hessians: Optional[np.ndarray] = None
    metric: Optional[np.ndarray] = None
    curvature: Optional[np.ndarray] = None


def as_points(grid: TensorKnotGrid, points) -> np.ndarray:
    """Coerce to an ``(m, dim)`` array of parametric points inside the domain."""
    p = np.asarray(points, dtype=float)
    d = grid.dim
    if p.ndim == 0:
        p = p.reshape(1, 1)
    elif p.ndim == 1:
        p = p.reshape(-1, 1) if d == 1 else p.reshape(1, -1)
    if p.ndim != 2 or p.shape[1] != d:
        raise ContractError(f"points must have {d} coordinates")
    dom = grid.domain
    slack = 1e-12 * (1.0 + np.abs(dom).max())
    if np.any(p < dom[:, 0] - slack) or np.any(p > dom[:, 1] + slack) or np.any(np.isnan(p)):
        bad = p[np.any((p < dom[:, 0] - slack) | (p > dom[:, 1] + slack) | np.isnan(p), axis=1)][0]
        raise DomainError(f"point {bad.tolist()} outside the parameter domain")
    return np.clip(p, dom[:, 0], dom[:, 1])


def iter_chunks(m: int, size: int = CHUNK) -> Iterator[slice]:
    for start in range(0, m, size):
        yield slice(start, min(start + size, m))


def rational_basis(grid: TensorKnotGrid, weights, points, order: int = 2) -> RationalBasis:
    """Nonzero rational basis functions and parametric derivatives up to ``order``."""
    pts = as_points(grid, points)
    m, d = pts.shape
    weights = np.broadcast_to(np.asarray(weights, dtype=float), grid.shape).ravel()
    per = [basis_derivatives(kv, pts[:, j], order) for j, kv in enumerate(grid.vectors)]
    local = np.indices(tuple(p + 1 for p in grid.degrees)).reshape(d, -1)
    multi = tuple(per[j][0][:, None] - grid.degrees[j] + local[j][None, :] for j in range(d))
    index = np.ravel_multi_index(multi, grid.shape)
    w = weights[index]

    def wn(alpha):
        out = w.copy()
        for j in range(d):
            out *= per[j][1][:, alpha[j], :][:, local[j]]
        return out

    zero = (0,) * d
    wn0 = wn(zero)
    W = wn0.sum(axis=1)
    r0 = wn0 / W[:, None]
    r1 = r2 = W1 = W2 = None
    if order >= 1:
        unit = np.eye(d, dtype=int)
        wn1 = np.stack([wn(tuple(unit[a])) for a in range(d)], axis=-1)
        W1 = wn1.sum(axis=1)
        r1 = (wn1 - r0[..., None] * W1[:, None, :]) / W[:, None, None]
    if order >= 2:
        wn2 = np.empty((m, index.shape[1], d, d))
        for a in range(d):
            for b in range(a, d):
                wn2[..., a, b] = wn2[..., b, a] = wn(tuple(unit[a] + unit[b]))
        W2 = wn2.sum(axis=1)
        r2 = (
            wn2
            - r1[..., :, None] * W1[:, None, None, :]
            - r1[..., None, :] * W1[:, None, :, None]
            - r0[..., None, None] * W2[:, None, :, :]
        ) / W[:, None, None, None]
    return RationalBasis(index, r0, r1, r2, W, W1, W2)


def geometry_terms(geom: GeometryMap, points, order: int = 2, basis: RationalBasis = None) -> GeometryTerms:
    """Physical points, Jacobians and (for ``order == 2``) Laplacian chain-rule terms.

    Raises
    ------
    SingularGeometryError
        If ``|det J| < 1e-12`` at any point.
    """
    rb = basis if basis is not None else rational_basis(geom.grid, geom.weights, points, order)
    d = geom.dim
    P = geom.control_points.reshape(-1, d)[rb.index]
    x = np.einsum("ms,msc->mc", rb.r0, P)
    J = np.einsum("msa,msc->mca", rb.r1, P)
    det = np.linalg.det(J)
    bad = np.abs(det) < DET_TOL
    if np.any(bad):
        where = as_points(geom.grid, points)[np.argmax(bad)]
        raise SingularGeometryError(f"singular geometry Jacobian at {where.tolist()}")
    eye = np.broadcast_to(np.eye(d), J.shape)
    Jinv = np.linalg.solve(J, eye)
    terms = GeometryTerms(x, J, det, Jinv)
    if order >= 2:
        HF = np.einsum("msab,msc->mcab", rb.r2, P)
        G = Jinv @ np.swapaxes(Jinv, 1, 2)
        h = np.einsum("mcab,mab->mc", HF, G)
        terms.hessians = HF
        terms.metric = G
        terms.curvature = np.einsum("mac,mc->ma", Jinv, h)
    return terms


def _same_space(field: NurbsField, geom: GeometryMap) -> bool:
    return field.grid == geom.grid and np.array_equal(field.weights, geom.weights)


def evaluate(field: NurbsField, points) -> np.ndarray:
    """Field values ``P/W`` at an ``(m, dim)`` array of parametric points."""
    rb = rational_basis(field.grid, field.weights, points, 0)
    return np.einsum("ms,ms->m", rb.r0, field.coefficients.ravel()[rb.index])


def parametric_derivatives(field: NurbsField, points, order: int = 2, basis: RationalBasis = None):
    """Value, parametric gradient and Hessian of a field at many points.

    Returns ``(value, gradient, hessian)`` with shapes ``(m,)``, ``(m, d)``
    and ``(m, d, d)``; entries above ``order`` are ``None``.
    """
    rb = basis if basis is not None else rational_basis(field.grid, field.weights, points, order)
    c = field.coefficients.ravel()[rb.index]
    value = np.einsum("ms,ms->m", rb.r0, c)
    grad = np.einsum("msa,ms->ma", rb.r1, c) if order >= 1 else None
    hess = np.einsum("msab,ms->mab", rb.r2, c) if order >= 2 else None
    return value, grad, hess


def physical_derivatives(field: NurbsField, geom: GeometryMap, points, order: int = 2):
    """Value, physical gradient and physical Hessian at many points.

    The Hessian uses ``H_x = J^-T (H_eta - sum_c g_c d2F_c) J^-1``, obtained by
    linear solves with ``J^T`` rather than explicit inverse-map formulas.
    """
    if order < 1:
        raise ContractError("order must be 1 or 2")
    rb = rational_basis(field.grid, field.weights, points, order)
    gb = rb if _same_space(field, geom) else None
    gt = geometry_terms(geom, points, order, basis=gb)
    value, g_eta, h_eta = parametric_derivatives(field, points, order, basis=rb)
    JT = np.swapaxes(gt.jacobian, 1, 2)
    grad = np.linalg.solve(JT, g_eta[..., None])[..., 0]
    if order < 2:
        return value, grad, None
    A = h_eta - np.einsum("mc,mcab->mab", grad, gt.hessians)
    X = np.linalg.solve(JT, A)
    hess = np.swapaxes(np.linalg.solve(JT, np.swapaxes(X, 1, 2)), 1, 2)
    return value, grad, 0.5 * (hess + np.swapaxes(hess, 1, 2))


def _check_order(field: NurbsField, order: int):
    if order < 0 or order > 2:
        raise ContractError("derivative order must be 0, 1 or 2")
    if order > min(field.degrees):
        raise ContractError("derivative order exceeds the field degree")


def eval_field(field: NurbsField, eta) -> float:
    """Value of the field at a single parametric point."""
    return float(evaluate(field, [np.atleast_1d(eta)])[0])


def eval_parametric_derivs(field: NurbsField, eta, order: int = 2):
    """Single-point ``(value, gradient, hessian)`` in parametric coordinates."""
    _check_order(field, order)
    value, grad, hess = parametric_derivatives(field, [np.atleast_1d(eta)], order)
    return (
        float(value[0]),
        None if grad is None else grad[0],
        None if hess is None else hess[0],
    )


def physical_derivs(field: NurbsField, geom: GeometryMap, eta, order: int = 2) -> PhysicalDerivatives:
    """Single-point physical derivatives of a field through a geometry map."""
    _check_order(field, order)
    value, grad, hess = physical_derivatives(field, geom, [np.atleast_1d(eta)], max(order, 1))
    return PhysicalDerivatives(float(value[0]), grad[0], None if hess is None else hess[0])


# -- geometry text format -------------------------------------------------
#
#   dim <d>
#   knots <degree> <k0> <k1> ...     (one line per direction, in order)
#   cp <x_1> ... <x_d> <weight>      (control points, last index fastest)
#
# Blank lines and text after '#' are ignored.


def loads_geometry(text: str) -> GeometryMap:
    dim = None
    vectors, rows = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        key, vals = line[0], line[1:]
        try:
            if key == "dim":
                dim = int(vals[0])
            elif key == "knots":
                vectors.append(KnotVector(int(vals[0]), [float(v) for v in vals[1:]]))
            elif key == "cp":
                rows.append([float(v) for v in vals])
            else:
                raise ValueError(f"unknown keyword {key!r}")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"geometry line {lineno}: {exc}") from exc
    if dim is None or len(vectors) != dim:
        raise ValueError("geometry needs 'dim' and one 'knots' line per direction")
    grid = TensorKnotGrid(tuple(vectors))
    rows = np.array(rows, dtype=float)
    if rows.shape != (grid.size, dim + 1):
        raise ValueError(f"expected {grid.size} control points with {dim} coordinates and a weight")
    return GeometryMap(grid, rows[:, -1].reshape(grid.shape), rows[:, :-1].reshape(grid.shape + (dim,)))


def load_geometry(path) -> GeometryMap:
    with open(os.fspath(path), encoding="utf-8") as fh:
        return loads_geometry(fh.read())


def dumps_geometry(geom: GeometryMap) -> str:
    lines = [f"dim {geom.dim}"]
    for kv in geom.grid.vectors:
        lines.append("knots " + " ".join([str(kv.degree)] + [repr(float(t)) for t in kv.knots]))
    cp = geom.control_points.reshape(-1, geom.dim)
    for x, w in zip(cp, geom.weights.ravel()):
        lines.append("cp " + " ".join(repr(float(v)) for v in (*x, w)))
    return "\n".join(lines) + "\n"
