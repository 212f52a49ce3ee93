"""Univariate and tensor-product B-spline machinery.

Knot vectors are clamped (open): the first and last knot are repeated
``degree + 1`` times.  Basis functions are evaluated with the Cox-de Boor
recursion in the span-local form, vectorized over evaluation points.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DomainError

__all__ = [
    "KnotVector",
    "TensorKnotGrid",
    "BasisSpan",
    "find_span",
    "basis_derivatives",
    "eval_basis",
    "greville_abscissae",
    "uniform_insertion_knots",
    "insert_knots",
    "refine_uniform",
    "knot_grid_size",
    "sample_coordinates",
]


class KnotVector:
    """Clamped knot vector of a univariate B-spline basis.

    Parameters
    ----------
    degree : int
        Polynomial degree ``p`` (order ``p + 1``).
    knots : sequence of float
        Non-decreasing knots with end multiplicity exactly ``p + 1`` and
        interior multiplicity at most ``p``.
    """

    __slots__ = ("degree", "knots")

    def __init__(self, degree: int, knots: Iterable[float]):
        degree = int(degree)
        knots = np.array(knots, dtype=float)
        if degree < 0:
            raise ContractError("degree must be non-negative")
        if knots.ndim != 1 or knots.size < 2 * (degree + 1):
            raise ContractError("knot vector too short for the degree")
        if np.any(np.diff(knots) < 0):
            raise ContractError("knots must be non-decreasing")
        if not knots[0] < knots[-1]:
            raise ContractError("knot vector spans an empty domain")
        p1 = degree + 1
        if np.any(knots[:p1] != knots[0]) or np.any(knots[-p1:] != knots[-1]):
            raise ContractError("knot vector must be clamped at both ends")
        if knots[p1] == knots[0] or knots[-p1 - 1] == knots[-1]:
            raise ContractError("end knot multiplicity exceeds degree + 1")
        _, counts = np.unique(knots[p1:-p1], return_counts=True)
        if counts.size and counts.max() > degree:
            raise ContractError("interior knot multiplicity exceeds the degree")
        knots.setflags(write=False)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "knots", knots)

    def __setattr__(self, name, value):
        raise AttributeError("KnotVector is immutable")

    @classmethod
    def uniform(cls, degree: int, n_intervals: int, a: float = 0.0, b: float = 1.0):
        """Clamped knot vector with ``n_intervals`` equal knot spans on [a, b]."""
        inner = np.linspace(a, b, n_intervals + 1)[1:-1]
        return cls(degree, np.r_[[a] * (degree + 1), inner, [b] * (degree + 1)])

    @property
    def num_basis(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct knot values, including the domain ends."""
        return np.unique(self.knots)

    def interior_multiplicities(self) -> dict[float, int]:
        p1 = self.degree + 1
        vals, counts = np.unique(self.knots[p1:-p1], return_counts=True)
        return {float(v): int(c) for v, c in zip(vals, counts)}

    @property
    def continuity(self) -> int:
        """Global continuity order ``C^c`` of the spline space (``p - max mult``).

        A single-span knot vector gives polynomials, reported as ``C^p``.
        """
        mult = self.interior_multiplicities()
        return self.degree - max(mult.values(), default=0)

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))

    def __repr__(self):
        return f"KnotVector(degree={self.degree}, knots={self.knots.tolist()})"


@dataclass(frozen=True, eq=True)
class TensorKnotGrid:
    """Tensor product of one clamped knot vector per parametric direction."""

    vectors: tuple[KnotVector, ...]

    def __post_init__(self):
        vectors = tuple(self.vectors)
        if not 1 <= len(vectors) <= 3:
            raise ContractError("grid dimension must be 1, 2 or 3")
        if not all(isinstance(v, KnotVector) for v in vectors):
            raise ContractError("grid directions must be KnotVector instances")
        object.__setattr__(self, "vectors", vectors)

    @classmethod
    def of(cls, *vectors: KnotVector) -> "TensorKnotGrid":
        return cls(tuple(vectors))

    @property
    def dim(self) -> int:
        return len(self.vectors)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(v.degree for v in self.vectors)

    @property
    def shape(self) -> tuple[int, ...]:
        """Number of basis functions per direction."""
        return tuple(v.num_basis for v in self.vectors)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def domain(self) -> np.ndarray:
        """``(dim, 2)`` array of parameter-domain bounds."""
        return np.array([v.domain for v in self.vectors])


@dataclass(frozen=True)
class BasisSpan:
    """Nonzero basis functions at one parameter value.

    ``derivatives[k, j]`` is the ``k``-th derivative of basis function
    ``span - degree + j``; ``values`` aliases ``derivatives[0]``.
    """

    span: int
    derivatives: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.derivatives[0]

    @property
    def indices(self) -> np.ndarray:
        p = self.derivatives.shape[1] - 1
        return np.arange(self.span - p, self.span + 1)


def find_span(kv: KnotVector, u) -> np.ndarray:
    """Knot span index ``s`` with ``knots[s] <= u < knots[s+1]``.

    The right domain end maps to the last nonempty span (left limit).
    """
    u = np.asarray(u, dtype=float)
    a, b = kv.domain
    if np.any(u < a) or np.any(u > b) or np.any(np.isnan(u)):
        raise DomainError(f"parameter outside [{a}, {b}]")
    s = np.searchsorted(kv.knots, u, side="right") - 1
    return np.clip(s, kv.degree, kv.num_basis - 1)


def basis_derivatives(kv: KnotVector, u, order: int = 0):
    """Nonzero basis functions and their derivatives at many points.

    Returns
    -------
    spans : (m,) int array
    ders : (m, order + 1, degree + 1) array
        ``ders[i, k, j]`` is the ``k``-th derivative of basis function
        ``spans[i] - degree + j`` at ``u[i]``.  Derivatives above the degree
        are zero.
    """
    p = kv.degree
    t = kv.knots
    u = np.atleast_1d(np.asarray(u, dtype=float))
    spans = find_span(kv, u)
    m = u.size
    n = min(order, p)

    ndu = np.zeros((m, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = u - t[spans + 1 - j]
        right[:, j] = t[spans + j] - u
        saved = np.zeros(m)
        for r in range(j):
            # lower triangle holds knot differences, upper triangle basis values
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((m, order + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    for r in range(p + 1):
        s1, s2 = 0, 1
        a = np.zeros((m, 2, p + 1))
        a[:, 0, 0] = 1.0
        for k in range(1, n + 1):
            d = np.zeros(m)
            rk, pk = r - k, p - k
            if r >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, k] * ndu[:, r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    for k in range(1, n + 1):
        ders[:, k, :] *= factorial(p) / factorial(p - k)
    return spans, ders


def eval_basis(kv: KnotVector, u: float, deriv_order: int = 0) -> BasisSpan:
    """Evaluate the ``degree + 1`` nonzero basis functions at a single ``u``.

    Raises
    ------
    DomainError
        If ``u`` lies outside the knot-vector domain.
    ContractError
        If ``deriv_order`` exceeds the degree.
    """
    if deriv_order < 0 or deriv_order > kv.degree:
        raise ContractError("deriv_order must lie in [0, degree]")
    spans, ders = basis_derivatives(kv, [u], deriv_order)
    return BasisSpan(int(spans[0]), ders[0])


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    """Knot averages ``mean(knots[i+1 : i+degree+1])``, one per basis function."""
    p = kv.degree
    if p == 0:
        return 0.5 * (kv.knots[:-1] + kv.knots[1:])
    windows = np.lib.stride_tricks.sliding_window_view(kv.knots[1:-1], p)
    return windows.mean(axis=1)


def uniform_insertion_knots(kv: KnotVector, k: int) -> np.ndarray:
    """``k`` equally spaced new knots inside every nonempty knot span."""
    if k < 0:
        raise ContractError("refinement index must be non-negative")
    bp = kv.breakpoints
    frac = np.arange(1, k + 1) / (k + 1)
    return np.concatenate([a + (b - a) * frac for a, b in zip(bp[:-1], bp[1:])])


def insert_knots(kv: KnotVector, new_knots: Sequence[float], coefficients=None, axis: int = 0):
    """Insert knots one at a time (Boehm's algorithm).

    Parameters
    ----------
    kv : KnotVector
    new_knots : sequence of float
        Knots strictly inside the domain.
    coefficients : array_like, optional
        Control coefficients indexed along ``axis`` by basis function.  They
        are transformed so that the represented spline is unchanged.

    Returns
    -------
    KnotVector, or ``(KnotVector, ndarray)`` when coefficients are given.
    """
    p = kv.degree
    t = kv.knots.copy()
    c = None if coefficients is None else np.moveaxis(np.array(coefficients, dtype=float), axis, 0)
    a, b = kv.domain
    for ub in np.sort(np.asarray(new_knots, dtype=float)):
        if not a < ub < b:
            raise DomainError("inserted knots must lie strictly inside the domain")
        s = int(np.searchsorted(t, ub, side="right") - 1)
        if c is not None:
            n_old = c.shape[0]
            q = np.empty((n_old + 1,) + c.shape[1:])
            q[: s - p + 1] = c[: s - p + 1]
            q[s + 1 :] = c[s:]
            for i in range(s - p + 1, s + 1):
                alpha = (ub - t[i]) / (t[i + p] - t[i])
                q[i] = alpha * c[i] + (1.0 - alpha) * c[i - 1]
            c = q
        t = np.insert(t, s + 1, ub)
    out = KnotVector(p, t)
    if c is None:
        return out
    return out, np.moveaxis(c, 0, axis)


def refine_uniform(grid: TensorKnotGrid, k: int) -> TensorKnotGrid:
    """Insert ``k`` uniformly spaced simple knots into each knot span, per direction."""
    return TensorKnotGrid(tuple(insert_knots(v, uniform_insertion_knots(v, k)) for v in grid.vectors))


def knot_grid_size(grid: TensorKnotGrid) -> float:
    """Largest Euclidean diameter over all nonempty knot cells."""
    widths = [np.diff(v.breakpoints).max() for v in grid.vectors]
    return float(np.sqrt(np.sum(np.square(widths))))


def sample_coordinates(kv: KnotVector, per_interval: int) -> np.ndarray:
    """Sorted sample parameters: ``per_interval + 1`` equispaced points per span.

    Knots and the domain ends are always included.
    """
    if per_interval < 1:
        raise ContractError("need at least one sample per interval")
    bp = kv.breakpoints
    frac = np.arange(per_interval) / per_interval
    pts = (bp[:-1, None] + np.diff(bp)[:, None] * frac[None, :]).ravel()
    return np.r_[pts, bp[-1]]
