import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.interpolate import BSpline

from conftest import knot_vectors
from igac.errors import ContractError, DomainError
from igac.splines import (
    KnotVector,
    TensorKnotGrid,
    basis_derivatives,
    eval_basis,
    find_span,
    greville_abscissae,
    insert_knots,
    knot_grid_size,
    refine_uniform,
    sample_coordinates,
)


def scipy_basis(kv, u, nu=0):
    """Dense (m, n) basis matrix from scipy, used as an independent oracle."""
    n = kv.num_basis
    out = np.empty((len(u), n))
    for i in range(n):
        c = np.zeros(n)
        c[i] = 1.0
        out[:, i] = BSpline(kv.knots, c, kv.degree, extrapolate=False)(u, nu=nu)
    return out


def dense_from_local(kv, u, order):
    spans, ders = basis_derivatives(kv, u, order)
    out = np.zeros((order + 1, len(u), kv.num_basis))
    for k in range(order + 1):
        idx = spans[:, None] - kv.degree + np.arange(kv.degree + 1)
        np.put_along_axis(out[k], idx, ders[:, k, :], axis=1)
    return out


class TestKnotVector:
    def test_clamped_ends_required(self):
        with pytest.raises(ContractError):
            KnotVector(3, [0, 0, 0, 1, 1, 1, 1])

    def test_interior_multiplicity_capped(self):
        with pytest.raises(ContractError):
            KnotVector(2, [0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1])

    def test_non_decreasing(self):
        with pytest.raises(ContractError):
            KnotVector(1, [0, 0, 0.7, 0.3, 1, 1])

    def test_basis_count_and_continuity(self):
        kv = KnotVector(3, [0, 0, 0, 0, 0.5, 0.5, 1, 1, 1, 1])
        assert kv.num_basis == 6
        assert kv.continuity == 1
        assert KnotVector.uniform(3, 4).continuity == 2

    def test_immutable(self, cubic_single):
        with pytest.raises(AttributeError):
            cubic_single.degree = 2

    def test_uniform_constructor(self):
        kv = KnotVector.uniform(2, 4, 1.0, 3.0)
        np.testing.assert_allclose(kv.breakpoints, [1, 1.5, 2, 2.5, 3])


class TestEvalBasis:
    def test_left_end_interpolates(self, cubic_single):
        np.testing.assert_array_equal(eval_basis(cubic_single, 0.0).values, [1, 0, 0, 0])

    def test_right_end_left_limit(self, cubic_single):
        span = eval_basis(cubic_single, 1.0)
        np.testing.assert_allclose(span.values, [0, 0, 0, 1])
        np.testing.assert_array_equal(span.indices, [0, 1, 2, 3])

    def test_bernstein_midpoint(self, cubic_single):
        np.testing.assert_allclose(eval_basis(cubic_single, 0.5).values, [0.125, 0.375, 0.375, 0.125], atol=1e-15)

    def test_derivative_matches_central_difference(self, cubic_single):
        h = 1e-5
        d = eval_basis(cubic_single, 0.3, 1).derivatives[1]
        fd = (eval_basis(cubic_single, 0.3 + h).values - eval_basis(cubic_single, 0.3 - h).values) / (2 * h)
        np.testing.assert_allclose(d, fd, rtol=1e-6)

    def test_outside_domain(self, cubic_single):
        with pytest.raises(DomainError):
            eval_basis(cubic_single, 1.0001)
        with pytest.raises(DomainError):
            find_span(cubic_single, -0.1)

    def test_order_above_degree(self, cubic_single):
        with pytest.raises(ContractError):
            eval_basis(cubic_single, 0.5, 4)

    @given(knot_vectors(), st.integers(0, 3), st.integers(0, 2**32 - 1))
    def test_agrees_with_scipy(self, kv, order, seed):
        order = min(order, kv.degree)
        u = np.random.default_rng(seed).uniform(*kv.domain, 60)
        ours = dense_from_local(kv, u, order)
        for k in range(order + 1):
            ref = np.nan_to_num(scipy_basis(kv, u, k))
            scale = 1 + np.abs(ref).max()
            assert np.abs(ours[k] - ref).max() <= 1e-10 * scale


class TestProperties:
    @given(knot_vectors(), st.integers(0, 2**32 - 1))
    def test_partition_of_unity(self, kv, seed):
        u = np.r_[np.random.default_rng(seed).uniform(*kv.domain, 1000), kv.domain]
        _, ders = basis_derivatives(kv, u, min(1, kv.degree))
        assert np.abs(ders[:, 0].sum(axis=1) - 1).max() <= 1e-12
        assert ders[:, 0].min() >= -1e-15
        if kv.degree >= 1:
            assert np.abs(ders[:, 1].sum(axis=1)).max() <= 1e-9 * (1 + np.abs(ders[:, 1]).max())

    @given(knot_vectors(degrees=(2, 3, 4)), st.integers(0, 2**32 - 1))
    def test_derivatives_vs_finite_differences(self, kv, seed):
        # points away from knots, where the derivative is smooth
        rng = np.random.default_rng(seed)
        gaps = np.diff(kv.breakpoints)
        assume(gaps.min() > 1e-3)
        # truncation error scales as (h / gap)^2
        h = 1e-4 * gaps.min()
        u = rng.uniform(*kv.domain, 400)
        far = np.abs(u[:, None] - kv.knots[None, :]).min(axis=1) > 10 * h
        u = u[far][:100]
        d = dense_from_local(kv, u, 1)[1]
        fd = (dense_from_local(kv, u + h, 0)[0] - dense_from_local(kv, u - h, 0)[0]) / (2 * h)
        scale = np.abs(d).max(axis=1, keepdims=True) + 1.0
        assert np.all(np.abs(d - fd) <= 1e-6 * scale)

    @given(knot_vectors(), st.integers(0, 2**32 - 1))
    def test_greville_linear_reproduction(self, kv, seed):
        u = np.random.default_rng(seed).uniform(*kv.domain, 500)
        B = dense_from_local(kv, u, 0)[0]
        assert np.abs(B @ greville_abscissae(kv) - u).max() <= 1e-12 * (1 + np.abs(u).max())

    @given(knot_vectors(), st.integers(0, 4))
    def test_refinement_monotone(self, kv, k):
        grid = TensorKnotGrid.of(kv)
        fine = refine_uniform(grid, k)
        assert fine.size >= grid.size
        assert knot_grid_size(fine) <= knot_grid_size(grid) + 1e-15

    @given(knot_vectors(degrees=(2, 3)), st.integers(0, 2**32 - 1))
    def test_insertion_preserves_spline(self, kv, seed):
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(kv.num_basis)
        new = rng.uniform(kv.domain[0] + 1e-3, kv.domain[1] - 1e-3, 3)
        kv2, c2 = insert_knots(kv, new, c)
        u = rng.uniform(*kv.domain, 200)
        before = dense_from_local(kv, u, 0)[0] @ c
        after = dense_from_local(kv2, u, 0)[0] @ c2
        assert np.abs(before - after).max() <= 1e-12 * (1 + np.abs(c).max())


class TestGreville:
    def test_single_interval(self, cubic_single):
        np.testing.assert_allclose(greville_abscissae(cubic_single), [0, 1 / 3, 2 / 3, 1])

    def test_one_interior_knot(self):
        kv = KnotVector(3, [0, 0, 0, 0, 0.5, 1, 1, 1, 1])
        np.testing.assert_allclose(greville_abscissae(kv), [0, 1 / 6, 1 / 2, 5 / 6, 1])

    @given(knot_vectors())
    def test_ends_and_order(self, kv):
        g = greville_abscissae(kv)
        assert len(g) == kv.num_basis
        assert g[0] == pytest.approx(kv.domain[0]) and g[-1] == pytest.approx(kv.domain[1])
        assert np.all(np.diff(g) >= 0)


class TestRefinement:
    def test_one_knot(self, cubic_single):
        fine = refine_uniform(TensorKnotGrid.of(cubic_single), 1)
        np.testing.assert_allclose(fine.vectors[0].knots, [0, 0, 0, 0, 0.5, 1, 1, 1, 1])
        assert knot_grid_size(fine) == pytest.approx(0.5)

    def test_zero_is_identity(self, cubic_single):
        grid = TensorKnotGrid.of(cubic_single, cubic_single)
        assert refine_uniform(grid, 0) == grid

    def test_square_diagonal(self, cubic_single):
        fine = refine_uniform(TensorKnotGrid.of(cubic_single, cubic_single), 3)
        assert all(np.allclose(np.diff(v.breakpoints), 0.25) for v in fine.vectors)
        assert knot_grid_size(fine) == pytest.approx(math.sqrt(2) / 4)

    @pytest.mark.parametrize("k", [0, 1, 4, 15])
    def test_rho_schedule(self, cubic_single, k):
        assert knot_grid_size(refine_uniform(TensorKnotGrid.of(cubic_single), k)) == pytest.approx(1 / (k + 1))

    def test_rectangle_cell(self):
        grid = TensorKnotGrid.of(KnotVector.uniform(2, 2), KnotVector.uniform(2, 3))
        assert knot_grid_size(grid) == pytest.approx(math.sqrt(13) / 6)

    def test_box_cell(self, cubic_single):
        grid = refine_uniform(TensorKnotGrid.of(cubic_single, cubic_single, cubic_single), 4)
        assert knot_grid_size(grid) == pytest.approx(math.sqrt(3) / 5)

    def test_sample_coordinates_hit_knots(self):
        kv = KnotVector(3, [0, 0, 0, 0, 0.3, 1, 1, 1, 1])
        s = sample_coordinates(kv, 4)
        assert len(s) == 9 and 0.3 in s and s[0] == 0 and s[-1] == 1
