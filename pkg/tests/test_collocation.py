import numpy as np
import pytest
from scipy.interpolate import BSpline

from igac.collocation import (
    assemble,
    discretize,
    factorize,
    generate_collocation_points,
    solve,
    solve_problem,
)
from igac.errors import ContractError, SingularSystemError
from igac.nurbs import GeometryMap, NurbsField
from igac.problems import MINUS_LAPLACIAN_PLUS_IDENTITY, BvpProblem, builtin_problem, intro_1d
from igac.splines import KnotVector, TensorKnotGrid, greville_abscissae, refine_uniform

CUBIC = KnotVector(3, [0, 0, 0, 0, 1, 1, 1, 1])


def sup_error(problem, k, n=2001):
    sol, disc, _ = solve_problem(problem, k)
    eta = np.linspace(0, 1, n)[:, None]
    return np.abs(sol.field(eta) - problem.exact(disc.geometry(eta))).max()


class TestPoints:
    def test_single_cubic_interval(self):
        pts = generate_collocation_points(TensorKnotGrid.of(CUBIC))
        np.testing.assert_allclose(pts.interior[:, 0], [1 / 3, 2 / 3])
        np.testing.assert_allclose(pts.boundary[:, 0], [0, 1])

    def test_square_patch_classification(self):
        pts = generate_collocation_points(TensorKnotGrid.of(CUBIC, CUBIC))
        assert (len(pts.boundary), len(pts.interior)) == (12, 4)
        assert np.all((pts.interior > 0) & (pts.interior < 1))
        assert np.all(np.any((pts.boundary == 0) | (pts.boundary == 1), axis=1))

    @pytest.mark.parametrize("k", [1, 3, 6])
    @pytest.mark.parametrize("scheme", ["greville", "uniform"])
    def test_one_point_per_basis(self, k, scheme):
        grid = refine_uniform(TensorKnotGrid.of(CUBIC, CUBIC), k)
        assert generate_collocation_points(grid, scheme).n == grid.size

    def test_unknown_scheme(self):
        with pytest.raises(ContractError):
            generate_collocation_points(TensorKnotGrid.of(CUBIC), "gauss")


class TestAssemble:
    def test_intro_boundary_row(self):
        p = intro_1d(0.0, 1.0)
        disc = discretize(p, 2)
        sys_ = assemble(p, disc.trial, geometry=disc.geometry)
        i0 = sys_.n_interior + int(np.argmin(sys_.points[sys_.n_interior :, 0]))
        np.testing.assert_allclose(sys_.matrix[i0], np.eye(disc.grid.size)[0], atol=1e-15)
        assert sys_.rhs[i0] == pytest.approx(p.exact(np.array([[0.0]]))[0], abs=1e-15)

    def test_intro_interior_rows_are_derivatives(self, rng):
        # interior row applied to p equals the derivative of the spline with coefficients p
        p = intro_1d(0.0, 1.0)
        disc = discretize(p, 4)
        sys_ = assemble(p, disc.trial, geometry=disc.geometry)
        kv = disc.grid.vectors[0]
        c = rng.standard_normal(kv.num_basis)
        ref = BSpline(kv.knots, c, 3).derivative()(sys_.points[: sys_.n_interior, 0])
        np.testing.assert_allclose(sys_.matrix[: sys_.n_interior] @ c, ref, rtol=1e-12, atol=1e-12)

    def test_interval_length_scales_derivative_rows(self):
        short, wide = intro_1d(0.0, 1.0), intro_1d(0.0, 2.0)
        a1 = assemble(short, discretize(short, 2).trial, geometry=discretize(short, 2).geometry)
        a2 = assemble(wide, discretize(wide, 2).trial, geometry=discretize(wide, 2).geometry)
        n1 = a1.n_interior
        np.testing.assert_allclose(a2.matrix[:n1], a1.matrix[:n1] / 2)

    @pytest.mark.parametrize("name", ["source-1d", "annulus-2d", "cube-3d"])
    def test_constants_map_to_one(self, name):
        p = builtin_problem(name)
        disc = discretize(p, 1)
        sys_ = assemble(p, disc.trial, geometry=disc.geometry)
        rowsum = sys_.matrix[: sys_.n_interior] @ np.ones(disc.grid.size)
        np.testing.assert_allclose(rowsum, 1.0, atol=1e-9)

    def test_point_count_mismatch(self):
        p = builtin_problem("source-1d")
        disc = discretize(p, 1)
        with pytest.raises(ContractError):
            assemble(p, disc.trial, generate_collocation_points(TensorKnotGrid.of(CUBIC)))


class TestSolve:
    def test_linear_solution_reproduced(self):
        p = intro_1d(0.0, 1.0, exact=lambda s: s, exact_gradient=lambda s: np.ones_like(s))
        sol, disc, sys_ = solve_problem(p, 0)
        np.testing.assert_allclose(sol.field.coefficients, greville_abscissae(CUBIC), atol=1e-12)
        assert sol.residual <= 1e-12

    def test_refinement_reduces_error(self):
        p = builtin_problem("source-1d")
        assert sup_error(p, 7) < sup_error(p, 3)

    def test_zero_data_zero_solution(self):
        p = builtin_problem("annulus-2d")
        zero = lambda eta: np.zeros(len(eta))  # noqa: E731
        sol, _, _ = solve_problem(p, 1, source=zero, boundary=zero)
        assert np.abs(sol.field.coefficients).max() == 0.0

    @pytest.mark.parametrize("name,k", [("source-1d", 3), ("annulus-2d", 2), ("intro-1d", 2)])
    def test_weight_power_scaling_is_equivalent(self, name, k):
        p = builtin_problem(name)
        a, _, _ = solve_problem(p, k)
        b, _, _ = solve_problem(p, k, row_scaling="weight-power")
        scale = 1 + np.abs(a.field.coefficients).max()
        assert np.abs(a.field.coefficients - b.field.coefficients).max() <= 1e-10 * scale

    def test_polynomial_solution_reproduced(self):
        # cubic-in-each-variable exact solution lies in the trial space of the identity square
        grid = refine_uniform(TensorKnotGrid.of(CUBIC, CUBIC), 1)
        geom = GeometryMap.identity(grid)
        T = lambda x: x[:, 0] ** 3 * x[:, 1] ** 2 - x[:, 0] * x[:, 1] + 0.5  # noqa: E731
        lap = lambda x: 6 * x[:, 0] * x[:, 1] ** 2 + 2 * x[:, 0] ** 3  # noqa: E731
        p = BvpProblem(
            "poly", geom, MINUS_LAPLACIAN_PLUS_IDENTITY,
            source=lambda x: T(x) - lap(x), boundary=T, exact=T,
            exact_gradient=lambda x: np.zeros_like(x), exact_laplacian=lap,
        )
        sol, disc, _ = solve_problem(p, 0)
        pts = generate_collocation_points(grid).all
        from igac.nurbs import rational_basis

        rb = rational_basis(grid, 1.0, pts, 0)
        M = np.zeros((len(pts), grid.size))
        np.put_along_axis(M, rb.index, rb.r0, axis=1)
        ref = np.linalg.solve(M, T(pts))
        np.testing.assert_allclose(sol.field.coefficients.ravel(), ref, atol=1e-9)

    @pytest.mark.parametrize(
        "name,levels",
        [("source-1d", range(8)), ("annulus-2d", range(5)), ("cube-3d", range(3)), ("intro-1d", (0, 2, 4, 6))],
    )
    def test_residual_invariant(self, name, levels):
        p = builtin_problem(name)
        for k in levels:
            sol, _, sys_ = solve_problem(p, k)
            assert sol.residual <= 1e-9 * (1 + np.abs(sys_.rhs).max())
            assert np.isfinite(sol.cond_est) and sol.cond_est >= 1
            assert sol.rho == pytest.approx(np.sqrt(p.dim) / (k + 1))

    def test_intro_odd_level_is_singular(self):
        with pytest.raises(SingularSystemError):
            solve_problem(builtin_problem("intro-1d"), 1)

    def test_singular_matrix(self):
        with pytest.raises(SingularSystemError):
            factorize(np.array([[1.0, 2.0], [2.0, 4.0]]))
        with pytest.raises(ContractError):
            factorize(np.ones((2, 3)))

    def test_condition_estimate_order_of_magnitude(self, rng):
        A = rng.standard_normal((30, 30))
        _, cond = factorize(A)
        exact = np.linalg.cond(A, 1)
        assert exact / 10 <= cond <= exact * 1.0000001

    def test_residual_failure_detected(self):
        p = builtin_problem("source-1d")
        sol, disc, sys_ = solve_problem(p, 2)
        (lu, piv), cond = factorize(sys_.matrix)
        bad = ((lu + 1e-3), piv), cond
        with pytest.raises(SingularSystemError):
            solve(sys_, bad)
