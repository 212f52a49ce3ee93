"""Solve -T'' + T = (1 + 4 pi^2) sin(2 pi x) by collocation and watch the error fall."""
import numpy as np

from igac import builtin_problem, solve_problem

problem = builtin_problem("source-1d")
x = np.linspace(0, 1, 4001)[:, None]
for k in (1, 3, 7, 15, 31):
    sol, disc, system = solve_problem(problem, k)
    err = np.abs(sol.field(x) - problem.exact(disc.geometry(x))).max()
    print(f"k={k:2d}  n={sol.n:3d}  rho={sol.rho:.4f}  |T_r - T| = {err:.3e}  cond ~ {sol.cond_est:.1e}")

# the same on the quarter annulus
problem = builtin_problem("annulus-2d")
sol, disc, _ = solve_problem(problem, 5)
pts = np.random.default_rng(1).random((2000, 2))
print("annulus k=5 max error:", np.abs(sol.field(pts) - problem.exact_at(pts)).max())
