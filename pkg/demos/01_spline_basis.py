"""Cubic B-spline basis: evaluation, Greville points and uniform refinement."""
import numpy as np

from igac import KnotVector, TensorKnotGrid, eval_basis, greville_abscissae, knot_grid_size, refine_uniform

kv = KnotVector(3, [0, 0, 0, 0, 1, 1, 1, 1])
span = eval_basis(kv, 0.5, 1)
print("basis at u=0.5:", span.values)
print("first derivatives:", span.derivatives[1])
print("Greville abscissae:", greville_abscissae(kv))

# each refinement level k puts k simple knots in the unit interval
for k in (0, 1, 3, 7):
    grid = refine_uniform(TensorKnotGrid.of(kv, kv), k)
    print(f"k={k}: {grid.shape} basis functions, rho = {knot_grid_size(grid):.4f} (sqrt(2)/(k+1) = {np.sqrt(2) / (k + 1):.4f})")
