"""The quarter-annulus NURBS map and physical derivatives through it."""
import numpy as np

from igac import builtin_problem, physical_derivs

geom = builtin_problem("annulus-2d").geometry
eta = np.array([[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [1.0, 1.0]])
x = geom(eta)
for e, p in zip(eta, x):
    print(f"eta={e} -> x={p}, |x| = {np.linalg.norm(p):.12f}")

# the x-coordinate used as a field: its physical gradient is (1, 0), Laplacian 0
pd = physical_derivs(geom.component(0), geom, [0.3, 0.7])
print("grad x:", pd.gradient, " lap x:", pd.laplacian)

fine = geom.refine(3)
pts = np.random.default_rng(0).random((1000, 2))
print("max displacement after knot insertion:", np.abs(fine(pts) - geom(pts)).max())
