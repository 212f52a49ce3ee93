"""Measure the consistency inequalities and the operator norms on source-1d."""
from igac import SamplingSpec, check_bounds, builtin_problem

problem = builtin_problem("source-1d")
for r in check_bounds(problem, [1, 3, 7], SamplingSpec(16), trials=16):
    print(f"{r.bound:17s} k={r.level}  lhs={r.lhs:10.4g}  rhs={r.rhs:10.4g}  {r.verdict}")
