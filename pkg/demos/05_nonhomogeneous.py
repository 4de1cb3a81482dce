# %% [markdown]
# # Non-homogeneous data, u = x
#
# Boundary values are now nonzero and enter through the boundary sums. We
# compare random clouds with the equal-area lattice at small sizes.

# %%
from nonlocal_poisson.geometry import Hemisphere, hemisphere_x, sample
from nonlocal_poisson.assembly import assemble
from nonlocal_poisson.solver import solve
from nonlocal_poisson.study import error_interior, run_study

problem = hemisphere_x()
cloud = sample(Hemisphere(), 1250, 100, seed=0)
system = assemble(cloud, problem=problem)
result = solve(system)
print(f"{result.iterations} CG iterations, e2 = {error_interior(result, problem, cloud):.4g}")

# %%
n_list = [512, 1250, 2592, 4802]
for mode in ("random", "lattice"):
    res = run_study(problem, n_list, seed=0, mode=mode)
    print(mode, [f"{r.e2:.2e}" for r in res.records], f"slope {res.slope_interior:.2f}")

# %% [markdown]
# Random clouds are noisier at the smallest sizes, which tilts short fits.
# Lattice clouds give a steadier sequence.
