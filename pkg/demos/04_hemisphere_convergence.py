# %% [markdown]
# # Convergence on the hemisphere, u = z^2
#
# Each row samples a fresh cloud with delta = (2/n)^(1/4), solves the
# coupled system and measures the weighted relative error. Set
# FULL = True for the eight-row sweep (a few minutes on one core).

# %%
from nonlocal_poisson.geometry import hemisphere_z2
from nonlocal_poisson.study import STUDY_N_LIST, run_study

FULL = False
n_list = STUDY_N_LIST if FULL else STUDY_N_LIST[:4]
res = run_study(hemisphere_z2(), n_list, seed=0)
print(res.csv_text())

# %%
print(f"fitted interior slope {res.slope_interior:.3f}, intercept {res.intercept_interior:.3f}")

# %% [markdown]
# The exact flux vanishes here, so the boundary column is an absolute error.

# %%
print(res.summary()["boundary_error_absolute"])
