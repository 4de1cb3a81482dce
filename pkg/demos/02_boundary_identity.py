# %% [markdown]
# # The boundary identity
#
# On the boundary, the second normal derivative, the Laplace-Beltrami
# operator and the boundary curvature term are tied together. We check it
# on the curved hemisphere and on the flat disk.

# %%
import numpy as np

from nonlocal_poisson import Disk, Hemisphere, identity_residual, kappa_n
from nonlocal_poisson.geometry import disk_paraboloid, hemisphere_x, hemisphere_z2

t = np.linspace(0, 2 * np.pi, 16, endpoint=False)
print("kappa_n on the equator:", np.abs(kappa_n(Hemisphere(), t)).max())
print("kappa_n on the unit circle:", kappa_n(Disk(), t)[:3])

# %%
for problem in (hemisphere_z2(), hemisphere_x(), disk_paraboloid()):
    res = identity_residual(problem, t)
    print(f"{problem.manifold.name:10s} {problem.name:11s} max residual {res.max():.2e}")

# %% [markdown]
# The residual shrinks with the finite-difference step until round-off
# takes over.

# %%
for h in (1e-1, 1e-2, 1e-3):
    print(h, identity_residual(hemisphere_x(), t, h=h).max())
