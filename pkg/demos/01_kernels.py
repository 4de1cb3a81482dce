# %% [markdown]
# # Kernel family
#
# The cosine profile and its two antiderivatives set every weight in the
# scheme. Here we tabulate them and confirm the derivative relations with
# finite differences.

# %%
import numpy as np
from scipy.integrate import trapezoid

from nonlocal_poisson import KernelFamily

ker = KernelFamily(delta=0.2)
r = np.linspace(0.0, 1.2, 7)
for level in range(3):
    print(f"level {level}:", np.round(ker.eval_level(level, r), 6) + 0.0)

# %% [markdown]
# Differentiating a level gives minus the level below it, up to
# finite-difference error.

# %%
h = 1e-5
x = np.linspace(0.05, 0.95, 5)
for level in (1, 2):
    fd = (ker.eval_level(level, x + h) - ker.eval_level(level, x - h)) / (2 * h)
    print(level, np.abs(fd + ker.eval_level(level - 1, x)).max())

# %% [markdown]
# The scaled kernel carries the normalization constant, so its mass over a
# flat plane stays the same at every delta.

# %%
for delta in (0.4, 0.2, 0.1):
    k = KernelFamily(delta)
    s = np.linspace(0, 2 * delta, 4001)
    mass = trapezoid(k.eval_scaled(0, np.zeros((1, 2)), np.column_stack([s, 0 * s])) * 2 * np.pi * s, s)
    print(f"delta={delta}: plane mass {mass:.6f}")
