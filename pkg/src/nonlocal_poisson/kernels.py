"""Compactly supported kernel profiles and their upper antiderivatives.

A profile ``R`` lives on ``[0, inf)`` and vanishes past ``r = 1``.  Two
antiderivative levels are needed by the model::

    Rbar(r)  = int_r^inf R(s) ds
    Rbbar(r) = int_r^inf Rbar(s) ds

and every kernel enters the operators through the rescaling

    R_delta(x, y) = C_delta * R(|x - y|^2 / (4 delta^2)),
    C_delta = (4 pi delta^2)^(-m/2),

with ``m`` the intrinsic dimension of the manifold.
"""

import numpy as np
from scipy import integrate, interpolate

from .errors import ConfigurationError, DomainError

LEVELS = (0, 1, 2)


def _cosine(level, r):
    inside = r < 1.0
    rc = np.where(inside, r, 1.0)
    if level == 0:
        val = 0.5 * (1.0 + np.cos(np.pi * rc))
    elif level == 1:
        val = 0.5 * (1.0 - rc) - np.sin(np.pi * rc) / (2.0 * np.pi)
    else:
        val = 0.25 * (1.0 - rc) ** 2 - (1.0 + np.cos(np.pi * rc)) / (2.0 * np.pi**2)
    return np.where(inside, val, 0.0)


class _TabulatedProfile:
    """Antiderivatives of a user profile, cached on a uniform grid of [0, 1]."""

    def __init__(self, profile, grid_size=4096, rtol=1e-12):
        if callable(profile):
            base = profile
        else:
            r_s, v_s = (np.asarray(a, dtype=float) for a in profile)
            if r_s.ndim != 1 or r_s.shape != v_s.shape or r_s.size < 4:
                raise ConfigurationError("tabulated profile needs matching 1-D arrays of >= 4 samples")
            base = interpolate.CubicSpline(r_s, v_s)
        self._base = base

        grid = np.linspace(0.0, 1.0, grid_size)
        self.grid = grid
        levels = [np.asarray(base(grid), dtype=float)]
        fn = lambda s: float(base(s))
        for _ in (1, 2):
            pieces = np.array([
                integrate.quad(fn, a, b, epsabs=0.0, epsrel=rtol, limit=200)[0]
                for a, b in zip(grid[:-1], grid[1:])
            ])
            upper = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
            levels.append(upper)
            spline = interpolate.CubicSpline(grid, upper)
            fn = lambda s, sp=spline: float(sp(s))
        self.splines = [self._wrap(base)] + [interpolate.CubicSpline(grid, lv) for lv in levels[1:]]
        self.samples = levels

    @staticmethod
    def _wrap(base):
        return lambda r: np.asarray(base(r), dtype=float)

    def __call__(self, level, r):
        inside = r < 1.0
        val = self.splines[level](np.where(inside, r, 1.0))
        return np.where(inside, val, 0.0)


class KernelFamily:
    """Kernel profile together with its scale and normalization.

    Parameters
    ----------
    delta : float
        Support scale; the scaled kernel vanishes once ``|x - y| > 2 delta``.
    intrinsic_dim : int
        Dimension ``m`` of the manifold, which sets ``C_delta``.
    profile : callable or (r, values) pair, optional
        Custom profile on ``[0, 1]``.  ``None`` selects the cosine kernel
        ``(1 + cos(pi r)) / 2`` whose antiderivatives are known in closed form.
    grid_size : int
        Number of cached nodes for custom-profile antiderivatives.
    """

    def __init__(self, delta, intrinsic_dim=2, profile=None, grid_size=4096):
        if not delta > 0:
            raise ConfigurationError(f"delta must be positive, got {delta!r}")
        self.delta = float(delta)
        self.intrinsic_dim = int(intrinsic_dim)
        if profile is None:
            self._table = None
        elif isinstance(profile, _TabulatedProfile):
            self._table = profile
        else:
            self._table = _TabulatedProfile(profile, grid_size=grid_size)
            self._check_assumptions()

    @property
    def is_cosine(self):
        return self._table is None

    @property
    def normalization(self):
        """``C_delta = (4 pi delta^2)^(-m/2)``."""
        return (4.0 * np.pi * self.delta**2) ** (-0.5 * self.intrinsic_dim)

    def with_delta(self, delta):
        """Same profile at a different scale (cached tables are shared)."""
        return KernelFamily(delta, self.intrinsic_dim, self._table)

    def _check_assumptions(self):
        r = np.linspace(0.0, 1.0, 1025)
        vals = self.eval_level(0, r)
        if np.any(vals < -1e-14):
            raise ConfigurationError("kernel profile must be nonnegative on [0, 1]")
        if vals[r <= 0.5].min() <= 0.0:
            raise ConfigurationError("kernel profile must be bounded away from zero on [0, 1/2]")

    def eval_level(self, level, r):
        """Evaluate ``R`` (level 0), ``Rbar`` (1) or ``Rbbar`` (2) at ``r >= 0``."""
        if level not in LEVELS:
            raise ConfigurationError(f"level must be one of {LEVELS}, got {level!r}")
        scalar = np.ndim(r) == 0
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainError("kernel argument must be nonnegative")
        out = _cosine(level, r) if self._table is None else self._table(level, r)
        return float(out) if scalar else out

    def scaled_sq(self, level, dist_sq):
        """Scaled kernel from squared distances: ``C_delta * level(d^2 / 4 delta^2)``."""
        return self.normalization * self.eval_level(level, np.asarray(dist_sq) / (4.0 * self.delta**2))

    def eval_scaled(self, level, x, y):
        """Scaled kernel between ambient points (broadcasts over leading axes)."""
        diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return self.scaled_sq(level, np.sum(diff * diff, axis=-1))


def eval_level(family, level, r):
    return family.eval_level(level, r)


def eval_scaled(family, level, x, y):
    return family.eval_scaled(level, x, y)
