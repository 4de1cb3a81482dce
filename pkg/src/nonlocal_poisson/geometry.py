"""Analytic test manifolds, point clouds and boundary geometry.

Both shipped manifolds use a polar-type chart ``(s, t)`` in which ``s`` runs
from the pole/center (``s = 0``) to the boundary (``s = radial_extent``) and
``t`` is a periodic angle.  The boundary chart is ``t -> chart(radial_extent, t)``.
"""

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, GeometryError

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


class ParametricManifold:
    """Surface with a polar chart and a closed boundary curve.

    Subclasses supply the chart, its Jacobian, the boundary derivatives and
    the geodesic-polar patch used by the operator quadrature.
    """

    name = "manifold"
    ambient_dim = 3
    intrinsic_dim = 2
    radial_extent = 1.0
    area = 1.0
    boundary_length = 1.0

    # --- chart -------------------------------------------------------------
    def chart(self, s, t):
        raise NotImplementedError

    def chart_jacobian(self, s, t):
        """Columns ``d chart / ds`` and ``d chart / dt``, shape ``(..., d, 2)``."""
        raise NotImplementedError

    def area_element(self, s, t):
        jac = self.chart_jacobian(s, t)
        g = np.einsum("...ki,...kj->...ij", jac, jac)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        return np.sqrt(det)

    def params_of(self, x):
        """Chart parameters ``(s, t)`` of points on the manifold."""
        raise NotImplementedError

    # --- boundary ----------------------------------------------------------
    def boundary_chart(self, t):
        return self.chart(np.full_like(np.asarray(t, dtype=float), self.radial_extent), t)

    def boundary_derivatives(self, t):
        """Return ``psi, psi', psi''`` of the boundary chart at ``t``."""
        raise NotImplementedError

    def boundary_length_element(self, t):
        _, d1, _ = self.boundary_derivatives(t)
        return np.linalg.norm(d1, axis=-1)

    def boundary_param(self, x):
        x = np.asarray(x, dtype=float)
        return np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * np.pi)

    def conormal(self, t):
        """Outward unit conormal: tangent to the surface, normal to the boundary."""
        t = np.asarray(t, dtype=float)
        jac = self.chart_jacobian(np.full_like(t, self.radial_extent), t)
        radial = jac[..., :, 0]
        _, d1, _ = self.boundary_derivatives(t)
        tau = _unit(d1)
        v = radial - _dot(radial, tau)[..., None] * tau
        return _unit(v)

    def conormal_at(self, x):
        return self.conormal(self.boundary_param(x))

    def kappa_n_at(self, x):
        return kappa_n(self, self.boundary_param(x))

    # --- surface -----------------------------------------------------------
    def surface_normal(self, x):
        """Unit normal in the ambient space (``None`` when ``d == m``)."""
        return None

    def tangent_basis(self, x):
        raise NotImplementedError

    def distance_to_boundary(self, x):
        """Geodesic distance from ``x`` to the boundary curve."""
        raise NotImplementedError

    def contains(self, x, tol=1e-9):
        raise NotImplementedError

    def on_boundary(self, x, tol=1e-9):
        return self.contains(x, tol) & (np.abs(self.distance_to_boundary(x)) <= tol)

    def inward_geodesic(self, t, s):
        """Point at signed arc length ``s`` along the geodesic leaving the
        boundary point ``t`` in direction ``-conormal``."""
        raise NotImplementedError

    # --- local geometry used by quadrature and Voronoi weights -------------
    def geodesic_radius(self, ambient_radius):
        """Largest geodesic-polar radius whose image stays in the ambient ball."""
        raise NotImplementedError

    def polar_map(self, x, e1, e2, rho, alpha):
        """Point at geodesic-polar coordinates ``(rho, alpha)`` around ``x``."""
        raise NotImplementedError

    def polar_jacobian(self, rho):
        raise NotImplementedError

    def ray_exit(self, x, e1, e2, alpha):
        """Geodesic length of the ray from ``x`` at angle ``alpha`` before it leaves the surface."""
        raise NotImplementedError

    def ray_breakpoints(self, x, e1, e2, rho_max):
        """Angles where ``ray_exit`` crosses ``rho_max`` (or vanishes for boundary ``x``)."""
        raise NotImplementedError

    def boundary_arc(self, x, ambient_radius):
        """Boundary parameters within ``ambient_radius`` of each ``x``.

        Returns ``(center, half_width)``; ``half_width < 0`` flags an empty arc
        and ``half_width >= pi`` the full circle.
        """
        raise NotImplementedError

    def tangent_halfplane(self, p, e1, e2):
        """Half-plane ``a . w <= b`` approximating the surface in tangent coordinates at ``p``."""
        return None


class Hemisphere(ParametricManifold):
    """Upper unit hemisphere ``x^2 + y^2 + z^2 = 1, z >= 0``."""

    name = "hemisphere"
    ambient_dim = 3
    radial_extent = np.pi / 2
    area = 2 * np.pi
    boundary_length = 2 * np.pi

    def chart(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        return np.stack([np.sin(s) * np.cos(t), np.sin(s) * np.sin(t), np.cos(s)], axis=-1)

    def chart_jacobian(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        ds = np.stack([np.cos(s) * np.cos(t), np.cos(s) * np.sin(t), -np.sin(s)], axis=-1)
        dt = np.stack([-np.sin(s) * np.sin(t), np.sin(s) * np.cos(t), np.zeros_like(s)], axis=-1)
        return np.stack([ds, dt], axis=-1)

    def area_element(self, s, t):
        return np.sin(np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))[0])

    def params_of(self, x):
        x = np.asarray(x, dtype=float)
        return np.arccos(np.clip(x[..., 2], -1, 1)), self.boundary_param(x)

    def boundary_derivatives(self, t):
        t = np.asarray(t, dtype=float)
        c, s, z = np.cos(t), np.sin(t), np.zeros_like(t)
        return (np.stack([c, s, z], -1), np.stack([-s, c, z], -1), np.stack([-c, -s, z], -1))

    def surface_normal(self, x):
        return _unit(np.asarray(x, dtype=float))

    def tangent_basis(self, x):
        nu = self.surface_normal(x)
        ref = np.where(np.abs(nu[..., 2:3]) < 0.9, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
        e1 = _unit(np.cross(nu, ref))
        e2 = np.cross(nu, e1)
        return e1, e2

    def distance_to_boundary(self, x):
        return np.arcsin(np.clip(np.asarray(x, float)[..., 2], -1, 1))

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return (np.abs(np.linalg.norm(x, axis=-1) - 1.0) <= tol) & (x[..., 2] >= -tol)

    def inward_geodesic(self, t, s):
        q = self.boundary_chart(t)
        n = self.conormal(t)
        s = np.asarray(s, dtype=float)[..., None]
        return np.cos(s) * q - np.sin(s) * n

    def geodesic_radius(self, ambient_radius):
        return 2.0 * np.arcsin(min(ambient_radius / 2.0, 1.0))

    def polar_map(self, x, e1, e2, rho, alpha):
        rho = np.asarray(rho)[..., None]
        alpha = np.asarray(alpha)[..., None]
        return np.cos(rho) * x + np.sin(rho) * (np.cos(alpha) * e1 + np.sin(alpha) * e2)

    def polar_jacobian(self, rho):
        return np.sin(rho)

    def ray_exit(self, x, e1, e2, alpha):
        c = np.cos(alpha) * e1[2] + np.sin(alpha) * e2[2]
        return np.arctan2(c, x[2]) + np.pi / 2

    def ray_breakpoints(self, x, e1, e2, rho_max):
        amp = np.hypot(e1[2], e2[2])
        if amp < 1e-15:
            return []
        beta = np.arctan2(e2[2], e1[2])
        arg = -x[2] / np.tan(rho_max) / amp
        if abs(arg) > 1:
            return []
        width = np.arccos(arg)
        return [beta - width, beta + width]

    def boundary_arc(self, x, ambient_radius):
        x = np.asarray(x, dtype=float)
        rh = np.hypot(x[..., 0], x[..., 1])
        center = np.arctan2(x[..., 1], x[..., 0])
        num = _dot(x, x) + 1.0 - ambient_radius**2
        with np.errstate(divide="ignore", invalid="ignore"):
            c0 = num / (2.0 * rh)
        half = np.where(c0 > 1, -1.0, np.where(c0 < -1, np.pi, np.arccos(np.clip(c0, -1, 1))))
        half = np.where(rh == 0, np.where(num <= 0, np.pi, -1.0), half)
        return center, half

    def tangent_halfplane(self, p, e1, e2):
        return -np.array([e1[2], e2[2]]), p[2]


class Disk(ParametricManifold):
    """Flat disk of a given radius in the plane (``d = m = 2``)."""

    ambient_dim = 2

    def __init__(self, radius=1.0):
        if not radius > 0:
            raise ConfigurationError("disk radius must be positive")
        self.radius = float(radius)
        self.radial_extent = self.radius
        self.area = np.pi * self.radius**2
        self.boundary_length = 2 * np.pi * self.radius

    name = "disk"

    def chart(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        return np.stack([s * np.cos(t), s * np.sin(t)], axis=-1)

    def chart_jacobian(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        ds = np.stack([np.cos(t), np.sin(t)], axis=-1)
        dt = np.stack([-s * np.sin(t), s * np.cos(t)], axis=-1)
        return np.stack([ds, dt], axis=-1)

    def area_element(self, s, t):
        return np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))[0].copy()

    def params_of(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x, axis=-1), self.boundary_param(x)

    def boundary_derivatives(self, t):
        t = np.asarray(t, dtype=float)
        c, s, r = np.cos(t), np.sin(t), self.radius
        return (r * np.stack([c, s], -1), r * np.stack([-s, c], -1), r * np.stack([-c, -s], -1))

    def tangent_basis(self, x):
        x = np.asarray(x, dtype=float)
        e1 = np.zeros_like(x)
        e2 = np.zeros_like(x)
        e1[..., 0] = 1.0
        e2[..., 1] = 1.0
        return e1, e2

    def distance_to_boundary(self, x):
        return self.radius - np.linalg.norm(np.asarray(x, float), axis=-1)

    def contains(self, x, tol=1e-9):
        return self.distance_to_boundary(x) >= -tol

    def inward_geodesic(self, t, s):
        s = np.asarray(s, dtype=float)[..., None]
        return self.boundary_chart(t) - s * self.conormal(t)

    def geodesic_radius(self, ambient_radius):
        return float(ambient_radius)

    def polar_map(self, x, e1, e2, rho, alpha):
        rho = np.asarray(rho)[..., None]
        alpha = np.asarray(alpha)[..., None]
        return x + rho * (np.cos(alpha) * e1 + np.sin(alpha) * e2)

    def polar_jacobian(self, rho):
        return np.asarray(rho, dtype=float)

    def ray_exit(self, x, e1, e2, alpha):
        u = np.cos(alpha)[..., None] * e1 + np.sin(alpha)[..., None] * e2
        xu = u @ x
        disc = np.maximum(xu**2 + self.radius**2 - x @ x, 0.0)
        return np.maximum(-xu + np.sqrt(disc), 0.0)

    def ray_breakpoints(self, x, e1, e2, rho_max):
        r = np.hypot(x[0], x[1])
        out = []
        if r < 1e-15:
            return out
        ax = np.arctan2(x[1], x[0])
        arg = (self.radius**2 - r**2 - rho_max**2) / (2 * rho_max * r)
        if abs(arg) <= 1:
            w = np.arccos(arg)
            out += [ax - w, ax + w]
        if abs(r - self.radius) <= 1e-12:
            out += [ax - np.pi / 2, ax + np.pi / 2]
        return out

    def boundary_arc(self, x, ambient_radius):
        x = np.asarray(x, dtype=float)
        rh = np.linalg.norm(x, axis=-1)
        center = np.arctan2(x[..., 1], x[..., 0])
        num = rh**2 + self.radius**2 - ambient_radius**2
        with np.errstate(divide="ignore", invalid="ignore"):
            c0 = num / (2.0 * self.radius * rh)
        half = np.where(c0 > 1, -1.0, np.where(c0 < -1, np.pi, np.arccos(np.clip(c0, -1, 1))))
        half = np.where(rh == 0, np.where(num <= 0, np.pi, -1.0), half)
        return center, half

    def tangent_halfplane(self, p, e1, e2):
        r = np.hypot(p[0], p[1])
        if r < 1e-12:
            return None
        u = p / r
        return np.array([u @ e1, u @ e2]), self.radius - r


MANIFOLDS = {"hemisphere": Hemisphere, "disk": Disk}


def make_manifold(name, **kwargs):
    try:
        return MANIFOLDS[name](**kwargs)
    except KeyError:
        raise ConfigurationError(f"unknown manifold {name!r}; choose from {sorted(MANIFOLDS)}") from None


# ---------------------------------------------------------------------------
# boundary curvature and the normal-derivative identity
# ---------------------------------------------------------------------------

def kappa_n(manifold, boundary_param):
    """Contraction ``h^ij l_ij`` of the boundary's second form with the conormal.

    For a surface this is the boundary curvature times ``n . n_b`` (``n_b`` the
    principal normal of the boundary curve).  It is zero on the equator of the
    sphere and ``-1/rho`` on the rim of a flat disk of radius ``rho``.
    """
    t = np.asarray(boundary_param, dtype=float)
    _, d1, d2 = manifold.boundary_derivatives(t)
    h = _dot(d1, d1)
    if np.any(h <= 1e-14):
        raise GeometryError("degenerate boundary metric")
    out = _dot(d2, manifold.conormal(t)) / h
    return float(out) if out.ndim == 0 else out


def laplace_beltrami(manifold, u, s, t, step=1e-3):
    """Laplace-Beltrami of an ambient scalar field from the chart metric.

    Uses ``(1/sqrt g) d_i (sqrt g g^ij d_j u)`` with nested central differences
    in the chart parameters, Richardson-extrapolated over ``step`` and ``step/2``.
    """

    def flux(si, ti, h):
        jac = manifold.chart_jacobian(si, ti)
        g = np.einsum("...ki,...kj->...ij", jac, jac)
        ginv = np.linalg.inv(g)
        sqrtg = np.sqrt(np.linalg.det(g))
        du_s = (u(manifold.chart(si + h, ti)) - u(manifold.chart(si - h, ti))) / (2 * h)
        du_t = (u(manifold.chart(si, ti + h)) - u(manifold.chart(si, ti - h))) / (2 * h)
        grad = np.stack([du_s, du_t], axis=-1)
        return sqrtg[..., None] * np.einsum("...ij,...j->...i", ginv, grad), sqrtg

    def lap(h):
        fs_p, _ = flux(s + h, t, h)
        fs_m, _ = flux(s - h, t, h)
        ft_p, _ = flux(s, t + h, h)
        ft_m, _ = flux(s, t - h, h)
        _, sqrtg = flux(s, t, h)
        div = (fs_p[..., 0] - fs_m[..., 0] + ft_p[..., 1] - ft_m[..., 1]) / (2 * h)
        return div / sqrtg

    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return (4.0 * lap(step / 2) - lap(step)) / 3.0


def identity_residual(problem, boundary_param, h=1e-3):
    """``|u_nn - Lap u - kappa_n u_n + Lap_b g|`` at a boundary point.

    ``u_nn`` is the central second difference of ``u`` along the geodesic
    through the boundary point in the conormal direction, with step ``h``.
    The ``Lap_b g`` term vanishes for homogeneous data.
    """
    m = problem.manifold
    t = np.asarray(boundary_param, dtype=float)
    q = m.boundary_chart(t)
    u = problem.u_exact
    u_nn = (u(m.inward_geodesic(t, h)) - 2.0 * u(q) + u(m.inward_geodesic(t, -h))) / h**2
    lap = laplace_beltrami(m, u, np.full_like(t, m.radial_extent), t)
    res = np.abs(u_nn - lap - kappa_n(m, t) * problem.du_dn_exact(q) + problem.laplacian_boundary_g(q))
    return float(res) if res.ndim == 0 else res


# ---------------------------------------------------------------------------
# test problems
# ---------------------------------------------------------------------------

@dataclass
class TestProblem:
    """Exact solution and data of ``-Lap u = f`` with ``u = g`` on the boundary.

    All fields are callables on ambient point arrays of shape ``(..., d)``.
    ``grad_u`` is the ambient gradient; its product with the conormal is the
    exact boundary flux.
    """

    __test__ = False

    name: str
    manifold: ParametricManifold
    u_exact: Callable
    grad_u: Callable
    f: Callable
    g: Callable
    laplacian_boundary_g: Callable
    homogeneous: bool = True
    description: str = ""

    def du_dn_exact(self, points):
        points = np.asarray(points, dtype=float)
        return _dot(self.grad_u(points), self.manifold.conormal_at(points))


def _zero(x):
    return np.zeros(np.asarray(x).shape[:-1])


def hemisphere_z2(manifold=None):
    m = manifold or Hemisphere()
    return TestProblem(
        name="z2", manifold=m,
        u_exact=lambda x: x[..., 2] ** 2,
        grad_u=lambda x: np.stack([0 * x[..., 0], 0 * x[..., 0], 2 * x[..., 2]], -1),
        f=lambda x: -2.0 + 6.0 * x[..., 2] ** 2,
        g=_zero, laplacian_boundary_g=_zero,
        description="u = z^2, f = -2 + 6 z^2",
    )


def _printed_f_x(x):
    X, Y = x[..., 0], x[..., 1]
    return 2.25 * (5 + 8 * X**2 + 1.25 * Y**2) * X / (1 + 8 * X**2 + 0.3125 * Y**2) ** 2


def hemisphere_x(f_variant="corrected", manifold=None):
    """``u = x``; ``f = 2x`` is the true ``-Lap x`` on the unit sphere.

    ``f_variant="printed"`` substitutes the rational right-hand side printed in
    the original experiment so its effect can be reproduced.
    """
    m = manifold or Hemisphere()
    if f_variant == "corrected":
        f = lambda x: 2.0 * x[..., 0]
    elif f_variant == "printed":
        f = _printed_f_x
    else:
        raise ConfigurationError("f_variant must be 'corrected' or 'printed'")
    return TestProblem(
        name="x" if f_variant == "corrected" else "x_printed_f", manifold=m,
        u_exact=lambda x: x[..., 0].copy(),
        grad_u=lambda x: np.stack([np.ones_like(x[..., 0]), 0 * x[..., 0], 0 * x[..., 0]], -1),
        f=f, g=lambda x: x[..., 0].copy(),
        laplacian_boundary_g=lambda x: -x[..., 0],
        homogeneous=False,
        description=f"u = x, g = x, f variant {f_variant}",
    )


def disk_paraboloid(manifold=None):
    m = manifold or Disk()
    r2 = m.radius**2
    return TestProblem(
        name="paraboloid", manifold=m,
        u_exact=lambda x: r2 - x[..., 0] ** 2 - x[..., 1] ** 2,
        grad_u=lambda x: -2.0 * x,
        f=lambda x: np.full(x.shape[:-1], 4.0),
        g=_zero, laplacian_boundary_g=_zero,
        description="u = R^2 - x^2 - y^2, f = 4",
    )


def disk_bump(manifold=None):
    m = manifold or Disk()
    r2 = m.radius**2

    def grad(x):
        a = r2 - _dot(x, x)
        e = np.exp(x[..., 0])
        return np.stack([(a - 2 * x[..., 0]) * e, -2 * x[..., 1] * e], -1)

    return TestProblem(
        name="bump", manifold=m,
        u_exact=lambda x: (r2 - _dot(x, x)) * np.exp(x[..., 0]),
        grad_u=grad,
        f=lambda x: np.exp(x[..., 0]) * (4 + 4 * x[..., 0] - (r2 - _dot(x, x))),
        g=_zero, laplacian_boundary_g=_zero,
        description="u = (R^2 - r^2) exp(x)",
    )


def disk_linear(manifold=None):
    m = manifold or Disk()
    r2 = m.radius**2
    return TestProblem(
        name="x", manifold=m,
        u_exact=lambda x: x[..., 0].copy(),
        grad_u=lambda x: np.stack([np.ones_like(x[..., 0]), 0 * x[..., 0]], -1),
        f=_zero, g=lambda x: x[..., 0].copy(),
        laplacian_boundary_g=lambda x: -x[..., 0] / r2,
        homogeneous=False,
        description="u = x, f = 0, g = x",
    )


PROBLEMS = {
    ("hemisphere", "z2"): hemisphere_z2,
    ("hemisphere", "x"): hemisphere_x,
    ("hemisphere", "x_printed_f"): lambda manifold=None: hemisphere_x("printed", manifold),
    ("disk", "paraboloid"): disk_paraboloid,
    ("disk", "bump"): disk_bump,
    ("disk", "x"): disk_linear,
}


def get_problem(manifold, name):
    """Look up a test problem by manifold (name or instance) and identifier."""
    if isinstance(manifold, str):
        manifold = make_manifold(manifold)
    try:
        factory = PROBLEMS[(manifold.name, name)]
    except KeyError:
        names = sorted(p for mm, p in PROBLEMS if mm == manifold.name)
        raise ConfigurationError(f"unknown problem {name!r} on {manifold.name}; choose from {names}") from None
    return factory(manifold=manifold)


# ---------------------------------------------------------------------------
# point clouds
# ---------------------------------------------------------------------------

@dataclass
class PointCloud:
    """Interior samples with area weights, boundary samples with length weights.

    Boundary rows also carry the outward conormal and ``kappa_n``.
    """

    interior: np.ndarray
    area_weights: np.ndarray
    boundary: np.ndarray
    length_weights: np.ndarray
    conormals: np.ndarray
    kappa: np.ndarray
    seed: Optional[int] = None
    delta: Optional[float] = None
    manifold: Optional[ParametricManifold] = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.interior)

    @property
    def m_b(self):
        return len(self.boundary)

    def to_dict(self):
        d = {
            "delta": self.delta,
            "seed": self.seed,
            "manifold": self.manifold.name if self.manifold is not None else None,
            "ambient_dim": int(self.interior.shape[1]),
            "interior": np.column_stack([self.interior, self.area_weights]).tolist(),
            "boundary": np.column_stack(
                [self.boundary, self.length_weights, self.conormals, self.kappa]).tolist(),
        }
        if self.manifold is not None and isinstance(self.manifold, Disk):
            d["radius"] = self.manifold.radius
        d.update({k: v for k, v in self.meta.items() if k not in d})
        return d

    def to_json(self, path=None, **extra):
        doc = self.to_dict()
        doc.update(extra)
        text = json.dumps(doc)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, doc):
        interior = np.asarray(doc["interior"], dtype=float)
        boundary = np.asarray(doc["boundary"], dtype=float)
        d = interior.shape[1] - 1
        if boundary.shape[1] != 2 * d + 2:
            raise ConfigurationError("boundary rows must hold position, weight, conormal and kappa")
        manifold = None
        if doc.get("manifold"):
            kw = {"radius": doc["radius"]} if doc["manifold"] == "disk" and "radius" in doc else {}
            manifold = make_manifold(doc["manifold"], **kw)
        meta = {k: doc[k] for k in ("mode", "weight_mode") if k in doc}
        return cls(
            interior=interior[:, :d], area_weights=interior[:, d],
            boundary=boundary[:, :d], length_weights=boundary[:, d],
            conormals=boundary[:, d + 1:2 * d + 1], kappa=boundary[:, 2 * d + 1],
            seed=doc.get("seed"), delta=doc.get("delta"), manifold=manifold, meta=meta,
        )

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_csv(self, prefix, header_comment=None):
        """Write ``<prefix>_interior.csv`` and ``<prefix>_boundary.csv``."""
        d = self.interior.shape[1]
        axes = "xyz"[:d]
        paths = []
        for suffix, cols, rows in (
            ("interior", list(axes) + ["A"], np.column_stack([self.interior, self.area_weights])),
            ("boundary", list(axes) + ["L"] + ["n" + a for a in axes] + ["kappa"],
             np.column_stack([self.boundary, self.length_weights, self.conormals, self.kappa])),
        ):
            path = f"{prefix}_{suffix}.csv"
            with open(path, "w", newline="") as fh:
                if header_comment:
                    fh.write(f"# {header_comment}\n")
                w = csv.writer(fh)
                w.writerow(cols)
                w.writerows(rows.tolist())
            paths.append(path)
        return paths


def _clip(poly, a, b):
    """Clip a convex polygon to the half-plane ``a . w <= b``."""
    s = poly @ a - b
    inside = s <= 0
    if inside.all():
        return poly
    if not inside.any():
        return poly[:0]
    out = []
    nv = len(poly)
    for i in range(nv):
        j = (i + 1) % nv
        if inside[i]:
            out.append(poly[i])
        if inside[i] != inside[j]:
            out.append(poly[i] + s[i] / (s[i] - s[j]) * (poly[j] - poly[i]))
    return np.array(out)


def _polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(x @ np.roll(y, -1) - y @ np.roll(x, -1))


def voronoi_area_weights(points, manifold, k=12):
    """Area of each point's Voronoi cell, built in its tangent plane.

    Neighbors come from a k-nearest-neighbor query and are projected onto the
    tangent plane; the cell is the intersection of bisector half-planes and
    the surface's own tangent half-plane near the boundary.  A cell is
    accepted once every vertex lies within half the distance to the farthest
    neighbor used; otherwise ``k`` is doubled for that point.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    tree = cKDTree(points)
    k0 = min(k, n - 1)
    dists, idx = tree.query(points, k0 + 1)
    e1s, e2s = manifold.tangent_basis(points)
    areas = np.empty(n)
    for i in range(n):
        p, e1, e2 = points[i], e1s[i], e2s[i]
        basis = np.column_stack([e1, e2])
        hp = manifold.tangent_halfplane(p, e1, e2)
        kk, dd, nb = k0, dists[i], idx[i]
        while True:
            w = (points[nb[1:]] - p) @ basis
            big = 2.0 * dd[-1]
            poly = np.array([[-big, -big], [big, -big], [big, big], [-big, big]])
            if hp is not None:
                poly = _clip(poly, hp[0], hp[1])
            for wj in w:
                if len(poly) == 0:
                    break
                poly = _clip(poly, wj, 0.5 * (wj @ wj))
            certified = len(poly) == 0 or 2.0 * np.sqrt((poly**2).sum(axis=1).max()) <= dd[-1]
            if certified or kk >= n - 1:
                break
            kk = min(2 * kk, n - 1)
            dd, nb = tree.query(p, kk + 1)
        areas[i] = _polygon_area(poly)
    return areas


def arc_length_weights(manifold, t):
    """Half the parameter gap to each neighbor along the closed boundary, times the length element."""
    t = np.mod(np.asarray(t, dtype=float), 2 * np.pi)
    order = np.argsort(t)
    ts = t[order]
    gap = np.diff(np.concatenate([ts, [ts[0] + 2 * np.pi]]))
    w = np.empty_like(t)
    w[order] = 0.5 * (gap + np.roll(gap, 1))
    return w * manifold.boundary_length_element(t)


def default_delta(n):
    return (2.0 / n) ** 0.25


def default_boundary_count(n):
    """Boundary sample count used alongside ``n`` interior points (``2 sqrt(2n)``)."""
    return int(round(2.0 * np.sqrt(2.0 * n)))


def sample(manifold, n, m_b, seed=0, mode="random", weight_mode=None, delta=None, k=12):
    """Sample a point cloud on a polar-chart manifold.

    ``mode="random"`` draws area-uniform interior points and uniform boundary
    angles from ``seed``; ``mode="lattice"`` uses an equal-area golden-angle
    spiral and equispaced boundary angles.  ``weight_mode`` is ``"voronoi"``
    (default) or ``"uniform"``.
    """
    if n < 16 or m_b < 8:
        raise ConfigurationError(f"need n >= 16 and m_b >= 8, got n={n}, m_b={m_b}")
    if mode not in ("random", "lattice"):
        raise ConfigurationError(f"mode must be 'random' or 'lattice', got {mode!r}")
    weight_mode = weight_mode or "voronoi"
    if weight_mode not in ("uniform", "voronoi"):
        raise ConfigurationError(f"weight_mode must be 'uniform' or 'voronoi', got {weight_mode!r}")

    if mode == "random":
        rng = np.random.default_rng(seed)
        frac = rng.random(n)
        angle = 2 * np.pi * rng.random(n)
        t_b = 2 * np.pi * rng.random(m_b)
    else:
        frac = (np.arange(n) + 0.5) / n
        angle = np.mod(np.arange(n) * GOLDEN_ANGLE, 2 * np.pi)
        t_b = 2 * np.pi * (np.arange(m_b) + 0.5) / m_b
    s = _equal_area_radius(manifold, frac)
    interior = manifold.chart(s, angle)
    boundary = manifold.boundary_chart(t_b)

    if weight_mode == "uniform":
        area_w = np.full(n, manifold.area / n)
        length_w = np.full(m_b, manifold.boundary_length / m_b)
    else:
        area_w = voronoi_area_weights(interior, manifold, k=k)
        length_w = arc_length_weights(manifold, t_b)

    return PointCloud(
        interior=interior, area_weights=area_w, boundary=boundary, length_weights=length_w,
        conormals=manifold.conormal(t_b), kappa=np.atleast_1d(kappa_n(manifold, t_b)),
        seed=seed, delta=default_delta(n) if delta is None else float(delta), manifold=manifold,
        meta={"mode": mode, "weight_mode": weight_mode},
    )


def _equal_area_radius(manifold, frac):
    """Radial chart parameter enclosing area fraction ``frac`` (area-uniform law)."""
    if isinstance(manifold, Hemisphere):
        return np.arccos(1.0 - frac)
    if isinstance(manifold, Disk):
        return manifold.radius * np.sqrt(frac)
    raise ConfigurationError(f"no area-uniform sampler for {manifold.name}")


def sample_hemisphere(n, m_b, seed=0, mode="random", weight_mode=None, delta=None):
    return sample(Hemisphere(), n, m_b, seed, mode, weight_mode, delta)


def sample_disk(n, m_b, seed=0, mode="random", weight_mode=None, delta=None, radius=1.0):
    return sample(Disk(radius), n, m_b, seed, mode, weight_mode, delta)
