"""Reference quadrature of the continuous nonlocal operators.

Every integral is taken over the support ball ``|x - y| <= 2 delta`` only.
Interior integrals use geodesic-polar coordinates centered at ``x``: the
support edge becomes the line ``rho = rho_max`` and the surface boundary a
curve ``rho = rho_exit(alpha)``, so the integrand is smooth on every
Gauss-Legendre panel and the rule converges spectrally.  Boundary integrals
are Gauss-Legendre rules on the arc of the boundary inside the ball.
"""

from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import identity_residual, kappa_n
from .kernels import KernelFamily

OPERATORS = ("L", "G", "D", "P", "Q", "S", "Rtilde", "Ptilde")
_INTERIOR_OPS = {"L", "G", "P", "S"}


@lru_cache(maxsize=64)
def _gl(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n, a, b):
    """``n``-point rule on ``[a, b]``; ``a`` and ``b`` may be arrays (nodes on the last axis)."""
    x, w = _gl(n)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


class QuadratureGrid:
    """Quadrature nodes on a manifold at a given resolution.

    ``resolution`` is the number of nodes per unit parameter length.  The
    global rules (``interior_nodes``/``boundary_nodes``) use Gauss-Legendre
    panels in the radial chart parameter and the trapezoid rule in the
    periodic angle; the local rules around a point scale the same density
    onto the kernel support.
    """

    def __init__(self, manifold, resolution=400, panel_order=8, min_nodes=24):
        if resolution <= 0:
            raise ConfigurationError("resolution must be positive")
        self.manifold = manifold
        self.resolution = resolution
        self.panel_order = panel_order
        self.min_nodes = min_nodes
        self._interior = None
        self._boundary = None

    def _count(self, length):
        return max(self.min_nodes, int(np.ceil(self.resolution * length / 4.0)))

    # --- global rules ------------------------------------------------------
    def interior_nodes(self):
        if self._interior is None:
            m = self.manifold
            a = m.radial_extent
            n_pan = max(1, int(np.ceil(self.resolution * a / self.panel_order)))
            edges = np.linspace(0.0, a, n_pan + 1)
            s, ws = gauss_legendre(self.panel_order, edges[:-1], edges[1:])
            s, ws = s.ravel(), ws.ravel()
            nt = int(np.ceil(self.resolution * 2 * np.pi))
            t = 2 * np.pi * np.arange(nt) / nt
            S, T = np.meshgrid(s, t, indexing="ij")
            W = ws[:, None] * (2 * np.pi / nt) * m.area_element(S, T)
            self._interior = (m.chart(S, T).reshape(-1, m.ambient_dim), W.ravel())
        return self._interior

    def boundary_nodes(self, count=None):
        m = self.manifold
        nt = count or int(np.ceil(self.resolution * 2 * np.pi))
        t = 2 * np.pi * np.arange(nt) / nt
        w = (2 * np.pi / nt) * m.boundary_length_element(t)
        return t, m.boundary_chart(t), w

    # --- local rules -------------------------------------------------------
    def local_interior(self, x, ambient_radius):
        """Nodes and weights covering ``{y in M : |x - y| <= ambient_radius}``."""
        m = self.manifold
        x = np.asarray(x, dtype=float)
        rho_max = m.geodesic_radius(ambient_radius)
        e1, e2 = m.tangent_basis(x)
        breaks = sorted(np.mod(b, 2 * np.pi) for b in m.ray_breakpoints(x, e1, e2, rho_max))
        n_rho = self._count(rho_max)
        if not breaks:
            n_a = self._count(2 * np.pi * rho_max)
            alpha = 2 * np.pi * np.arange(n_a) / n_a
            w_alpha = np.full(n_a, 2 * np.pi / n_a)
        else:
            edges = np.array(breaks + [breaks[0] + 2 * np.pi])
            alpha, w_alpha = [], []
            for lo, hi in zip(edges[:-1], edges[1:]):
                if hi - lo < 1e-14:
                    continue
                a_k, w_k = gauss_legendre(self._count((hi - lo) * rho_max), lo, hi)
                alpha.append(a_k)
                w_alpha.append(w_k)
            alpha = np.concatenate(alpha)
            w_alpha = np.concatenate(w_alpha)
        top = np.minimum(rho_max, m.ray_exit(x, e1, e2, alpha))
        keep = top > 0
        alpha, w_alpha, top = alpha[keep], w_alpha[keep], top[keep]
        rho, w_rho = gauss_legendre(n_rho, np.zeros_like(top), top)
        weights = w_alpha[:, None] * w_rho * m.polar_jacobian(rho)
        pts = m.polar_map(x, e1, e2, rho, np.broadcast_to(alpha[:, None], rho.shape))
        return pts.reshape(-1, m.ambient_dim), weights.ravel()

    def local_boundary(self, x, ambient_radius):
        """Boundary nodes within ``ambient_radius`` of each row of ``x``.

        Returns ``(t, points, weights)`` with shapes ``(N, k)``, ``(N, k, d)``
        and ``(N, k)``; rows with no boundary in range get zero weights.
        """
        m = self.manifold
        x = np.atleast_2d(np.asarray(x, dtype=float))
        center, half = m.boundary_arc(x, ambient_radius)
        k = self._count(2 * np.max(np.clip(half, 0, np.pi)) * m.radial_extent)
        full = half >= np.pi
        lo = np.where(full, -np.pi, center - np.clip(half, 0, None))
        hi = np.where(full, np.pi, center + np.clip(half, 0, None))
        t, w = gauss_legendre(k, lo, hi)
        if np.any(full):
            t_tr = -np.pi + 2 * np.pi * np.arange(k) / k
            t[full] = t_tr
            w[full] = 2 * np.pi / k
        w = np.where((half < 0)[:, None], 0.0, w) * m.boundary_length_element(t)
        return t, m.boundary_chart(t), w


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != d:
        raise DomainError(f"points must have {d} coordinates")
    return x, single


def _resolve_kernel(kernel, delta, manifold):
    if kernel is None:
        return KernelFamily(delta, manifold.intrinsic_dim)
    if abs(kernel.delta - delta) > 1e-15 * max(1.0, delta):
        raise ConfigurationError(f"kernel delta {kernel.delta} does not match {delta}")
    return kernel


def apply_operator(which, x, delta, grid, field=None, kernel=None):
    """Evaluate one of the nonlocal operators at ``x`` by reference quadrature.

    Parameters
    ----------
    which : {"L", "G", "D", "P", "Q", "S", "Rtilde", "Ptilde"}
    x : array, shape (d,) or (N, d)
        Evaluation point(s); on the surface for L, G, P, S and on its
        boundary for D, Q, Rtilde, Ptilde.
    delta : float
    grid : QuadratureGrid
    field : callable, optional
        Ambient scalar field the operator acts on: ``u`` for L and D, the
        boundary flux for G, ``f`` for P and Q, the boundary Laplacian of
        ``g`` for S.  Rtilde and Ptilde take none.
    kernel : KernelFamily, optional
        Defaults to the cosine kernel at ``delta``.
    """
    if which not in OPERATORS:
        raise ConfigurationError(f"unknown operator {which!r}; choose from {OPERATORS}")
    m = grid.manifold
    xs, single = _as_points(x, m.ambient_dim)
    region = m.contains(xs, 1e-9) if which in _INTERIOR_OPS else m.on_boundary(xs, 1e-9)
    if not np.all(region):
        where = "the surface" if which in _INTERIOR_OPS else "the boundary"
        raise DomainError(f"operator {which} must be evaluated on {where}")
    if field is None and which not in ("Rtilde", "Ptilde"):
        raise ConfigurationError(f"operator {which} needs a field")
    ker = _resolve_kernel(kernel, delta, m)
    radius = 2.0 * delta

    out = np.empty(len(xs))
    if which in ("G", "S"):
        out[:] = _boundary_term(which, xs, grid, ker, radius, field)
    elif which == "P":
        out[:] = _boundary_term("Pb", xs, grid, ker, radius, field)
        for i, xi in enumerate(xs):
            y, w = grid.local_interior(xi, radius)
            out[i] += np.sum(field(y) * ker.eval_scaled(1, xi, y) * w)
    else:
        if which in ("D", "Rtilde", "Ptilde"):
            normals = m.conormal_at(xs)
            kap = np.atleast_1d(m.kappa_n_at(xs))
        for i, xi in enumerate(xs):
            y, w = grid.local_interior(xi, radius)
            if which == "L":
                val = np.sum((field(xi[None])[0] - field(y)) * ker.eval_scaled(0, xi, y) * w) / delta**2
            elif which == "Q":
                val = -2.0 * delta**2 * np.sum(field(y) * ker.eval_scaled(2, xi, y) * w)
            else:
                proj = (xi - y) @ normals[i]
                rbar = ker.eval_scaled(1, xi, y) * w
                if which == "D":
                    val = np.sum(field(y) * (2.0 - kap[i] * proj) * rbar)
                elif which == "Ptilde":
                    val = np.sum((2.0 - kap[i] * proj) * rbar)
                else:
                    _, yb, wb = grid.local_boundary(xi, radius)
                    val = 4.0 * delta**2 * np.sum(ker.eval_scaled(2, xi, yb[0]) * wb[0])
                    val -= kap[i] * np.sum(proj**2 * rbar)
            out[i] = val
    return float(out[0]) if single else out


def _boundary_term(which, xs, grid, ker, radius, field, chunk=4096):
    m = grid.manifold
    out = np.empty(len(xs))
    for start in range(0, len(xs), chunk):
        xc = xs[start:start + chunk]
        t, yb, wb = grid.local_boundary(xc, radius)
        diff = xc[:, None, :] - yb
        rbar = ker.scaled_sq(1, np.sum(diff * diff, axis=-1)) * wb
        proj = np.sum(diff * m.conormal(t), axis=-1)
        vals = field(yb)
        if which == "G":
            integrand = vals * (2.0 + np.atleast_1d(kappa_n(m, t)) * proj)
        else:
            integrand = -proj * vals
        out[start:start + chunk] = np.sum(integrand * rbar, axis=1)
    return out


def truncation_interior(problem, delta, x, grid, kernel=None):
    """Residual of the exact solution in the interior equation.

    ``L u - G (du/dn) - P f`` (minus ``S`` applied to the boundary Laplacian of
    ``g`` when the data are non-homogeneous).
    """
    val = (apply_operator("L", x, delta, grid, problem.u_exact, kernel)
           - apply_operator("G", x, delta, grid, problem.du_dn_exact, kernel)
           - apply_operator("P", x, delta, grid, problem.f, kernel))
    if not problem.homogeneous:
        val = val - apply_operator("S", x, delta, grid, problem.laplacian_boundary_g, kernel)
    return val


def truncation_boundary(problem, delta, x, grid, kernel=None):
    """Residual of the exact solution in the boundary equation.

    ``D u + Rtilde du/dn - Q f`` (minus ``Ptilde g`` for non-homogeneous data).
    """
    xs = np.asarray(x, dtype=float)
    val = (apply_operator("D", xs, delta, grid, problem.u_exact, kernel)
           + apply_operator("Rtilde", xs, delta, grid, kernel=kernel) * problem.du_dn_exact(xs)
           - apply_operator("Q", xs, delta, grid, problem.f, kernel))
    if not problem.homogeneous:
        val = val - apply_operator("Ptilde", xs, delta, grid, kernel=kernel) * problem.g(xs)
    return val


def decay_slope(value_coarse, value_fine, delta_coarse, delta_fine):
    """Two-point log-log slope ``log(v1/v2) / log(d1/d2)``."""
    return float(np.log(value_coarse / value_fine) / np.log(delta_coarse / delta_fine))


def interior_probes(manifold, min_distance, count=8):
    """Deterministic probe points at geodesic distance >= ``min_distance`` from the boundary."""
    s_max = manifold.radial_extent - min_distance
    if s_max < 0:
        raise ConfigurationError("no interior points that far from the boundary")
    s = np.linspace(0.0, s_max, count)
    t = np.mod(np.arange(count) * 2.399963229728653, 2 * np.pi)
    return manifold.chart(s, t)


def interior_residual_rms(problem, delta, grid, probes, kernel=None):
    return float(np.sqrt(np.mean(truncation_interior(problem, delta, probes, grid, kernel) ** 2)))


def boundary_residual_l2(problem, delta, grid, count=64, kernel=None):
    """L2 norm of the boundary residual along the boundary (trapezoid in the angle)."""
    _, pts, w = grid.boundary_nodes(count)
    r = truncation_boundary(problem, delta, pts, grid, kernel)
    return float(np.sqrt(np.sum(r**2 * w)))


def adjointness_gap(grid, delta, w_field, s_field, kernel=None):
    """Compare ``int_M w G s`` with ``int_dM s D w`` on the global grid.

    Returns a dict with both integrals, their absolute gap and the product of
    the L2 norms of ``w`` and ``s`` used as scale.
    """
    m = grid.manifold
    ker = _resolve_kernel(kernel, delta, m)
    pts, wts = grid.interior_nodes()
    _, half = m.boundary_arc(pts, 2 * delta)
    layer = half >= 0
    g_s = apply_operator("G", pts[layer], delta, grid, s_field, ker)
    lhs = float(np.sum(w_field(pts[layer]) * g_s * wts[layer]))
    _, bpts, bw = grid.boundary_nodes()
    d_w = apply_operator("D", bpts, delta, grid, w_field, ker)
    rhs = float(np.sum(s_field(bpts) * d_w * bw))
    scale = float(np.sqrt(np.sum(w_field(pts) ** 2 * wts)) * np.sqrt(np.sum(s_field(bpts) ** 2 * bw)))
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs), "scale": scale}


def verification_report(problem, deltas=(0.2, 0.1), resolution=400, identity_points=32,
                        identity_step=1e-3, boundary_count=64, adjoint_resolution=None):
    """Numeric checks of the model's identities and truncation decay.

    Returns a JSON-ready dict with the boundary identity residuals, the
    two-point decay slopes of the interior and boundary residuals, and the
    adjointness gap between the flux operators.
    """
    m = problem.manifold
    grid = QuadratureGrid(m, resolution)
    t = 2 * np.pi * np.arange(identity_points) / identity_points
    ident = np.atleast_1d(identity_residual(problem, t, identity_step))

    d1, d2 = deltas
    probes = interior_probes(m, 2 * max(deltas) * 1.25)
    rin = [interior_residual_rms(problem, d, grid, probes) for d in (d1, d2)]
    rbd = [boundary_residual_l2(problem, d, grid, boundary_count) for d in (d1, d2)]

    if m.ambient_dim == 3:
        w_field = lambda x: np.cos(x[..., 0]) + x[..., 1] * x[..., 2]
        s_field = lambda x: 1.0 + 0.5 * np.sin(3 * np.arctan2(x[..., 1], x[..., 0]))
    else:
        w_field = lambda x: np.cos(x[..., 0]) + x[..., 1] ** 2
        s_field = lambda x: 1.0 + 0.5 * np.sin(3 * np.arctan2(x[..., 1], x[..., 0]))
    adj_grid = QuadratureGrid(m, adjoint_resolution or resolution)
    adj = adjointness_gap(adj_grid, d2, w_field, s_field)

    return {
        "manifold": m.name,
        "problem": problem.name,
        "deltas": list(deltas),
        "resolution": resolution,
        "identity_residuals": ident.tolist(),
        "identity_residual_max": float(ident.max()),
        "rin_rms": rin,
        "rin_slope": decay_slope(rin[0], rin[1], d1, d2),
        "rbd_l2": rbd,
        "rbd_slope": decay_slope(rbd[0], rbd[1], d1, d2),
        "adjointness_gap": adj["gap"],
        "adjointness_relative_gap": adj["gap"] / adj["scale"],
        "adjointness": adj,
    }
