"""Discrete coupled system on a weighted point cloud.

Unknowns are ``u_i`` at interior samples ``p_i`` (weights ``A_i``) and the
flux ``v_l`` at boundary samples ``q_l`` (weights ``L_l``).  The system is::

    sum_j L^{ij} (u_i - u_j)  -  sum_k G^{ik} v_k  =  f1_i + g1_i
    sum_j D^{lj} u_j          +  Rt^l v_l          =  f2_l + g2_l

with every coefficient a kernel sum over pairs closer than ``2 delta``.
"""

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.io import mmwrite
from scipy.spatial import cKDTree

from .errors import ConfigurationError, SingularReductionError
from .kernels import KernelFamily

# rows of interior points processed per neighbour query, bounds peak memory
_CHUNK = 2048


class AssemblyWarning(UserWarning):
    """A sample has no neighbour inside the kernel support."""


@dataclass
class DiscreteSystem:
    """Blocks and right-hand sides of the discrete system.

    ``L_block`` is stored in Laplacian form: off-diagonal ``-R_ij A_j / delta^2``
    and diagonal equal to the sum over ``j != i`` of ``R_ij A_j / delta^2``,
    so ``L_block @ u`` realises ``sum_j L^{ij} (u_i - u_j)``.
    """

    L_block: sparse.csr_matrix
    G_block: sparse.csr_matrix
    D_block: sparse.csr_matrix
    Rtilde_diag: np.ndarray
    rhs_interior: np.ndarray
    rhs_boundary: np.ndarray
    cloud: object
    kernel: KernelFamily
    f1: np.ndarray = None
    f2: np.ndarray = None
    g1: np.ndarray = None
    g2: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def delta(self):
        return self.kernel.delta

    @property
    def n(self):
        return self.L_block.shape[0]

    @property
    def m_b(self):
        return self.G_block.shape[1]

    def block_residuals(self, u, v):
        """Relative residuals of both block equations at ``(u, v)``."""
        r1 = self.L_block @ u - self.G_block @ v - self.rhs_interior
        r2 = self.D_block @ u + self.Rtilde_diag * v - self.rhs_boundary
        s1 = max(np.linalg.norm(self.rhs_interior), np.linalg.norm(self.L_block @ u), 1e-300)
        s2 = max(np.linalg.norm(self.rhs_boundary), np.linalg.norm(self.Rtilde_diag * v), 1e-300)
        return np.linalg.norm(r1) / s1, np.linalg.norm(r2) / s2

    def export(self, out_dir, config=None, prefix="system"):
        """Write each block as Matrix Market, rhs vectors as CSV, plus a JSON manifest."""
        os.makedirs(out_dir, exist_ok=True)
        comment = "config: " + json.dumps(config or {}, sort_keys=True)
        files = {}
        for name, mat in (("L", self.L_block), ("G", self.G_block), ("D", self.D_block),
                          ("Rtilde", sparse.diags(self.Rtilde_diag).tocsr())):
            path = os.path.join(out_dir, f"{prefix}_{name}.mtx")
            mmwrite(path, mat, comment=comment)
            files[name] = os.path.basename(path)
        for name, vec in (("rhs_interior", self.rhs_interior), ("rhs_boundary", self.rhs_boundary)):
            path = os.path.join(out_dir, f"{prefix}_{name}.csv")
            with open(path, "w") as fh:
                fh.write(f"# {comment}\n{name}\n")
                np.savetxt(fh, vec, fmt="%.17g")
            files[name] = os.path.basename(path)
        manifest = {
            "n": self.n, "m_b": self.m_b, "delta": self.delta,
            "files": files, "meta": self.meta, "config": config or {},
        }
        path = os.path.join(out_dir, f"{prefix}_manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        return path


def _pairs(tree_a, tree_b, radius):
    """All ``(i, j, dist)`` with ``|a_i - b_j| <= radius``, sorted by ``(i, j)``."""
    rec = tree_a.sparse_distance_matrix(tree_b, radius, output_type="ndarray")
    order = np.lexsort((rec["j"], rec["i"]))
    rec = rec[order]
    return rec["i"].astype(np.int64), rec["j"].astype(np.int64), rec["v"]


def _eval_data(fn, pts):
    vals = np.asarray(fn(pts), dtype=float)
    return np.broadcast_to(vals, (len(pts),)).copy()


def assemble(cloud, kernel=None, problem=None):
    """Build all blocks and right-hand sides from a point cloud.

    Parameters
    ----------
    cloud : PointCloud
    kernel : KernelFamily, optional
        Defaults to the cosine kernel at ``cloud.delta``.
    problem : TestProblem, optional
        Supplies ``f``, ``g`` and the boundary Laplacian of ``g``.  ``None``
        means zero data.

    Returns
    -------
    DiscreteSystem
    """
    if kernel is None:
        if cloud.delta is None:
            raise ConfigurationError("cloud has no delta and no kernel was given")
        kernel = KernelFamily(cloud.delta, 2)
    if cloud.delta is not None and not np.isclose(cloud.delta, kernel.delta, rtol=1e-12, atol=0):
        raise ConfigurationError(f"cloud delta {cloud.delta!r} differs from kernel delta {kernel.delta!r}")

    delta = kernel.delta
    P, A = np.asarray(cloud.interior, float), np.asarray(cloud.area_weights, float)
    Q, Lw = np.asarray(cloud.boundary, float), np.asarray(cloud.length_weights, float)
    N, kap = np.asarray(cloud.conormals, float), np.asarray(cloud.kappa, float)
    n, m = len(P), len(Q)
    if A.shape != (n,) or Lw.shape != (m,) or N.shape != Q.shape or kap.shape != (m,):
        raise ConfigurationError("point cloud arrays have inconsistent shapes")

    if problem is None:
        f_p, f_q = np.zeros(n), np.zeros(m)
        g_q, lapg_q = np.zeros(m), np.zeros(m)
        homogeneous = True
    else:
        f_p, f_q = _eval_data(problem.f, P), _eval_data(problem.f, Q)
        g_q = _eval_data(problem.g, Q)
        lapg_q = _eval_data(problem.laplacian_boundary_g, Q)
        homogeneous = bool(problem.homogeneous)

    radius = 2.0 * delta
    tree_p, tree_q = cKDTree(P), cKDTree(Q)

    # interior-interior: L block and the interior part of f1
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    f1 = np.zeros(n)
    neighbours = np.zeros(n, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        i, j, d = _pairs(cKDTree(P[start:stop]), tree_p, radius)
        i += start
        d2 = d * d
        rbar = kernel.scaled_sq(1, d2)
        np.add.at(f1, i, f_p[j] * rbar * A[j])
        off = i != j
        i, j, w = i[off], j[off], kernel.scaled_sq(0, d2[off]) * A[j[off]] / delta**2
        keep = w != 0.0
        i, j, w = i[keep], j[keep], w[keep]
        np.add.at(diag, i, w)
        np.add.at(neighbours, i, 1)
        rows.append(i)
        cols.append(j)
        vals.append(-w)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    L_block = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    L_block.sort_indices()

    # interior-boundary: G, D, the boundary sum of f1, g1 and the interior sum of Rtilde
    i, k, d = _pairs(tree_p, tree_q, radius)
    d2 = d * d
    rbar = kernel.scaled_sq(1, d2)
    rbbar = kernel.scaled_sq(2, d2)
    diff_pq = P[i] - Q[k]
    proj_y = np.einsum("ij,ij->i", diff_pq, N[k])          # (p_i - q_k) . n_k
    proj_x = np.einsum("ij,ij->i", Q[k] - P[i], N[k])      # (q_k - p_i) . n_k
    g_vals = (2.0 + kap[k] * proj_y) * rbar * Lw[k]
    d_vals = (2.0 - kap[k] * proj_x) * rbar * A[i]
    G_block = sparse.csr_matrix((g_vals, (i, k)), shape=(n, m))
    D_block = sparse.csr_matrix((d_vals, (k, i)), shape=(m, n))
    G_block.sort_indices()
    D_block.sort_indices()

    f1 -= np.bincount(i, weights=proj_y * f_q[k] * rbar * Lw[k], minlength=n)
    g1 = -np.bincount(i, weights=proj_y * lapg_q[k] * rbar * Lw[k], minlength=n)
    f2 = -2.0 * delta**2 * np.bincount(k, weights=f_p[i] * rbbar * A[i], minlength=m)
    g2 = g_q * np.bincount(k, weights=(2.0 - kap[k] * proj_x) * rbar * A[i], minlength=m)
    r_int = np.bincount(k, weights=kap[k] * proj_x**2 * rbar * A[i], minlength=m)
    b_touch = np.bincount(k, minlength=m)

    # boundary-boundary: first sum of Rtilde
    l, kk, d = _pairs(tree_q, tree_q, radius)
    r_bd = 4.0 * delta**2 * np.bincount(l, weights=kernel.scaled_sq(2, d * d) * Lw[kk], minlength=m)
    Rtilde = r_bd - r_int

    if homogeneous:
        g1 = np.zeros(n)
        g2 = np.zeros(m)

    meta = {"nnz_L": int(L_block.nnz), "nnz_G": int(G_block.nnz),
            "mean_neighbours": float(neighbours.mean()) if n else 0.0, "warnings": []}
    isolated = np.flatnonzero(neighbours == 0)
    if isolated.size:
        msg = f"{isolated.size} interior point(s) have no neighbour within 2*delta"
        meta["warnings"].append(msg)
        warnings.warn(msg, AssemblyWarning, stacklevel=2)
    meta["isolated_interior"] = isolated.tolist()
    lonely = np.flatnonzero(b_touch == 0)
    if lonely.size:
        msg = f"{lonely.size} boundary point(s) have no interior neighbour within 2*delta"
        meta["warnings"].append(msg)
        warnings.warn(msg, AssemblyWarning, stacklevel=2)
    meta["isolated_boundary"] = lonely.tolist()

    return DiscreteSystem(
        L_block=L_block, G_block=G_block, D_block=D_block, Rtilde_diag=Rtilde,
        rhs_interior=f1 + g1, rhs_boundary=f2 + g2, cloud=cloud, kernel=kernel,
        f1=f1, f2=f2, g1=g1, g2=g2, meta=meta,
    )


def discrete_energy(system, u, v):
    """Energy ``(1/2 delta^2) sum_ij (u_i - u_j)^2 R_ij A_i A_j + sum_l Rt_l v_l^2 L_l``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (system.n,) or v.shape != (system.m_b,):
        raise ConfigurationError(
            f"expected u of length {system.n} and v of length {system.m_b}, got {u.shape} and {v.shape}")
    A = system.cloud.area_weights
    coo = system.L_block.tocoo()
    off = coo.row != coo.col
    i, j = coo.row[off], coo.col[off]
    # -L_ij A_i = R_ij A_i A_j / delta^2
    bulk = 0.5 * np.sum((u[i] - u[j]) ** 2 * (-coo.data[off]) * A[i])
    return float(bulk + np.sum(system.Rtilde_diag * v * v * system.cloud.length_weights))


class SchurComplement:
    """Reduced operator on ``u`` after eliminating the boundary flux.

    ``S = D_A (L + G diag(1/Rt) D)`` with ``D_A = diag(A)``.  The weighted
    adjointness ``A_i G_ik = L_k D_ki`` makes this equal to
    ``D_A L + B diag(1/(L Rt)) B^T`` with ``B = D_A G``, which is symmetric.
    """

    def __init__(self, system):
        rt = np.asarray(system.Rtilde_diag, dtype=float)
        if np.any(~(rt > 0)):
            bad = np.flatnonzero(~(rt > 0))
            raise SingularReductionError(
                f"Rtilde has {bad.size} nonpositive entries (first at boundary index {bad[0]})")
        self.system = system
        self.A = np.asarray(system.cloud.area_weights, dtype=float)
        self.inv_rt = 1.0 / rt
        self.rhs = self.A * (system.rhs_interior + system.G_block @ (system.rhs_boundary * self.inv_rt))
        self.shape = (system.n, system.n)

    def matvec(self, u):
        s = self.system
        return self.A * (s.L_block @ u + s.G_block @ ((s.D_block @ u) * self.inv_rt))

    __call__ = matvec

    def diagonal(self):
        s = self.system
        coupling = (s.G_block @ sparse.diags(self.inv_rt)).multiply(s.D_block.T).sum(axis=1)
        return self.A * (s.L_block.diagonal() + np.asarray(coupling).ravel())

    def tosparse(self):
        s = self.system
        inner = s.L_block + s.G_block @ sparse.diags(self.inv_rt) @ s.D_block
        return (sparse.diags(self.A) @ inner).tocsr()

    def toarray(self):
        return self.tosparse().toarray()

    def recover_flux(self, u):
        s = self.system
        return (s.rhs_boundary - s.D_block @ u) * self.inv_rt


def schur_reduce(system):
    """Eliminate the flux unknown; returns a :class:`SchurComplement` carrying ``rhs``."""
    return SchurComplement(system)
