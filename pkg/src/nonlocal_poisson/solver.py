"""Solve the reduced system and recover the boundary flux."""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import spsolve

from .assembly import schur_reduce
from .errors import ConfigurationError, NonConvergenceError

DENSE_LIMIT = 1024


@dataclass
class SolveResult:
    """Interior values ``u``, boundary flux ``v`` and solver diagnostics."""

    u: np.ndarray
    v: np.ndarray
    iterations: int
    residual: float
    wall_time: float
    residual_history: list = field(default_factory=list)
    method: str = "cg"

    def to_csv(self, cloud, prefix, header_comment=None):
        """Write ``<prefix>_u.csv`` (interior) and ``<prefix>_v.csv`` (boundary)."""
        d = cloud.interior.shape[1]
        axes = ",".join("xyz"[:d])
        paths = []
        for suffix, pts, vals in (("u", cloud.interior, self.u), ("v", cloud.boundary, self.v)):
            path = f"{prefix}_{suffix}.csv"
            with open(path, "w") as fh:
                if header_comment:
                    fh.write(f"# {header_comment}\n")
                fh.write(f"{axes},{suffix}\n")
                np.savetxt(fh, np.column_stack([pts, vals]), delimiter=",", fmt="%.17g")
            paths.append(path)
        return paths


def pcg(matvec, b, diag, tol=1e-10, max_iter=1000, callback=None):
    """Jacobi-preconditioned conjugate gradients from a zero initial guess.

    Convergence is declared on the true relative residual ``|b - S x| / |b|``;
    when the recursive residual drifts below ``tol`` first, the iteration is
    restarted from the current iterate.

    Returns
    -------
    x, iterations, history
    """
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    history = []
    if bnorm == 0.0:
        return x, 0, [0.0]
    inv_diag = 1.0 / diag
    r = b.copy()
    it = 0
    while it < max_iter:
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        while it < max_iter:
            sp = matvec(p)
            alpha = rz / (p @ sp)
            x += alpha * p
            r -= alpha * sp
            it += 1
            res = np.linalg.norm(r) / bnorm
            history.append(res)
            if callback is not None:
                callback(it, res, x)
            if res <= tol:
                break
            z = inv_diag * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = b - matvec(x)
        true_res = np.linalg.norm(r) / bnorm
        if true_res <= tol:
            history[-1] = true_res
            return x, it, history
    raise NonConvergenceError(
        f"conjugate gradients did not reach tol={tol:g} in {max_iter} iterations "
        f"(last residual {history[-1]:.3e})", history)


def solve(system, tol=1e-10, max_iter=None, method="cg", callback=None):
    """Solve the coupled system through its Schur complement.

    Parameters
    ----------
    system : DiscreteSystem
    tol : float
        Relative residual target for the reduced system.
    max_iter : int, optional
        Iteration cap, ``10 n`` by default.
    method : {"cg", "direct"}
        ``"direct"`` uses a dense Cholesky factorization when ``n <= 1024``
        and a sparse LU otherwise.
    callback : callable, optional
        Called as ``callback(iteration, residual, x)`` after every CG step;
        ``x`` is the live iterate and must not be modified.
    """
    start = time.perf_counter()
    schur = schur_reduce(system)
    n = system.n
    b = schur.rhs
    if method == "cg":
        cap = 10 * n if max_iter is None else int(max_iter)
        u, iters, history = pcg(schur.matvec, b, schur.diagonal(), tol, cap, callback)
        residual = history[-1]
    elif method == "direct":
        if n <= DENSE_LIMIT:
            u = linalg.cho_solve(linalg.cho_factor(schur.toarray()), b)
        else:
            u = spsolve(schur.tosparse().tocsc(), b)
        bnorm = np.linalg.norm(b)
        residual = float(np.linalg.norm(b - schur.matvec(u)) / bnorm) if bnorm else 0.0
        iters, history = 1, [residual]
    else:
        raise ConfigurationError(f"method must be 'cg' or 'direct', got {method!r}")
    v = schur.recover_flux(u)
    return SolveResult(u=u, v=v, iterations=iters, residual=float(residual),
                       wall_time=time.perf_counter() - start,
                       residual_history=history, method=method)
