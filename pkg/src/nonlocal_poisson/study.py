"""Error metrics, convergence rates and full convergence studies."""

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .assembly import assemble
from .errors import ConfigurationError, MetricError
from .geometry import default_boundary_count, default_delta, sample
from .kernels import KernelFamily
from .solver import solve

# a norm below this is treated as zero when forming relative errors
ZERO_NORM = 1e-12

CSV_FIELDS = ("n", "m_b", "delta", "e2", "rate", "e2b", "rate_b", "seed")

# Published convergence tables: (n, m_b, delta as printed, e2, rate, e2b, rate_b).
# Rates of the first row are undefined.
PUBLISHED_HOMOGENEOUS = (
    (512, 64, 0.250, 0.0158, None, 0.0862, None),
    (1250, 100, 0.200, 0.0099, 2.0950, 0.0353, 4.0010),
    (2592, 144, 0.167, 0.0078, 1.3076, 0.0122, 5.8273),
    (4802, 196, 0.143, 0.0056, 2.1496, 0.0089, 2.0460),
    (8192, 256, 0.125, 0.0040, 2.5198, 0.0071, 1.6922),
    (13122, 324, 0.111, 0.0033, 1.6333, 0.0067, 0.4923),
    (20000, 400, 0.100, 0.0026, 2.2628, 0.0050, 2.7778),
    (29282, 484, 0.091, 0.0020, 2.7527, 0.0045, 1.1054),
)
PUBLISHED_NONHOMOGENEOUS = (
    (512, 64, 0.250, 0.0409, None, 0.0538, None),
    (1250, 100, 0.200, 0.0299, 1.4039, 0.0250, 3.4345),
    (2592, 144, 0.125, 0.0188, 2.5450, 0.0107, 4.6546),
    (4802, 196, 0.143, 0.0132, 2.2941, 0.0089, 1.1949),
    (8192, 256, 0.125, 0.0080, 3.7502, 0.0055, 3.6044),
    (13122, 324, 0.111, 0.0066, 1.6333, 0.0039, 2.9187),
    (20000, 400, 0.100, 0.0054, 1.9046, 0.0036, 0.7597),
    (29282, 484, 0.909, 0.0043, 2.3899, 0.0027, 3.1084),
)
# fitted lines log e = slope * log delta + intercept
PUBLISHED_FITS = {
    "homogeneous": {"interior": (2.0, -1.34), "boundary": (1.5, -1.75)},
    "nonhomogeneous": {"interior": (2.0, -0.50), "boundary": (1.5, -2.0)},
}
STUDY_N_LIST = tuple(row[0] for row in PUBLISHED_HOMOGENEOUS)


@dataclass
class ConvergenceRecord:
    """One row of a convergence study; rates are ``None`` on the first row."""

    n: int
    m_b: int
    delta: float
    e2: float
    rate: float
    e2b: float
    rate_b: float
    seed: int
    e2b_absolute: bool = False
    iterations: int = 0
    isolated: int = 0


def _weighted_norm(values, weights):
    return float(np.sqrt(np.sum(values * values * weights)))


def error_interior(result, problem, cloud):
    """Relative weighted L2 error of ``u`` at the interior samples."""
    exact = np.asarray(problem.u_exact(cloud.interior), dtype=float)
    u = getattr(result, "u", result)
    den = _weighted_norm(exact, cloud.area_weights)
    if den < ZERO_NORM:
        raise MetricError("exact solution vanishes on the cloud; relative interior error undefined")
    return _weighted_norm(np.asarray(u) - exact, cloud.area_weights) / den


def error_boundary(result, problem, cloud, allow_absolute=False, return_flag=False):
    """Relative weighted L2 error of the flux ``v`` at the boundary samples.

    When the exact flux has norm below ``1e-12`` the relative error is
    undefined: a :class:`MetricError` is raised unless ``allow_absolute`` is
    set, in which case the absolute weighted L2 error is returned.  With
    ``return_flag`` the result is ``(error, is_absolute)``.
    """
    exact = problem.du_dn_exact(cloud.boundary)
    v = getattr(result, "v", result)
    num = _weighted_norm(np.asarray(v) - exact, cloud.length_weights)
    den = _weighted_norm(exact, cloud.length_weights)
    if den >= ZERO_NORM:
        err, absolute = num / den, False
    elif allow_absolute:
        err, absolute = num, True
    else:
        raise MetricError("exact boundary flux vanishes; relative boundary error undefined")
    return (err, absolute) if return_flag else err


def successive_rate(e_prev, e_next, delta_prev, delta_next):
    """Observed order ``log(e_prev / e_next) / log(delta_prev / delta_next)``."""
    vals = (e_prev, e_next, delta_prev, delta_next)
    if not all(np.isfinite(v) and v > 0 for v in vals):
        raise MetricError(f"rates need positive finite inputs, got {vals}")
    if delta_prev == delta_next:
        raise MetricError("rates need two distinct deltas")
    return float(np.log(e_prev / e_next) / np.log(delta_prev / delta_next))


def fit_slope(deltas, errors):
    """Least-squares line ``log e = slope * log delta + intercept`` (natural logs)."""
    deltas = np.asarray(deltas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if deltas.size < 2 or np.any(deltas <= 0) or np.any(errors <= 0):
        raise MetricError("slope fit needs at least two positive (delta, error) pairs")
    slope, intercept = np.polyfit(np.log(deltas), np.log(errors), 1)
    return float(slope), float(intercept)


def table_rates(table, column=3, delta_rule="formula"):
    """Recompute the rate column of a published table.

    ``delta_rule="formula"`` uses ``(2/n)^(1/4)``; ``"printed"`` uses the
    rounded delta column.
    """
    if delta_rule == "formula":
        deltas = [default_delta(row[0]) for row in table]
    elif delta_rule == "printed":
        deltas = [row[2] for row in table]
    else:
        raise ConfigurationError(f"unknown delta_rule {delta_rule!r}")
    errs = [row[column] for row in table]
    return [successive_rate(errs[i], errs[i + 1], deltas[i], deltas[i + 1]) for i in range(len(table) - 1)]


@dataclass
class StudyResult:
    """Records of a study plus fitted slopes and the configuration that produced them."""

    records: list
    slope_interior: float
    intercept_interior: float
    slope_boundary: float
    intercept_boundary: float
    config: dict

    def csv_text(self):
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in self.records:
            writer.writerow([
                r.n, r.m_b, f"{r.delta:.12g}", f"{r.e2:.12g}", _fmt_rate(r.rate),
                f"{r.e2b:.12g}", _fmt_rate(r.rate_b), r.seed])
        return buf.getvalue()

    def summary(self):
        return {
            "slope_interior": self.slope_interior,
            "slope_boundary": self.slope_boundary,
            "intercepts": {"interior": self.intercept_interior, "boundary": self.intercept_boundary},
            "boundary_error_absolute": any(r.e2b_absolute for r in self.records),
            "records": [asdict(r) for r in self.records],
            "config": self.config,
        }

    def write(self, out_dir, stem="study"):
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        json_path = os.path.join(out_dir, f"{stem}_summary.json")
        with open(csv_path, "w") as fh:
            fh.write(self.csv_text())
        with open(json_path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
        return csv_path, json_path


def _fmt_rate(rate):
    return "NA" if rate is None else f"{rate:.12g}"


def worker_count(requested=None):
    """Thread count for study rows, capped by the ``NMP_THREADS`` environment variable."""
    cap = os.environ.get("NMP_THREADS")
    n = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        n = min(n, int(cap))
    return max(1, int(n))


def run_row(problem, n, seed=0, mode="random", weight_mode="voronoi", delta=None, m_b=None,
            tol=1e-10, max_iter=None, profile=None):
    """Sample, assemble, solve and measure a single cloud size."""
    delta = default_delta(n) if delta is None else float(delta)
    m_b = default_boundary_count(n) if m_b is None else int(m_b)
    cloud = sample(problem.manifold, n, m_b, seed=seed, mode=mode, weight_mode=weight_mode, delta=delta)
    kernel = KernelFamily(delta, 2, profile)
    system = assemble(cloud, kernel, problem)
    result = solve(system, tol=tol, max_iter=max_iter)
    e2 = error_interior(result, problem, cloud)
    e2b, absolute = error_boundary(result, problem, cloud, allow_absolute=True, return_flag=True)
    return ConvergenceRecord(
        n=n, m_b=m_b, delta=delta, e2=e2, rate=None, e2b=e2b, rate_b=None, seed=seed,
        e2b_absolute=absolute, iterations=result.iterations,
        isolated=len(system.meta.get("isolated_interior", ())))


def run_study(problem, n_list=STUDY_N_LIST, seed=0, weight_mode="voronoi", mode="random",
              deltas=None, tol=1e-10, max_iter=None, threads=None, config=None):
    """Run a convergence study over increasing cloud sizes.

    Parameters
    ----------
    problem : TestProblem
    n_list : sequence of int
        Strictly increasing interior counts, at least three.
    seed : int
        Seed shared by every row.
    deltas : sequence of float, optional
        Explicit scales; default ``(2/n)^(1/4)``.
    threads : int, optional
        Rows solved concurrently (capped by ``NMP_THREADS``).

    Returns
    -------
    StudyResult
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigurationError("n_list must be strictly increasing with at least three entries")
    if deltas is None:
        deltas = [default_delta(n) for n in n_list]
    elif len(deltas) != len(n_list):
        raise ConfigurationError("deltas and n_list must have the same length")

    def job(args):
        n, d = args
        return run_row(problem, n, seed=seed, mode=mode, weight_mode=weight_mode, delta=d,
                       tol=tol, max_iter=max_iter)

    workers = worker_count(threads)
    if workers == 1:
        records = [job(a) for a in zip(n_list, deltas)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(job, zip(n_list, deltas)))
    records.sort(key=lambda r: r.n)

    for prev, cur in zip(records, records[1:]):
        cur.rate = successive_rate(prev.e2, cur.e2, prev.delta, cur.delta)
        cur.rate_b = successive_rate(prev.e2b, cur.e2b, prev.delta, cur.delta)
    ds = [r.delta for r in records]
    slope_i, icpt_i = fit_slope(ds, [r.e2 for r in records])
    slope_b, icpt_b = fit_slope(ds, [r.e2b for r in records])

    resolved = {
        "manifold": problem.manifold.name, "problem": problem.name, "n_list": n_list,
        "seed": seed, "mode": mode, "weight_mode": weight_mode,
        "deltas": [float(d) for d in deltas], "tol": tol, "max_iter": max_iter,
    }
    if config:
        resolved = {**config, **resolved}
    return StudyResult(records, slope_i, icpt_i, slope_b, icpt_b, resolved)
