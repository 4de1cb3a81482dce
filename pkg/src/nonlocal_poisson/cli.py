"""Command-line driver: ``nonlocal-poisson <command> [options]``.

Commands
--------
gen       sample a point cloud
assemble  build the discrete system and export it as Matrix Market
solve     sample, assemble and solve one cloud, reporting errors
study     run a convergence study over several cloud sizes
verify    check geometric identities and truncation decay
energy    evaluate the discrete energy on random vectors

Options may come from a JSON file passed with ``--config`` (which must carry
``"schema_version": 1``); explicit flags override file values.  Every output
file embeds the fully resolved configuration.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .assembly import assemble, discrete_energy
from .errors import ConfigurationError, NonConvergenceError, NonlocalPoissonError
from .geometry import PointCloud, default_boundary_count, get_problem, make_manifold, sample
from .kernels import KernelFamily
from .operators import verification_report
from .solver import solve
from .study import STUDY_N_LIST, error_boundary, error_interior, run_study

SCHEMA_VERSION = 1

DEFAULT_PROBLEM = {"hemisphere": "z2", "disk": "paraboloid"}

DEFAULTS = {
    "manifold": "hemisphere",
    "problem": None,
    "n": 512,
    "m_b": None,
    "n_list": list(STUDY_N_LIST),
    "seed": 0,
    "mode": "random",
    "weight_mode": "voronoi",
    "delta": None,
    "deltas": None,
    "tol": 1e-10,
    "max_iter": None,
    "threads": None,
    "resolution": 400,
    "verify_deltas": [0.2, 0.1],
    "cloud": None,
    "out": "out",
}


class ConfigFileError(ConfigurationError):
    def __init__(self, message, path):
        super().__init__(message)
        self.path = path


def _load_config(path):
    if not os.path.isfile(path):
        raise ConfigFileError(f"config file not found: {path}", path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"config file is not valid JSON: {exc}", path) from None
    if not isinstance(doc, dict):
        raise ConfigFileError("config file must hold a JSON object", path)
    version = doc.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigFileError(f"config schema_version must be {SCHEMA_VERSION}, got {version!r}", path)
    unknown = sorted(set(doc) - set(DEFAULTS))
    if unknown:
        raise ConfigFileError(f"unknown config keys {unknown}", path)
    return doc


def resolve_config(args):
    """Merge defaults, the optional config file and explicit flags, then validate."""
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(_load_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg["command"] = args.command
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if cfg["manifold"] not in DEFAULT_PROBLEM:
        raise ConfigurationError(f"manifold must be one of {sorted(DEFAULT_PROBLEM)}, got {cfg['manifold']!r}")
    if cfg["problem"] is None:
        cfg["problem"] = DEFAULT_PROBLEM[cfg["manifold"]]
    get_problem(cfg["manifold"], cfg["problem"])
    if cfg["mode"] not in ("random", "lattice"):
        raise ConfigurationError(f"mode must be 'random' or 'lattice', got {cfg['mode']!r}")
    if cfg["weight_mode"] not in ("voronoi", "uniform"):
        raise ConfigurationError(f"weight_mode must be 'voronoi' or 'uniform', got {cfg['weight_mode']!r}")
    if not (isinstance(cfg["n"], int) and cfg["n"] >= 16):
        raise ConfigurationError(f"n must be an integer >= 16, got {cfg['n']!r}")
    if cfg["m_b"] is None:
        cfg["m_b"] = default_boundary_count(cfg["n"])
    nl = cfg["n_list"]
    if len(nl) < 3 or any(b <= a for a, b in zip(nl, nl[1:])):
        raise ConfigurationError("n_list must be strictly increasing with at least three entries")
    if cfg["deltas"] is not None and len(cfg["deltas"]) != len(nl):
        raise ConfigurationError("deltas must match n_list in length")
    if not cfg["tol"] > 0:
        raise ConfigurationError("tol must be positive")
    if cfg["delta"] is not None and not cfg["delta"] > 0:
        raise ConfigurationError("delta must be positive")
    return cfg


def _provenance(cfg):
    return {"version": __version__, "schema_version": SCHEMA_VERSION, "config": cfg}


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return path


def _cloud(cfg):
    if cfg["cloud"]:
        cloud = PointCloud.from_json(cfg["cloud"])
        if cfg["delta"] is not None:
            cloud.delta = float(cfg["delta"])
        return cloud
    return sample(make_manifold(cfg["manifold"]), cfg["n"], cfg["m_b"], seed=cfg["seed"],
                  mode=cfg["mode"], weight_mode=cfg["weight_mode"], delta=cfg["delta"])


def _system(cfg, cloud=None):
    cloud = cloud or _cloud(cfg)
    problem = get_problem(cloud.manifold or cfg["manifold"], cfg["problem"])
    return assemble(cloud, KernelFamily(cloud.delta, 2), problem), problem


def cmd_gen(cfg):
    cloud = _cloud(cfg)
    path = os.path.join(cfg["out"], "cloud.json")
    cloud.to_json(path, provenance=_provenance(cfg))
    cloud.to_csv(os.path.join(cfg["out"], "cloud"), header_comment=json.dumps(_provenance(cfg), sort_keys=True))
    return {"cloud": path, "n": cloud.n, "m_b": cloud.m_b, "delta": cloud.delta}


def cmd_assemble(cfg):
    system, _ = _system(cfg)
    path = system.export(cfg["out"], config=_provenance(cfg))
    return {"manifest": path, "n": system.n, "m_b": system.m_b,
            "nnz_L": system.meta["nnz_L"], "warnings": system.meta["warnings"]}


def cmd_solve(cfg):
    cloud = _cloud(cfg)
    system, problem = _system(cfg, cloud)
    result = solve(system, tol=cfg["tol"], max_iter=cfg["max_iter"])
    e2 = error_interior(result, problem, cloud)
    e2b, absolute = error_boundary(result, problem, cloud, allow_absolute=True, return_flag=True)
    header = json.dumps(_provenance(cfg), sort_keys=True)
    result.to_csv(cloud, os.path.join(cfg["out"], "solution"), header_comment=header)
    doc = {"n": cloud.n, "m_b": cloud.m_b, "delta": cloud.delta, "e2": e2, "e2b": e2b,
           "e2b_absolute": absolute, "iterations": result.iterations, "residual": result.residual,
           "wall_time": result.wall_time, "warnings": system.meta["warnings"], **_provenance(cfg)}
    _write_json(os.path.join(cfg["out"], "solve.json"), doc)
    return {k: doc[k] for k in ("n", "delta", "e2", "e2b", "e2b_absolute", "iterations", "residual")}


def cmd_study(cfg):
    problem = get_problem(cfg["manifold"], cfg["problem"])
    res = run_study(problem, cfg["n_list"], seed=cfg["seed"], weight_mode=cfg["weight_mode"],
                    mode=cfg["mode"], deltas=cfg["deltas"], tol=cfg["tol"], max_iter=cfg["max_iter"],
                    threads=cfg["threads"], config=_provenance(cfg))
    csv_path, json_path = res.write(cfg["out"])
    return {"csv": csv_path, "summary": json_path, "slope_interior": res.slope_interior,
            "slope_boundary": res.slope_boundary}


def cmd_verify(cfg):
    problem = get_problem(cfg["manifold"], cfg["problem"])
    report = verification_report(problem, deltas=tuple(cfg["verify_deltas"]), resolution=cfg["resolution"])
    report.update(_provenance(cfg))
    _write_json(os.path.join(cfg["out"], "verify.json"), report)
    return {k: report[k] for k in ("manifold", "problem", "identity_residual_max",
                                   "rin_slope", "rbd_slope", "adjointness_relative_gap")}


def cmd_energy(cfg):
    system, _ = _system(cfg)
    rng = np.random.default_rng(cfg["seed"])
    u = rng.standard_normal(system.n)
    v = rng.standard_normal(system.m_b)
    doc = {"energy": discrete_energy(system, u, v),
           "energy_constant": discrete_energy(system, np.ones(system.n), np.zeros(system.m_b)),
           **_provenance(cfg)}
    _write_json(os.path.join(cfg["out"], "energy.json"), doc)
    return {k: doc[k] for k in ("energy", "energy_constant")}


COMMANDS = {
    "gen": cmd_gen, "assemble": cmd_assemble, "solve": cmd_solve,
    "study": cmd_study, "verify": cmd_verify, "energy": cmd_energy,
}


def _int_list(text):
    return [int(s) for s in text.replace(" ", "").split(",") if s]


def _float_list(text):
    return [float(s) for s in text.replace(" ", "").split(",") if s]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (schema_version 1)")
    common.add_argument("--manifold", choices=sorted(DEFAULT_PROBLEM))
    common.add_argument("--problem", help="test problem identifier, e.g. z2, x, paraboloid")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol", type=float, help="relative residual tolerance")
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--weight-mode", dest="weight_mode", choices=["voronoi", "uniform"])
    common.add_argument("--mode", choices=["random", "lattice"])
    common.add_argument("--n", type=int, help="interior sample count")
    common.add_argument("--m-b", dest="m_b", type=int, help="boundary sample count")
    common.add_argument("--delta", type=float, help="kernel scale (default (2/n)^(1/4))")
    common.add_argument("--cloud", help="point cloud JSON to load instead of sampling")

    parser = argparse.ArgumentParser(prog="nonlocal-poisson", description="Nonlocal Poisson solver on point clouds")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen", "assemble", "solve", "energy"):
        sub.add_parser(name, parents=[common])
    p = sub.add_parser("study", parents=[common])
    p.add_argument("--n-list", dest="n_list", type=_int_list, help="comma separated interior counts")
    p.add_argument("--deltas", type=_float_list, help="comma separated explicit scales")
    p.add_argument("--threads", type=int)
    p = sub.add_parser("verify", parents=[common])
    p.add_argument("--resolution", type=int)
    p.add_argument("--verify-deltas", dest="verify_deltas", type=_float_list)
    return parser


def _fail(payload, code):
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigFileError as exc:
        return _fail({"error": str(exc), "type": "ConfigFileError", "config_path": exc.path}, 2)
    except NonlocalPoissonError as exc:
        return _fail({"error": str(exc), "type": type(exc).__name__}, 2)
    os.makedirs(cfg["out"], exist_ok=True)
    start = time.perf_counter()
    try:
        summary = COMMANDS[cfg["command"]](cfg)
    except NonConvergenceError as exc:
        return _fail({"error": str(exc), "type": "NonConvergenceError",
                      "residual_history_tail": exc.residual_history[-10:]}, 1)
    except NonlocalPoissonError as exc:
        return _fail({"error": str(exc), "type": type(exc).__name__}, 1)
    summary["elapsed"] = time.perf_counter() - start
    print(json.dumps(summary, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
