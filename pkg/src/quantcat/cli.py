"""Command line front end.

Configuration is a flat JSON object; command line flags override file keys.
Every artifact embeds the resolved configuration and the library version.
Exit codes: 0 success, 2 validation, 3 mathematical invariant failure,
4 resource budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NotQuantizableError, QuantcatError, ValidationError
from .io import write_grid_csv, write_json, write_operator, write_state

DEFAULTS = {
    "matrix": "2,1;1,1",
    "N": [32],
    "kappa": "auto",
    "quantizer": "anti_wick",
    "K": 2,
    "delta0": 0.1,
    "G": 256,
    "m": 1,
    "m0": 1,
    "n": None,
    "epsilon": 0.1,
    "epsilon0": 0.05,
    "delta": 0.01,
    "samples": 64,
    "refine_rounds": 2,
    "seed": 0,
    "output": "out",
    "eigvec_policy": "first",
    "index": 0,
    "resolution": None,
    "t_max": None,
    "trials": 200,
    "n_rho": 2,
    "n_rho0": 12,
    "observable": "cos_x",
    "jobs": 1,
}

QUANTIZERS = ("weyl", "anti_wick", "op_plus")


class ConfigError(ValidationError):
    pass


def _int_field(cfg, key, lo=None, allow_none=False):
    v = cfg[key]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ConfigError(f"config.{key}: expected integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"config.{key}: must be >= {lo}, got {v}")
    return int(v)


def _float_field(cfg, key, lo=None, hi=None):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"config.{key}: expected number, got {v!r}")
    if (lo is not None and v <= lo) or (hi is not None and v >= hi):
        raise ConfigError(f"config.{key}: must lie in ({lo}, {hi}), got {v}")
    return float(v)


def validate_config(cfg: dict) -> dict:
    """Check every field before any computation; returns a normalized copy."""
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    out = dict(DEFAULTS)
    out.update(cfg)
    if not isinstance(out["matrix"], str):
        raise ConfigError("config.matrix: expected a string like '2,1;1,1'")
    Ns = out["N"]
    Ns = [Ns] if isinstance(Ns, int) else Ns
    if not isinstance(Ns, list) or not Ns:
        raise ConfigError("config.N: expected an integer or a non-empty list")
    for v in Ns:
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"config.N: entries must be positive integers, got {v!r}")
    out["N"] = [int(v) for v in Ns]
    k = out["kappa"]
    if k != "auto":
        if not isinstance(k, list) or not all(isinstance(v, (int, float)) for v in k):
            raise ConfigError("config.kappa: expected 'auto' or a list of numbers")
    if out["quantizer"] not in QUANTIZERS:
        raise ConfigError(f"config.quantizer: expected one of {QUANTIZERS}")
    if out["eigvec_policy"] not in ("first", "random-seeded", "all"):
        raise ConfigError("config.eigvec_policy: expected first, random-seeded or all")
    if out["observable"] not in ("cos_x", "cos_xi", "bump"):
        raise ConfigError("config.observable: expected cos_x, cos_xi or bump")
    _int_field(out, "K", 2)
    _int_field(out, "G", 4)
    _int_field(out, "m", 0)
    _int_field(out, "m0", 1)
    _int_field(out, "n", 0, allow_none=True)
    _int_field(out, "samples", 1)
    _int_field(out, "refine_rounds", 0)
    _int_field(out, "seed", 0)
    _int_field(out, "index", 0)
    _int_field(out, "resolution", 4, allow_none=True)
    _int_field(out, "t_max", 0, allow_none=True)
    _int_field(out, "trials", 1)
    _int_field(out, "n_rho", 1)
    _int_field(out, "n_rho0", 1)
    _int_field(out, "jobs", 1)
    _float_field(out, "delta0", 0, 0.5)
    _float_field(out, "epsilon", 0, 1)
    _float_field(out, "epsilon0", 0, None)
    _float_field(out, "delta", 0, None)
    if not isinstance(out["output"], str):
        raise ConfigError("config.output: expected a path string")
    return out


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    return data


# ---------------------------------------------------------------------------
# shared helpers

def _matrix(cfg):
    from .symplectic import parse_matrix
    return parse_matrix(cfg["matrix"])


def _torus(cfg, A, N):
    from .torus import QuantumTorus, find_kappa
    if cfg["kappa"] == "auto":
        ks = find_kappa(A, N)
        if not ks:
            raise ValidationError(f"no admissible kappa for N={N}")
        kappa = ks[0]
    else:
        kappa = cfg["kappa"]
    return QuantumTorus(N, A.d, kappa)


def _observable(cfg, d):
    from .quantization import TrigObservable
    if cfg["observable"] == "cos_x":
        return TrigObservable.cos_x(d, 0)
    if cfg["observable"] == "cos_xi":
        return TrigObservable.cos_x(d, d)
    return TrigObservable.bump(np.full(2 * d, 0.25), 4, d)


def _eig_indices(cfg, n):
    pol = cfg["eigvec_policy"]
    if pol == "first":
        return [min(cfg["index"], n - 1)]
    if pol == "all":
        return list(range(n))
    rng = np.random.default_rng(cfg["seed"])
    return [int(rng.integers(n))]


def _artifact(cfg, command, body):
    return {"command": command, "version": __version__, "config": cfg, "result": body}


def _outdir(cfg) -> Path:
    p = Path(cfg["output"])
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# subcommands

def cmd_analyze_matrix(cfg):
    from .symplectic import (check_quantizable, check_symplectic, ehrenfest_times,
                             entropy_bounds, lyapunov_data)
    A = _matrix(cfg)
    body = {"matrix": A.tolist(), "symplectic": check_symplectic(A.entries),
            "quantizable": check_quantizable(A)}
    if body["quantizable"]:
        L = lyapunov_data(A)
        lam0, lamp = entropy_bounds(L)
        body.update({"lyapunov": L.as_dict(), "Lambda_0": lam0, "Lambda_plus": lamp})
        if L.lambda_max > 0:
            body["ehrenfest"] = {str(N): dict(zip(("m_E", "n_E"), ehrenfest_times(N, cfg["epsilon"], L)))
                                 for N in cfg["N"]}
    path = write_json(_outdir(cfg) / "analyze-matrix.json", _artifact(cfg, "analyze-matrix", body))
    if not body["quantizable"]:
        raise NotQuantizableError(f"det(A - Id) = 0; report written to {path}")
    return path


def cmd_propagator(cfg):
    from .torus import check_intertwining, propagator
    A = _matrix(cfg)
    rows = []
    out = _outdir(cfg)
    for N in cfg["N"]:
        qt = _torus(cfg, A, N)
        M = propagator(A, qt)
        f = write_operator(out / f"propagator_N{N}.tqop", M)
        rows.append({"N": N, "kappa": qt.kappa, "file": f.name,
                     "intertwining_defect": check_intertwining(M, A, qt),
                     "unitarity_defect": M.unitarity_defect()})
    return write_json(out / "propagator.json", _artifact(cfg, "propagator", rows))


def cmd_eigenstates(cfg):
    from .spectra import eigensystem
    from .torus import TorusState, propagator
    A = _matrix(cfg)
    out = _outdir(cfg)
    rows = []
    for N in cfg["N"]:
        qt = _torus(cfg, A, N)
        E = eigensystem(propagator(A, qt))
        files = []
        for k in _eig_indices(cfg, qt.dim):
            f = write_state(out / f"eigenstate_N{N}_{k}.tqst", TorusState(E.eigenvectors[:, k], qt))
            files.append(f.name)
        rows.append({"N": N, "eigenphases": E.eigenphases, "max_residual": float(np.max(E.residuals)),
                     "cluster_sizes": [len(c) for c in E.clusters], "files": files})
    return write_json(out / "eigenstates.json", _artifact(cfg, "eigenstates", rows))


def cmd_husimi(cfg):
    from .spectra import eigensystem, husimi_grid
    from .torus import propagator
    A = _matrix(cfg)
    out = _outdir(cfg)
    rows = []
    for N in cfg["N"]:
        qt = _torus(cfg, A, N)
        E = eigensystem(propagator(A, qt))
        res = cfg["resolution"] or 4 * N
        for k in _eig_indices(cfg, qt.dim):
            g = husimi_grid(qt, E.eigenvectors[:, k], res)
            f = write_grid_csv(out / f"husimi_N{N}_{k}.csv", g.density, qt.d, N)
            rows.append({"N": N, "index": k, "file": f.name, "total": g.total})
    return write_json(out / "husimi.json", _artifact(cfg, "husimi", rows))


def cmd_measure(cfg):
    from .spectra import eigensystem, measure_of_state
    from .symplectic import adapted_frame
    from .torus import propagator
    A = _matrix(cfg)
    out = _outdir(cfg)
    frame = adapted_frame(A, epsilon0=cfg["epsilon0"])
    rows = {}
    for N in cfg["N"]:
        qt = _torus(cfg, A, N)
        E = eigensystem(propagator(A, qt))
        a = _observable(cfg, qt.d)
        tab = {}
        for k in _eig_indices(cfg, qt.dim):
            tab[str(k)] = {q: measure_of_state(qt, E.eigenvectors[:, k], q, a, frame)
                           for q in QUANTIZERS}
        rows[str(N)] = tab
    return write_json(out / "measure.json", _artifact(cfg, "measure", rows))


def cmd_entropy(cfg):
    from .entropy import EntropyReport, build_partition, quantum_entropy
    from .spectra import eigensystem
    from .symplectic import adapted_frame, entropy_bounds, lyapunov_data
    from .torus import propagator
    A = _matrix(cfg)
    out = _outdir(cfg)
    frame = adapted_frame(A, epsilon0=cfg["epsilon0"])
    P = build_partition(cfg["K"], cfg["delta0"], cfg["G"], d=A.d)
    rep = EntropyReport(lambda_bounds=entropy_bounds(lyapunov_data(A)))
    for N in cfg["N"]:
        qt = _torus(cfg, A, N)
        E = eigensystem(propagator(A, qt))
        for k in _eig_indices(cfg, qt.dim):
            for q in ("anti_wick", "op_plus"):
                m = cfg["m"]
                h = quantum_entropy(qt, E.eigenvectors[:, k], P, m, q, A=A, frame=frame)
                rep.h_quantum[f"N={N},index={k},m={m},{q}"] = h / max(2 * m, 1)
    rep.check(cfg["K"])
    return write_json(out / "entropy.json", _artifact(cfg, "entropy", rep.to_dict()))


def cmd_eup_check(cfg):
    from .entropy import eup_check, random_eup_triple
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for i in range(cfg["trials"]):
        n = int(rng.integers(2, 33))
        k = int(rng.integers(2, 6))
        pis, U, v = random_eup_triple(rng, n, k, rank=int(rng.integers(1, n + 1)))
        r = eup_check(pis, U, v)
        rows.append({"trial": i, "dim": n, "members": k, "lhs": r["lhs"], "rhs": r["rhs"],
                     "margin": r["margin"]})
    body = {"trials": rows, "min_margin": min(r["margin"] for r in rows), "tolerance": 1e-8}
    path = write_json(_outdir(cfg) / "eup-check.json", _artifact(cfg, "eup-check", body))
    if body["min_margin"] < -1e-8:
        raise QuantcatError(f"uncertainty margin {body['min_margin']} below -1e-8")
    return path


def cmd_c_bound(cfg):
    from .entropy import c_bound_estimate
    from .symplectic import adapted_frame, ehrenfest_times, lyapunov_data
    A = _matrix(cfg)
    frame = adapted_frame(A, epsilon0=cfg["epsilon0"])
    L = lyapunov_data(A)
    rows = []
    for N in cfg["N"]:
        qt = _torus(cfg, A, N)
        n = cfg["n"] if cfg["n"] is not None else ehrenfest_times(N, cfg["epsilon"], L)[1]
        r = c_bound_estimate(qt, frame, A, n, cfg["samples"], cfg["refine_rounds"],
                             cfg["seed"], cfg["delta"], cfg["epsilon"])
        r["N"] = N
        r["normalized_log_c"] = float(np.log(r["c_hat"]) + n * r["Lambda_0"] - r["log_det_B"])
        rows.append(r)
    body = {"rows": rows, "fitted_constant": max(r["normalized_log_c"] for r in rows)}
    return write_json(_outdir(cfg) / "c-bound.json", _artifact(cfg, "c-bound", body))


def cmd_egorov(cfg):
    from .spectra import egorov_drift, eigensystem
    from .symplectic import adapted_frame, ehrenfest_times, lyapunov_data
    from .torus import propagator
    A = _matrix(cfg)
    frame = adapted_frame(A, epsilon0=cfg["epsilon0"])
    L = lyapunov_data(A)
    rows = []
    for N in cfg["N"]:
        qt = _torus(cfg, A, N)
        E = eigensystem(propagator(A, qt))
        t_max = cfg["t_max"] if cfg["t_max"] is not None else ehrenfest_times(N, cfg["epsilon"], L)[0]
        a = _observable(cfg, qt.d)
        for k in _eig_indices(cfg, qt.dim):
            rows.append({"N": N, "index": k, "t_max": t_max,
                         "drift": {q: egorov_drift(qt, E.eigenvectors[:, k], a, A, q, t_max, frame)
                                   for q in QUANTIZERS}})
    return write_json(_outdir(cfg) / "egorov.json", _artifact(cfg, "egorov", rows))


def cmd_certify(cfg):
    from .entropy import build_partition, entropy_certificate
    from .spectra import eigensystem
    from .symplectic import adapted_frame, ehrenfest_times, lyapunov_data
    from .torus import propagator
    A = _matrix(cfg)
    frame = adapted_frame(A, epsilon0=cfg["epsilon0"])
    L = lyapunov_data(A)
    P = build_partition(cfg["K"], cfg["delta0"], cfg["G"], d=A.d)
    rows = []
    for N in cfg["N"]:
        qt = _torus(cfg, A, N)
        M = propagator(A, qt)
        E = eigensystem(M)
        n = cfg["n"] if cfg["n"] is not None else ehrenfest_times(N, cfg["epsilon"], L)[1]
        for k in _eig_indices(cfg, qt.dim):
            rec = entropy_certificate(qt, E.eigenvectors[:, k], P, cfg["m"], n, frame, A,
                                      n_rho=cfg["n_rho"], n_rho0=cfg["n_rho0"], M=M)
            rec.update({"index": k, "Lambda_0": L.Lambda_zero})
            rows.append(rec)
    body = {"rows": rows, "margin": min(r["margin"] for r in rows)}
    return write_json(_outdir(cfg) / "certify.json", _artifact(cfg, "certify", body))


COMMANDS = {
    "analyze-matrix": cmd_analyze_matrix,
    "propagator": cmd_propagator,
    "eigenstates": cmd_eigenstates,
    "husimi": cmd_husimi,
    "measure": cmd_measure,
    "entropy": cmd_entropy,
    "eup-check": cmd_eup_check,
    "c-bound": cmd_c_bound,
    "egorov": cmd_egorov,
    "certify": cmd_certify,
}

_FLAG_TYPES = {
    "matrix": str, "kappa": str, "quantizer": str, "K": int, "delta0": float, "G": int,
    "m": int, "m0": int, "n": int, "epsilon": float, "epsilon0": float, "delta": float,
    "samples": int, "refine_rounds": int, "seed": int, "output": str,
    "eigvec_policy": str, "index": int, "resolution": int, "t_max": int, "trials": int,
    "n_rho": int, "n_rho0": int, "observable": str, "jobs": int,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quantcat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--N", type=int, nargs="+")
        for key, typ in _FLAG_TYPES.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ)
    return parser


def resolve_config(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    for key in list(_FLAG_TYPES) + ["N"]:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if isinstance(cfg.get("kappa"), str) and cfg["kappa"] != "auto":
        try:
            cfg["kappa"] = [float(x) for x in cfg["kappa"].split(",")]
        except ValueError:
            raise ConfigError("config.kappa: expected 'auto' or comma-separated numbers") from None
    return validate_config(cfg)


def run(command: str, cfg: dict) -> Path:
    return COMMANDS[command](cfg)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        path = run(args.command, cfg)
    except QuantcatError as exc:
        src = args.config or "command line"
        print(f"{type(exc).__name__} [{src}]: {exc}", file=sys.stderr)
        return exc.exit_code
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
