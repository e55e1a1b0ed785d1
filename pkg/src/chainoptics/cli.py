"""
Batch experiment runner.

Each subcommand maps one experiment of the package to a deterministic
table: CSV as the primary format (fixed column order, full float
precision) with an optional JSON mirror of the same records. Outputs
carry a provenance header echoing the effective configuration, so a
rerun with the same config is byte-identical (timestamps only appear
behind a flag). A JSON config file can override any subcommand flag;
unknown keys are rejected. Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .analytic import cm_table, mode_set_even, mode_set_odd, reconstruct_rt, \
    transfer_time_asymptotic
from .calibrate import Calibration, find_beta5050, find_eta5050, mach_zehnder, \
    optimize_boundary_couplings, scheme_label
from .imperfect import curvature_scan, gaussian_width_scan, wall_strength_scan
from .lattice import ChainSpec, CouplingScheme, PotentialProfile, build_chain
from .manybody import Statistics, build_generator, correlation_map, \
    hom_initial_state, pair_basis, three_body_probe, weak_interaction_scan, \
    bunching_scan, TwoBodyState
from .spectral import diagonalize, rt_coefficients

__all__ = ["main", "run", "ExperimentConfig"]

_ARTIFACT = f"chainoptics {__version__}"
_PLUMBING_KEYS = {"config", "output", "format", "workers", "timestamp", "func"}


class ConfigError(Exception):
    """Invalid flags, grids or config-file contents."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Effective configuration of one run after config-file merging."""
    experiment: str
    params: dict
    output: Optional[str]
    format: str
    workers: int


# ---- small parsing helpers ----

def _parse_scalar(token: str, cast: Callable) -> float:
    try:
        return cast(token)
    except ValueError as exc:
        raise ConfigError(f"bad grid value {token!r}") from exc


def _parse_grid(text, cast: Callable = float,
                default_step: Optional[float] = None) -> list:
    """Grid syntax start:stop[:step] with inclusive endpoints; also a
    bare scalar or a comma list. Config files may pass a ready list."""
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    text = str(text).strip()
    if "," in text:
        return [_parse_scalar(tok, cast) for tok in text.split(",") if tok]
    if ":" not in text:
        return [_parse_scalar(text, cast)]
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"bad grid syntax {text!r}")
    start = _parse_scalar(parts[0], float)
    stop = _parse_scalar(parts[1], float)
    if len(parts) == 3:
        step = _parse_scalar(parts[2], float)
    elif default_step is not None:
        step = float(default_step)
    else:
        step = 1.0
    if step <= 0 or stop < start:
        raise ConfigError(f"bad grid range {text!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    vals = [start + k * step for k in range(n)]
    return [cast(round(v, 12)) for v in vals]


def _parse_beta(token) -> Optional[float]:
    if isinstance(token, (int, float)):
        return float(token)
    if str(token).strip().lower() == "auto":
        return None
    try:
        return float(token)
    except ValueError as exc:
        raise ConfigError(f"--beta must be a number or 'auto', got {token!r}") from exc


def _resolve_scheme(name: str, L: int) -> CouplingScheme:
    if name == "uniform":
        return CouplingScheme.uniform()
    if name == "optimal":
        return CouplingScheme.optimal(optimize_boundary_couplings(L, "optimal").couplings[0])
    if name == "double-optimal":
        opt = optimize_boundary_couplings(L, "double_optimal")
        return CouplingScheme.double_optimal(*opt.couplings)
    raise ConfigError(f"unknown scheme {name!r}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


# ---- output writing ----

def _output_base(args, experiment: str) -> str:
    base = args.output
    if base is None:
        outdir = os.environ.get("CHAINOPTICS_OUTDIR", ".")
        base = os.path.join(outdir, experiment)
    root, ext = os.path.splitext(base)
    if ext.lower() in (".csv", ".json"):
        base = root
    return base


def _provenance(experiment: str, params: dict, resolved: dict,
                timestamp: bool) -> list[str]:
    lines = [f"artifact: {_ARTIFACT}", f"experiment: {experiment}",
             "config: " + json.dumps(params, sort_keys=True, default=str)]
    if resolved:
        lines.append("resolved: " + json.dumps(resolved, sort_keys=True, default=str))
    if timestamp:
        lines.append("timestamp: " + datetime.now(timezone.utc).isoformat())
    return lines


def _write_outputs(args, experiment: str, columns: Sequence[str],
                   rows: Sequence[Sequence], resolved: dict) -> list[str]:
    params = {k: v for k, v in vars(args).items()
              if k not in _PLUMBING_KEYS and k != "experiment"}
    header = _provenance(experiment, params, resolved, args.timestamp)
    base = _output_base(args, experiment)
    directory = os.path.dirname(base)
    if directory:
        os.makedirs(directory, exist_ok=True)
    written = []
    if args.format in ("csv", "both"):
        path = base + ".csv"
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        written.append(path)
    if args.format in ("json", "both"):
        path = base + ".json"
        payload = {
            "artifact": _ARTIFACT,
            "experiment": experiment,
            "config": params,
            "resolved": resolved,
            "columns": list(columns),
            "rows": [[(v.item() if isinstance(v, np.generic) else v) for v in row]
                     for row in rows],
        }
        if args.timestamp:
            payload["timestamp"] = datetime.now(timezone.utc).isoformat()
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2, default=str)
            fh.write("\n")
        written.append(path)
    return written


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---- per-subcommand experiment functions ----

def _cmd_rt_curve(args):
    L = args.L
    scheme = _resolve_scheme(args.scheme, L)
    resolved = {"scheme": scheme_label(scheme)}
    beta = _parse_beta(args.beta)
    if beta is None:
        cal = find_beta5050(L, scheme)
        beta = cal.value
        resolved["beta"] = cal.value
        resolved["t_star"] = cal.t_star
    profiles = (PotentialProfile.center_impurity(beta),) if beta != 0.0 else ()
    decomp = diagonalize(build_chain(L, scheme, profiles))
    t_grid = np.arange(0.0, args.t_max + 0.5 * args.t_step, args.t_step)
    r, t = rt_coefficients(decomp, t_grid)
    ok = np.abs(t) > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        phase = np.where(ok, np.angle(r / np.where(ok, t, 1.0)), np.nan)
    rows = [(ti, abs(ri), abs(vi), pi)
            for ti, ri, vi, pi in zip(t_grid, np.abs(r), np.abs(t), phase)]
    return ["t", "abs_R", "abs_T", "arg_R_over_T"], rows, resolved


def _cal_point(task) -> Calibration:
    L, parity, scheme_name = task
    scheme = _resolve_scheme(scheme_name, L)
    if parity == "odd":
        return find_beta5050(L, scheme)
    return find_eta5050(L, scheme)


def _cmd_calibrate(args):
    Ls = _parse_grid(args.L_grid, int, default_step=2)
    wrong = [L for L in Ls if (L % 2 == 0) == (args.parity == "odd")]
    if wrong:
        raise ConfigError(f"L grid contains {args.parity}-parity violations: {wrong}")
    if args.parity == "even" and args.scheme != "uniform":
        raise ConfigError("even-parity calibration supports only the uniform scheme")
    cals = _pmap(_cal_point, [(L, args.parity, args.scheme) for L in Ls], args.workers)
    rows = [(c.L, c.scheme, c.value, c.t_star, c.balance_residual,
             c.output_probability) for c in cals]
    return ["L", "scheme", "param_value", "t_star", "balance_residual",
            "P_5050"], rows, {}


def _stats_from(args) -> Statistics:
    if args.stats == "boson":
        return Statistics.boson(args.u)
    if args.u not in (0, 0.0):
        raise ConfigError("--u applies only to bosons")
    return Statistics.fermion() if args.stats == "fermion" else Statistics.hardcore()


def _end_state_amplitudes(chain: ChainSpec, stats: Statistics, t_grid):
    """Amplitude history of the one-particle-per-end release, computed
    with a single dense diagonalization of the pair generator."""
    state0 = hom_initial_state(chain, stats)
    K = build_generator(chain, stats).toarray()
    w, V = np.linalg.eigh(K)
    coeff = V.conj().T @ state0.amplitudes
    return [V @ (np.exp(-1j * w * tv) * coeff) for tv in t_grid]


def _cmd_correlation_map(args):
    stats = _stats_from(args)
    resolved = {}
    beta = _parse_beta(args.beta)
    if beta is None:
        cal = find_beta5050(args.L, CouplingScheme.uniform())
        beta = cal.value
        resolved["beta"] = cal.value
        if args.t is None:
            resolved["t"] = cal.t_star
            t_snap = cal.t_star
    if args.t is not None:
        t_snap = args.t
    elif beta is not None and "t" not in resolved:
        t_snap = find_beta5050(args.L, CouplingScheme.uniform()).t_star
        resolved["t"] = t_snap
    profiles = (PotentialProfile.center_impurity(beta),) if beta != 0.0 else ()
    chain = build_chain(args.L, CouplingScheme.uniform(), profiles)
    amps = _end_state_amplitudes(chain, stats, [t_snap])[0]
    cmap = correlation_map(TwoBodyState(L=args.L, stats=stats,
                                        amplitudes=amps, time=float(t_snap)))
    rows = [(j + 1, k + 1, cmap.P[j, k], cmap.C[j, k])
            for j in range(args.L) for k in range(args.L)]
    return ["j", "k", "P", "C"], rows, resolved


def _cmd_hom(args):
    stats = _stats_from(args)
    resolved = {}
    cal = None
    beta = _parse_beta(args.beta)
    if beta is None:
        cal = find_beta5050(args.L, CouplingScheme.uniform())
        beta = cal.value
        resolved["beta"] = cal.value
    if args.t_grid is None:
        if cal is None:
            cal = find_beta5050(args.L, CouplingScheme.uniform())
        t_grid = np.linspace(0.0, 1.2 * cal.t_star, 121)
        resolved["t_star"] = cal.t_star
    else:
        t_grid = np.asarray(_parse_grid(args.t_grid, float))
    chain = build_chain(args.L, CouplingScheme.uniform(),
                        (PotentialProfile.center_impurity(beta),))
    rows = []
    for tv, amps in zip(t_grid, _end_state_amplitudes(chain, stats, t_grid)):
        cmap = correlation_map(TwoBodyState(L=args.L, stats=stats,
                                            amplitudes=amps, time=float(tv)))
        rows.append((float(tv), cmap.P[0, 0], cmap.P[-1, -1], cmap.P[0, -1]))
    return ["t", "P_11", "P_LL", "P_1L"], rows, resolved


def _cmd_bunching(args):
    u_grid = None if args.u_grid is None else _parse_grid(args.u_grid, float)
    kwargs = {} if u_grid is None else {"u_grid": u_grid}
    scan = bunching_scan(args.L, **kwargs)
    rows = [(float(u), float(b), float(t), float(p), float(pn))
            for u, b, t, p, pn in zip(scan.u, scan.beta_opt, scan.t_opt,
                                      scan.P_LL, scan.P_normalized)]
    return ["u", "beta_opt", "t_opt", "P_LL", "P_normalized"], rows, \
        {"u_critical": scan.u_critical}


def _weak_row(task):
    L, u_grid = task
    return weak_interaction_scan([L], list(u_grid))


def _cmd_weak_u(args):
    Ls = _parse_grid(args.L_grid, int, default_step=10)
    u_grid = tuple(_parse_grid(args.u_grid, float))
    tables = _pmap(_weak_row, [(L, u_grid) for L in Ls], args.workers)
    rows = []
    for table in tables:
        L = table.L_values[0]
        for u, var in zip(table.u, table.variation[0]):
            rows.append((L, float(u), float(var), table.threshold_u[0]))
    return ["L", "u", "variation", "threshold_u"], rows, {}


def _mz_point(task):
    L, phi = task
    return mach_zehnder(L, phi)


def _cmd_mach_zehnder(args):
    phis = [p * np.pi for p in _parse_grid(args.phi_grid, float)]
    results = _pmap(_mz_point, [(args.L, phi) for phi in phis], args.workers)
    rows = [(r.phi_target, r.gamma_r, r.p_site1, r.p_siteL) for r in results]
    return ["phi", "gamma_R", "p_site1", "p_siteL"], rows, \
        {"beta": results[0].beta_used if results else None,
         "t_star": results[0].t_star if results else None}


def _cmd_cm_table(args):
    table = cm_table(args.beta, args.order)
    rows = []
    for m in range(args.order + 1):
        closed = table.closed[m]
        quad = table.quadrature[m]
        diff = abs(closed - quad) if np.isfinite(closed) else float("nan")
        rows.append((m, closed, quad, diff))
    return ["m", "c_m_closed", "c_m_quadrature", "abs_diff"], rows, {}


def _cmd_analytic_check(args):
    if args.parity == "odd":
        if args.L % 2 == 0:
            raise ConfigError("odd parity requires odd L")
        N = (args.L - 1) // 2
        modes = mode_set_odd(N, args.beta)
        chain = build_chain(args.L, CouplingScheme.uniform(),
                            (PotentialProfile.center_impurity(args.beta),))
    else:
        if args.L % 2 == 1:
            raise ConfigError("even parity requires even L")
        N = args.L // 2
        modes = mode_set_even(N, args.eta)
        chain = build_chain(args.L, CouplingScheme.uniform(),
                            (PotentialProfile.coupling_impurity(args.eta),))
    decomp = diagonalize(chain)
    dense = np.sort(decomp.energies)
    analytic = np.sort(modes.all_energies())
    spectrum_dev = float(np.max(np.abs(dense - analytic)))
    t_max = args.t_max if args.t_max is not None else 2.0 * transfer_time_asymptotic(N)
    t_grid = np.linspace(0.0, t_max, 201)
    r_modes, t_modes = reconstruct_rt(modes, t_grid, include_out_of_band=True)
    r_ref, t_ref = rt_coefficients(decomp, t_grid)
    recon_dev = float(max(np.max(np.abs(r_modes - r_ref)),
                          np.max(np.abs(t_modes - t_ref))))
    resolved = {
        "spectrum_max_abs_dev": spectrum_dev,
        "reconstruction_max_abs_dev": recon_dev,
        "weight_sum_type1": float(np.sum(modes.weights1)),
        "weight_sum_type2": float(np.sum(modes.weights2))
        + (modes.out_of_band_weight if modes.out_of_band_present else 0.0),
        "t_max": float(t_max),
    }
    rows = list(modes.rows())
    return ["family", "k", "q_k", "E_k", "weight"], rows, resolved


_DEFAULT_IMPERFECTION_GRIDS = {
    "gaussian": "0.66,1,2,4,8",
    "walls": "0.5,1,3,10,1000",
    "curvature": "0:0.05:0.01",
}


def _cmd_imperfections(args):
    grid_text = args.grid if args.grid is not None \
        else _DEFAULT_IMPERFECTION_GRIDS[args.scan]
    grid = _parse_grid(grid_text, float)
    if args.scan == "gaussian":
        reports = gaussian_width_scan(args.L, grid, recalibrate=args.recalibrate)
    elif args.scan == "walls":
        if args.recalibrate:
            raise ConfigError("--recalibrate applies only to the gaussian scan")
        reports = wall_strength_scan(args.L, grid)
    else:
        if args.recalibrate:
            raise ConfigError("--recalibrate applies only to the gaussian scan")
        reports = curvature_scan(args.L, grid)
    rows = [(r.parameter, r.epsilon, r.beta_used, r.recalibrated,
             r.transmission_probability) for r in reports]
    return ["parameter", "epsilon", "beta_used", "recalibrated", "P_T"], rows, \
        {"parameter_name": reports[0].parameter_name if reports else args.scan}


def _tb_point(task):
    L, u, m, scheme_name = task
    return three_body_probe(L, u, m, _resolve_scheme(scheme_name, L))


def _cmd_three_body(args):
    ms = _parse_grid(args.m_grid, int)
    vals = _pmap(_tb_point, [(args.L, args.u, m, args.scheme) for m in ms],
                 args.workers)
    rows = [(m, v) for m, v in zip(ms, vals)]
    return ["m", "p_front_pair"], rows, {}


# ---- argument parsing ----

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", default=None,
                        help="output path base (extension added per format)")
    common.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    common.add_argument("--workers", type=int, default=1,
                        help="parallel workers across independent grid points")
    common.add_argument("--config", default=None,
                        help="JSON config file; its keys override flags")
    common.add_argument("--timestamp", action="store_true",
                        help="stamp outputs with the wall-clock time")

    parser = argparse.ArgumentParser(
        prog="chainoptics",
        description="Deterministic experiment tables for impurity-based "
                    "linear optics in a tight-binding chain.")
    sub = parser.add_subparsers(dest="experiment", required=True)

    p = sub.add_parser("rt-curve", parents=[common],
                       help="|R|, |T| and relative phase against time")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--beta", default="auto")
    p.add_argument("--scheme", choices=("uniform", "optimal", "double-optimal"),
                   default="uniform")
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--t-step", type=float, default=0.1)
    p.set_defaults(func=_cmd_rt_curve)

    p = sub.add_parser("calibrate", parents=[common],
                       help="balanced-splitter parameter against chain length")
    p.add_argument("--parity", choices=("odd", "even"), required=True)
    p.add_argument("--scheme", choices=("uniform", "optimal", "double-optimal"),
                   default="uniform")
    p.add_argument("--L-grid", required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("correlation-map", parents=[common],
                       help="pair correlator snapshot P_jk and C_jk")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--stats", choices=("boson", "fermion", "hardcore"),
                   default="boson")
    p.add_argument("--u", type=float, default=0.0)
    p.add_argument("--beta", default="auto")
    p.add_argument("--t", type=float, default=None,
                   help="snapshot time (default: transfer time)")
    p.set_defaults(func=_cmd_correlation_map)

    p = sub.add_parser("hom", parents=[common],
                       help="end-site coincidences against time")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--stats", choices=("boson", "fermion", "hardcore"),
                   default="boson")
    p.add_argument("--u", type=float, default=0.0)
    p.add_argument("--beta", default="auto")
    p.add_argument("--t-grid", default=None)
    p.set_defaults(func=_cmd_hom)

    p = sub.add_parser("bunching-transition", parents=[common],
                       help="maximal bunched output against interaction")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--u-grid", default=None)
    p.set_defaults(func=_cmd_bunching)

    p = sub.add_parser("weak-u", parents=[common],
                       help="bunched-output drift for weak interactions")
    p.add_argument("--L-grid", default="21:51:10")
    p.add_argument("--u-grid", default="0:0.1:0.02")
    p.set_defaults(func=_cmd_weak_u)

    p = sub.add_parser("mach-zehnder", parents=[common],
                       help="two-transit interferometer routing")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--phi-grid", default="0:0.5:0.125",
                   help="target phases in units of pi")
    p.set_defaults(func=_cmd_mach_zehnder)

    p = sub.add_parser("cm-table", parents=[common],
                       help="envelope coefficients, closed form vs quadrature")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--order", type=int, default=3)
    p.set_defaults(func=_cmd_cm_table)

    p = sub.add_parser("analytic-check", parents=[common],
                       help="mode table cross-validated against diagonalization")
    p.add_argument("--parity", choices=("odd", "even"), default="odd")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--t-max", type=float, default=None)
    p.set_defaults(func=_cmd_analytic_check)

    p = sub.add_parser("imperfections", parents=[common],
                       help="splitting imbalance under static imperfections")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--scan", choices=("gaussian", "walls", "curvature"),
                   required=True)
    p.add_argument("--grid", default=None)
    p.add_argument("--recalibrate", action="store_true")
    p.set_defaults(func=_cmd_imperfections)

    p = sub.add_parser("three-body", parents=[common],
                       help="front-pair probability with a third particle")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--m-grid", default="4,7,11,15,18")
    p.add_argument("--scheme", choices=("uniform", "optimal", "double-optimal"),
                   default="uniform")
    p.set_defaults(func=_cmd_three_body)

    return parser


def _apply_config_file(args: argparse.Namespace) -> None:
    if args.config is None:
        return
    try:
        with open(args.config) as fh:
            overrides = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(overrides, dict):
        raise ConfigError("config file must hold a JSON object")
    known = set(vars(args)) - {"func"}
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(args, dest, value)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        config = ExperimentConfig(
            experiment=args.experiment,
            params={k: v for k, v in vars(args).items()
                    if k not in _PLUMBING_KEYS and k != "experiment"},
            output=args.output, format=args.format, workers=args.workers)
        columns, rows, resolved = args.func(args)
        for path in _write_outputs(args, config.experiment, columns, rows, resolved):
            print(path)
        return 0
    except (ConfigError, ValueError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": 2}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": 3}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
