"""Command-line interface: one subcommand per experiment, JSON config in,
report/CSV/JSONL artifacts out.

Exit codes: 0 = success (statistical checks passed), 2 = a statistical or
conservation check failed, 1 = usage or I/O error (unknown flags, malformed
config, missing seed, unreadable paths).

The config file is a single JSON object; the schema is the field set of
:class:`avgeuler.experiments.ExperimentConfig`.  ``seed``, ``N``, ``M``,
``T`` and ``dt`` must always be stated explicitly.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .lattice import (
    SpectralField,
    alpha_coeff,
    build_truncation,
    field_to_json,
    format_float,
    is_positive,
    pair_coeff,
)
from .measures import (
    build_energy_density,
    build_gibbs_spec,
    sample_mu_ensemble,
    sample_nu_ensemble,
)
from .experiments import (
    ConservationBreachError,
    ExperimentConfig,
    build_provenance,
    load_initial_field,
    report_document,
    run_convergence,
    run_invariance,
    run_recurrence,
    run_surface_invariance,
    write_csv,
)
from .stepping import evolve

__all__ = ["cli", "main"]

_EXIT_PASS = 0
_EXIT_USAGE = 1
_EXIT_STAT_FAIL = 2


class _UsageError(Exception):
    """Bad invocation or unreadable input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's default 2
        self.exit(_EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="avgeuler",
                     description="Spectral simulator and invariant-measure "
                                 "laboratory for averaged two-dimensional "
                                 "ideal flow")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="path to the JSON experiment config")
        p.add_argument("--out", default=".",
                       help="output directory (created if missing)")
        return p

    add("sample", "draw an ensemble from the Gibbs or fixed-energy measure")
    add("evolve", "integrate one trajectory and log conservation")
    add("invariance", "Gibbs-measure invariance experiment")
    add("surface", "fixed-energy (level-set) invariance experiment")
    add("recurrence", "return-time experiment around a level-set start")
    p_density = add("density", "tabulate the energy density rho(r)")
    p_density.add_argument("--r-max", type=float, default=None,
                           help="largest r to tabulate (default: resolvable "
                                "support of the density)")
    p_density.add_argument("--points", type=int, default=1000,
                           help="number of grid points (default 1000)")
    add("convergence", "truncation-convergence experiment")
    p_coeffs = add("coeffs", "tabulate interaction coefficients for one mode")
    p_coeffs.add_argument("--k", required=True, metavar="K1,K2",
                          help="output mode, e.g. 0,1")
    return parser


def _load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        return ExperimentConfig.from_json(text)
    except ValueError as exc:
        raise _UsageError(f"invalid config {path}: {exc}") from exc


def _ensure_outdir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise _UsageError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_report(out: str, experiment: str, config: ExperimentConfig,
                  results: dict, elapsed: float) -> str:
    path = os.path.join(out, "report.json")
    _write_text(path, report_document(experiment, config, results,
                                      build_provenance(elapsed)))
    return path


def _conservation_columns(traj) -> dict:
    e0, s0 = traj.energies[0], traj.enstrophies[0]
    scale_e = max(abs(e0), 1e-300)
    scale_s = max(abs(s0), 1e-300)
    return {
        "t": list(traj.times),
        "energy": list(traj.energies),
        "enstrophy": list(traj.enstrophies),
        "rel_energy_drift": [abs(e - e0) / scale_e for e in traj.energies],
        "rel_enstrophy_drift": [abs(s - s0) / scale_s for s in traj.enstrophies],
    }


# ---------------------------------------------------------------------------
# Subcommand handlers (each returns an exit code)
# ---------------------------------------------------------------------------

def _cmd_sample(args) -> int:
    config = _load_config(args.config)
    out = _ensure_outdir(args.out)
    spec = build_gibbs_spec(config.truncation(), config.params())
    if config.measure == "nu":
        r = float(config.r) if config.r is not None else spec.mean_energy
        coeffs, _ = sample_nu_ensemble(spec, r, config.simplex_config(),
                                       config.seed, config.M)
        tag = f"fixed-energy (r = {r:g})"
    else:
        coeffs = sample_mu_ensemble(spec, config.seed, config.M)
        tag = "Gibbs"
    path = os.path.join(out, "samples.jsonl")
    lines = [field_to_json(SpectralField(spec.trunc, row), spec.params)
             for row in coeffs]
    _write_text(path, "\n".join(lines) + "\n")
    print(f"sample: wrote {config.M} {tag} fields "
          f"(N={config.N}, d={spec.trunc.dim}) to {path}")
    return _EXIT_PASS


def _cmd_evolve(args) -> int:
    config = _load_config(args.config)
    out = _ensure_outdir(args.out)
    params = config.params()
    trunc = config.truncation()
    spec = build_gibbs_spec(trunc, params)
    try:
        start = load_initial_field(config, spec)
    except (OSError, ValueError) as exc:
        raise _UsageError(str(exc)) from exc
    from .lattice import build_coeff_table
    table = build_coeff_table(trunc, params)
    t0 = time.perf_counter()
    n_steps = max(int(round(config.T / abs(config.dt))), 1)
    traj = evolve(start, table, config.stepper(), config.T,
                  record_stride=config.record_stride, snapshot_stride=n_steps)
    elapsed = time.perf_counter() - t0
    _write_text(os.path.join(out, "trajectory.jsonl"), traj.to_jsonl())
    cols = _conservation_columns(traj)
    write_csv(os.path.join(out, "conservation.csv"), list(cols), cols)
    drift_e, drift_s = traj.energy_drift, traj.enstrophy_drift
    ok = drift_e <= config.conservation_tol and drift_s <= config.conservation_tol
    _write_report(out, "evolve", config, {
        "passed": ok,
        "steps": len(traj.times) - 1,
        "final_time": traj.times[-1],
        "max_rel_energy_drift": drift_e,
        "max_rel_enstrophy_drift": drift_s,
        "conservation_tol": config.conservation_tol,
    }, elapsed)
    print(f"evolve: {'pass' if ok else 'FAIL'} T={config.T:g} "
          f"scheme={config.scheme} |dE|/E={drift_e:.3e} |dS|/S={drift_s:.3e}")
    return _EXIT_PASS if ok else _EXIT_STAT_FAIL


def _cmd_invariance(args) -> int:
    config = _load_config(args.config)
    out = _ensure_outdir(args.out)
    t0 = time.perf_counter()
    report = run_invariance(config)
    elapsed = time.perf_counter() - t0
    cols = report.moment_columns()
    write_csv(os.path.join(out, "invariance_moments.csv"), list(cols), cols)
    ccols = _conservation_columns(report.sample_trajectory)
    write_csv(os.path.join(out, "conservation.csv"), list(ccols), ccols)
    _write_report(out, "invariance", config, report.results_payload(), elapsed)
    payload = report.results_payload()
    print(f"invariance: {'pass' if report.passed else 'FAIL'} "
          f"M={config.M} T={config.T:g} max|z|={payload['max_abs_drift_z']:.2f} "
          f"min KS p={payload['min_ks_p']:.2e} "
          f"(corrected level {report.ks_corrected_level:.2e})")
    return _EXIT_PASS if report.passed else _EXIT_STAT_FAIL


def _cmd_surface(args) -> int:
    config = _load_config(args.config)
    out = _ensure_outdir(args.out)
    t0 = time.perf_counter()
    report = run_surface_invariance(config)
    elapsed = time.perf_counter() - t0
    cols = report.moment_columns()
    write_csv(os.path.join(out, "surface_moments.csv"), list(cols), cols)
    _write_report(out, "surface", config, report.results_payload(), elapsed)
    print(f"surface: {'pass' if report.passed else 'FAIL'} r={report.r:.6g} "
          f"confinement={report.confinement_max:.2e} "
          f"max|z|={float(np.max(np.abs(report.drift_z))):.2f} "
          f"offdiag|z|={report.offdiag_max_z:.2f}")
    return _EXIT_PASS if report.passed else _EXIT_STAT_FAIL


def _cmd_recurrence(args) -> int:
    config = _load_config(args.config)
    out = _ensure_outdir(args.out)
    t0 = time.perf_counter()
    result = run_recurrence(config)
    elapsed = time.perf_counter() - t0
    lines = [f'{{"t": {format_float(rec["t"])}, '
             f'"dist_sq": {format_float(rec["dist_sq"])}}}'
             for rec in result.distance_lines()]
    _write_text(os.path.join(out, "distances.jsonl"), "\n".join(lines) + "\n")
    _write_report(out, "recurrence", config, result.results_payload(), elapsed)
    if result.never_exited:
        outcome = "never exits the inner ball"
    elif result.return_times:
        outcome = (f"{len(result.return_times)} returns, "
                   f"first at t={result.first_return:g}")
    else:
        outcome = "no return detected"
    print(f"recurrence: eps={result.epsilon:.6g} T_max={result.t_max:g} "
          f"{outcome}")
    return _EXIT_PASS


def _cmd_density(args) -> int:
    config = _load_config(args.config)
    out = _ensure_outdir(args.out)
    if args.points < 2:
        raise _UsageError(f"--points must be >= 2, got {args.points}")
    spec = build_gibbs_spec(config.truncation(), config.params())
    density = build_energy_density(spec)
    r_max = args.r_max if args.r_max is not None else density.resolvable_support()[1]
    if not r_max > 0:
        raise _UsageError(f"--r-max must be > 0, got {r_max}")
    grid = np.linspace(0.0, float(r_max), args.points)
    values = density(grid)
    path = os.path.join(out, "density.csv")
    write_csv(path, ["r", "rho"], {"r": list(grid), "rho": list(values)})
    diag = density.diagnostics()
    print(f"density: wrote {args.points} points on [0, {r_max:g}] to {path} "
          f"(mass error {abs(diag['mass'] - 1.0):.2e})")
    return _EXIT_PASS


def _cmd_convergence(args) -> int:
    config = _load_config(args.config)
    out = _ensure_outdir(args.out)
    t0 = time.perf_counter()
    table = run_convergence(config)
    elapsed = time.perf_counter() - t0
    cols = {
        "n_small": list(table.n_small),
        "estimate": list(table.estimates),
        "standard_error": list(table.standard_errors),
    }
    write_csv(os.path.join(out, "convergence.csv"), list(cols), cols)
    _write_report(out, "convergence", config, table.results_payload(), elapsed)
    pairs = ", ".join(f"{n}:{e:.3e}" for n, e in
                      zip(table.n_small, table.estimates))
    print(f"convergence: {'pass' if table.strictly_decreasing else 'FAIL'} "
          f"vs N={table.n_large} ({pairs})")
    return _EXIT_PASS if table.strictly_decreasing else _EXIT_STAT_FAIL


def _cmd_coeffs(args) -> int:
    config = _load_config(args.config)
    out = _ensure_outdir(args.out)
    try:
        parts = args.k.split(",")
        k = (int(parts[0]), int(parts[1]))
        if len(parts) != 2:
            raise ValueError
    except (ValueError, IndexError):
        raise _UsageError(f"--k must be two integers like 0,1, got {args.k!r}")
    trunc = config.truncation()
    params = config.params()
    ksq = k[0] * k[0] + k[1] * k[1]
    if k == (0, 0) or ksq > trunc.N:
        raise _UsageError(f"mode {k} is not a retained nonzero mode at N={trunc.N}")
    rows = {"h1": [], "h2": [], "one_sided_coeff": [], "conserving_coeff": []}
    signed = sorted({m for m in trunc.modes} | {(-m[0], -m[1]) for m in trunc.modes})
    for h in signed:
        rem = (k[0] - h[0], k[1] - h[1])
        if h == k or rem == (0, 0):
            continue
        if rem[0] * rem[0] + rem[1] * rem[1] > trunc.N:
            continue
        rows["h1"].append(h[0])
        rows["h2"].append(h[1])
        rows["one_sided_coeff"].append(alpha_coeff(h, k, params))
        rows["conserving_coeff"].append(pair_coeff(h, k, params))
    path = os.path.join(out, "coeffs.csv")
    write_csv(path, list(rows), rows)
    print(f"coeffs: wrote {len(rows['h1'])} interaction rows for k={k} to {path}")
    return _EXIT_PASS


_HANDLERS = {
    "sample": _cmd_sample,
    "evolve": _cmd_evolve,
    "invariance": _cmd_invariance,
    "surface": _cmd_surface,
    "recurrence": _cmd_recurrence,
    "density": _cmd_density,
    "convergence": _cmd_convergence,
    "coeffs": _cmd_coeffs,
}


def cli(argv=None) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(f"avgeuler {args.command}: error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    except OSError as exc:
        print(f"avgeuler {args.command}: I/O error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    except ConservationBreachError as exc:
        print(f"avgeuler {args.command}: {exc}", file=sys.stderr)
        return _EXIT_STAT_FAIL
    except RuntimeError as exc:
        print(f"avgeuler {args.command}: run failed: {exc}", file=sys.stderr)
        return _EXIT_STAT_FAIL
    except ValueError as exc:
        print(f"avgeuler {args.command}: error: {exc}", file=sys.stderr)
        return _EXIT_USAGE


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
