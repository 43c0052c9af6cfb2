"""qlground: ground states of the 2D quasilinear Schrodinger equation.

Subcommands:
  sp          minimize the S_p quotient, write sp.json
  check       audit H1-H6 for the configured model, write hypotheses.json
  solve       mountain-pass solve + bound checks, write report.json,
              solution.csv, history.csv
  oracle      radial shooting cross-check of a constant_V_power solve,
              write oracle.json, oracle_profile.csv
  verify-all  sp -> check -> solve -> oracle

Every command also writes manifest.cfg (the resolved configuration).

Usage:
  python -m qlground solve --config runs/power.cfg
  python -m qlground verify-all --out runs/acceptance --seed 3
  QLGROUND_LOG_LEVEL=DEBUG python -m qlground sp

Environment:
  QLGROUND_LOG_LEVEL   optional, default INFO
  (a .env file at the repository root is loaded when present)

Exit codes:
  0 ok, 1 non-convergence, 2 checks failed, 3 I/O, 4 validation
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Callable, List, Optional

from dotenv import load_dotenv

from .config import RunConfig, load_config
from .discretization import Grid2D
from .energy import evaluate_J_bar
from .errors import (EXIT_CHECKS_FAILED, EXIT_NON_CONVERGENCE, EXIT_OK, DomainError,
                     NonConvergenceError, OracleUnavailableError, QlgroundError,
                     ValidationError)
from .model import (check_hypotheses, cp_threshold, default_samples, gaussian_sp_bound,
                    level_upper_bound, sp_level_bound)
from .oracle import compare_profiles, criticality_residual, ground_state_shooting
from .report import (ensure_dir, radial_rows, read_json, read_solution, solution_rows,
                     write_csv, write_json, write_manifest)
from .solver import compute_sp, gaussian_sweep_bound, mountain_pass_solve, verify_solution

ROOT = Path(__file__).resolve().parent.parent
ORACLE_MODEL = "constant_V_power"
PROFILE_TOLERANCE = 0.02
RESIDUAL_FACTOR = 10.0

logger = logging.getLogger("qlground")


def _announce(path: Path) -> None:
    sys.stderr.write(f"Wrote {path}\n")


def _known_sp(config: RunConfig) -> Optional[float]:
    data = read_json(config.output_dir / "sp.json")
    return None if data is None else float(data["S_p"])


def _start(config: RunConfig, sp_value: Optional[float] = None):
    out = ensure_dir(config.output_dir)
    model = config.build_model(sp_value if config.cp is None else None)
    _announce(write_manifest(out / "manifest.cfg", config.manifest(resolved_cp=model.Cp)))
    return out, model


# ---- commands ----

def cmd_sp(config: RunConfig) -> int:
    """Minimize the S_p quotient and compare C_p with its threshold."""
    out, model = _start(config)
    grid = config.radial_grid()
    result = compute_sp(model, grid, restarts=config.restarts, seed=config.seed)
    try:
        threshold = cp_threshold(model.theta, model.p, result.value)
    except DomainError:
        threshold = None
    payload = {
        **result.to_dict(),
        "p": model.p,
        "V1": model.V1,
        "grid": {"r_max": grid.r_max, "m": grid.m},
        "gaussian_sweep_bound": gaussian_sweep_bound(grid, model.V1, model.p),
        "gaussian_closed_form": gaussian_sp_bound(model.V1, model.p),
        "threshold": threshold,
        "Cp": model.Cp,
        "H6_margin": threshold is not None and model.Cp > threshold,
        "level_upper_bound": level_upper_bound(model.theta),
    }
    if model.p > 2.0:
        payload["sp_level_bound"] = sp_level_bound(model.p, model.Cp, result.value)
    _announce(write_json(out / "sp.json", payload))
    _announce(write_csv(out / "sp_profile.csv", ["r", "u"],
                        zip(grid.r, result.minimizer.values)))
    return EXIT_OK


def cmd_check(config: RunConfig) -> int:
    """Audit H1-H6 for the configured model."""
    sp_value = _known_sp(config)
    out, model = _start(config, sp_value)
    s, x = default_samples(seed=config.seed)
    report = check_hypotheses(model, s, x, sp_value=sp_value)
    payload = {"model": model.name, "params": model.params, "sp_value": sp_value,
               "passed_H1_H5": report.passed(), "hypotheses": report.to_dict()}
    _announce(write_json(out / "hypotheses.json", payload))
    for name, result in report.results.items():
        logger.info("%s: %s %s", name, result.status, result.detail)
    return EXIT_OK if report.passed() else EXIT_CHECKS_FAILED


def cmd_solve(config: RunConfig) -> int:
    """Mountain-pass solve followed by the bound checks."""
    sp_value = _known_sp(config)
    out, model = _start(config, sp_value)
    grid = config.grid2d()
    status = EXIT_OK
    try:
        report = mountain_pass_solve(model, grid, config.solver_options())
    except NonConvergenceError as exc:
        report, status = exc.report, EXIT_NON_CONVERGENCE
        sys.stderr.write(f"ERROR: {exc}\n")
    if report is None:
        return EXIT_NON_CONVERGENCE
    if report.converged:
        report.bound_checks = verify_solution(model, report, config.rho_scan,
                                              sp_value=sp_value, seed=config.seed)
        if not report.checks_passed():
            status = EXIT_CHECKS_FAILED

    payload = {"model": model.name, "params": model.params,
               "grid": {"R": grid.R, "n": grid.n}, "sp_value": sp_value,
               "tol": config.tol, **report.to_dict()}
    _announce(write_json(out / "report.json", payload))
    u = model.kernel.f_inverse(report.solution.values)
    _announce(write_csv(out / "solution.csv", ["x1", "x2", "v", "u"],
                        solution_rows(report.solution, u)))
    _announce(write_csv(out / "history.csv", ["iteration", "energy", "residual"], report.history))
    return status


def _prior_solve(config: RunConfig) -> RunConfig:
    for candidate in (config.output_dir, config.output_dir / ORACLE_MODEL):
        data = read_json(candidate / "report.json")
        if data is not None and data.get("model") == ORACLE_MODEL:
            return config.with_model(ORACLE_MODEL, candidate)
    raise OracleUnavailableError(
        f"no prior {ORACLE_MODEL} solve under {config.output_dir}; run solve first")


def cmd_oracle(config: RunConfig) -> int:
    """Shooting cross-check of a prior constant_V_power solve."""
    config = _prior_solve(config)
    prior = read_json(config.output_dir / "report.json")
    sp_value = prior.get("sp_value")
    out, model = _start(config, sp_value)
    if not math.isclose(model.Cp, prior["params"]["Cp"], rel_tol=1e-12):
        raise OracleUnavailableError("prior solve used a different Cp; rerun solve")
    grid = Grid2D(prior["grid"]["R"], prior["grid"]["n"])
    solution = read_solution(config.output_dir / "solution.csv", grid)

    outcome = ground_state_shooting(model, config.r_max, config.oracle_step, config.oracle_tol_v0,
                                    m=config.m, v0_min=config.oracle_v0_min,
                                    v0_max=config.oracle_v0_max, points=config.oracle_sweep_points)
    profile = outcome.profile
    difference = compare_profiles(solution, profile)
    residual = criticality_residual(model, profile, grid.spacing ** 2)
    limit = RESIDUAL_FACTOR * float(prior.get("tol", config.tol))
    shooting_energy = evaluate_J_bar(model, profile).total
    solve_energy = float(prior["energy"])
    payload = {
        "shooting": outcome.to_dict(),
        "relative_l2_difference": difference,
        "profile_tolerance": PROFILE_TOLERANCE,
        "criticality_residual": residual,
        "residual_limit": limit,
        "energy_shooting": shooting_energy,
        "energy_mountain_pass": solve_energy,
        "energy_relative_difference": abs(shooting_energy - solve_energy) / abs(solve_energy),
        "profiles_agree": difference <= PROFILE_TOLERANCE,
        "residual_ok": residual <= limit,
    }
    if difference > PROFILE_TOLERANCE:
        payload["finding"] = ("mountain-pass and shooting profiles differ beyond tolerance; "
                              "they may be distinct positive solutions")
        logger.warning(payload["finding"])
    _announce(write_json(out / "oracle.json", payload))
    u = model.kernel.f_inverse(profile.values)
    _announce(write_csv(out / "oracle_profile.csv", ["r", "v", "u"], radial_rows(profile, u)))
    return EXIT_OK if payload["profiles_agree"] and payload["residual_ok"] else EXIT_CHECKS_FAILED


def cmd_verify_all(config: RunConfig) -> int:
    """sp, check, solve, oracle in order; first non-zero status wins."""
    steps: List[Callable[[], int]] = [lambda: cmd_sp(config), lambda: cmd_check(config),
                                      lambda: cmd_solve(config)]
    if config.model_name != ORACLE_MODEL:
        sub = config.with_model(ORACLE_MODEL, config.output_dir / ORACLE_MODEL)
        steps.append(lambda: cmd_solve(sub))
    steps.append(lambda: cmd_oracle(config))

    first = EXIT_OK
    for step in steps:
        status = step()
        if first == EXIT_OK:
            first = status
        if status not in (EXIT_OK, EXIT_CHECKS_FAILED):
            break
    return first


COMMANDS = {
    "sp": cmd_sp,
    "check": cmd_check,
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "verify-all": cmd_verify_all,
}


# ---- entry point ----

class _Parser(argparse.ArgumentParser):
    """Usage errors raise ValidationError instead of exiting with status 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ValidationError(f"{self.prog}: {message}")


def _parse_args(argv: Optional[List[str]]) -> argparse.Namespace:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="dotted key=value run configuration")
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, default=None, help="random seed (overrides solver.seed)")
    p = _Parser(prog="qlground", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    for name, func in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(func.__doc__ or name).strip().splitlines()[0])
    return p.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv(ROOT / ".env", override=False)
    logging.basicConfig(level=os.getenv("QLGROUND_LOG_LEVEL", "INFO").upper(), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        args = _parse_args(argv)
        config = load_config(args.config, out=args.out, seed=args.seed)
        return COMMANDS[args.cmd](config)
    except QlgroundError as exc:
        sys.stderr.write(f"ERROR: {exc}\n")
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
