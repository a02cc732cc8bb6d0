from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

import numpy as np
import pandas as pd

from ecodyn import __version__, utils
from ecodyn.config import RunConfig, load_config
from ecodyn.errors import (
    DataIOError,
    DerivationError,
    EcodynError,
    ValidationError,
    VerificationError,
)
from ecodyn.fitting import (
    Dataset,
    FitResult,
    FitSetting,
    fit_cobb_douglas,
    fit_logistic_pf,
    fit_sshaped,
    fitted_values,
)
from ecodyn.hamiltonians import (
    bihamiltonian_ab,
    model_hamiltonians,
    model_structures,
    sato_curl_residual,
    sato_divergence,
    sato_potential_residual,
    sato_solve_c,
)
from ecodyn.integrators import integrate
from ecodyn.models import SatoModel, Trajectory, model_rhs, state_sampler
from ecodyn.poisson import HamiltonianFn, conservation_residual, structure_report
from ecodyn.production import (
    DebtPF,
    Family,
    derive_bihamiltonian_cobb_douglas,
    derive_production_function,
    surface_residual,
)

logger = utils.get_colored_logger("CLI")


def _line(name: str, value) -> None:
    if isinstance(value, (float, np.floating)):
        value = repr(float(value))
    print(f"{name} = {value}")


def write_csv(df: pd.DataFrame, path: Optional[Path], stream: TextIO | None = None) -> None:
    """Header row, LF endings, shortest round-trip floats."""

    if path is None:
        df.to_csv(stream or sys.stdout, index=False, lineterminator="\n")
        return
    try:
        df.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e.strerror or e}") from e
    logger.info(f"Wrote {len(df)} rows to {path}")


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    columns = {"t": traj.times}
    for i in range(traj.dim):
        columns[f"x{i + 1}"] = traj.states[:, i]
    for name in traj.monitor_names:
        columns[name] = traj.monitor(name)
    return pd.DataFrame(columns)


def simulate(cfg: RunConfig) -> tuple[Trajectory, list[HamiltonianFn]]:
    model, x0 = cfg.model, cfg.x0
    domain = model.flow_domain()
    domain.check(x0)

    monitors = []
    for H in model_hamiltonians(model, cfg.derive.free_parameter()):
        if H.admissible(x0):
            monitors.append(H)
        else:
            logger.warning(f"Skipping monitor {H.name}: x0 is outside its domain")

    traj = integrate(
        model_rhs(model), x0, cfg.integrator, monitors, domain, str(model.kind)
    )
    return traj, monitors


def cmd_simulate(cfg: RunConfig) -> int:
    traj, monitors = simulate(cfg)
    # the CSV owns stdout when no path is configured
    out = sys.stderr if cfg.output.path is None else sys.stdout
    write_csv(trajectory_frame(traj), cfg.output.path)

    for H in monitors:
        drift = conservation_residual(H, traj).max_abs
        print(f"drift[{H.name}] = {drift!r}", file=out)
    print(f"samples = {len(traj.times)}", file=out)
    print("domain = ok", file=out)
    return 0


def cmd_verify(cfg: RunConfig, samples: int | None = None) -> int:
    model = cfg.model
    samples = samples or cfg.verify.samples
    thresholds = cfg.verify
    failures = []

    def check(label: str, value: float, limit: float) -> None:
        status = "ok" if value <= limit else "FAIL"
        print(f"{label} = {float(value)!r} [{status}]")
        if status != "ok":
            failures.append(label)

    for s in model_structures(model, cfg.derive.free_parameter(), samples, cfg.seed):
        report = structure_report(s.pi, s.sampler, s.H, s.rhs)
        check(f"{s.label}.skew", report.skew.max_abs, thresholds.skew_tol)
        check(f"{s.label}.jacobi", report.jacobi.max_abs, thresholds.jacobi_tol)
        if report.consistency is not None:
            check(
                f"{s.label}.consistency",
                report.consistency.max_abs,
                thresholds.consistency_tol,
            )
        for note in report.notes:
            print(f"{s.label}.note = {note}")

    if isinstance(model, SatoModel):
        sampler = state_sampler(model, samples, cfg.seed)
        _line("divergence", sato_divergence(model))
        _line("b1+b2+b3", float(np.sum(model.b)))
        check("curl", sato_curl_residual(model, sampler).max_abs, thresholds.skew_tol)
        check(
            "potential",
            sato_potential_residual(model, sampler).max_abs,
            thresholds.consistency_tol,
        )

    if failures:
        raise VerificationError(f"residuals above threshold: {', '.join(failures)}")
    return 0


def _report_pf(pf, route: str) -> None:
    _line("route", route)
    _line("family", pf.family)
    if pf.family is Family.CobbDouglas:
        _line("A", pf.A)
    elif pf.family is Family.Logistic:
        _line("C", pf.C)
        _line("N_f", pf.N_f)
        _line("N_L", pf.N_L)
        _line("N_K", pf.N_K)
    _line("alpha", pf.alpha)
    _line("beta", pf.beta)


def _report_debt(pf: DebtPF) -> None:
    _line("route", "level-set")
    _line("family", pf.family)
    _line("N_f", pf.N_f)
    _line("N_L", pf.N_L)
    _line("slope (b3)", pf.b3)
    _line("G.constant", pf.C)
    _line("G.capital (b2)", pf.b2)
    _line("G.capital_scale (-a21/b2)", pf.capital_scale)
    _line("G.debt (-b1)", -pf.b1)
    _line("G.debt_scale (-a12/b1)", pf.debt_scale)
    _line("G.labor (1/b4)", 1.0 / pf.b4)


def cmd_derive(cfg: RunConfig) -> int:
    model, x0 = cfg.model, cfg.x0

    if isinstance(model, SatoModel):
        c = sato_solve_c(model.b, cfg.derive.free_parameter())
        pf = derive_production_function(model, x0, c)
        traj, _ = simulate(cfg)
        _report_pf(pf, "coefficient-solve")
        _line("surface_residual", surface_residual(pf, traj).max_abs)

        try:
            params = bihamiltonian_ab(model.b)
        except DerivationError as e:
            _line("route", "bi-hamiltonian")
            _line("unavailable", e)
            return 0
        pf = derive_bihamiltonian_cobb_douglas(params, x0)
        _report_pf(pf, "bi-hamiltonian")
        _line("a", params.a)
        _line("b", params.b)
        _line("surface_residual", surface_residual(pf, traj).max_abs)
        return 0

    pf = derive_production_function(model, x0)
    traj, _ = simulate(cfg)
    if isinstance(pf, DebtPF):
        _report_debt(pf)
    else:
        _report_pf(pf, "level-set")
    _line("surface_residual", surface_residual(pf, traj).max_abs)
    return 0


def _capacities(text: str | None):
    if text is None:
        return None
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as e:
        raise ValidationError(f"not a number list: {text!r}", "--capacities") from e
    if len(values) != 3:
        raise ValidationError("expected N_f,N_L,N_K", "--capacities")
    return values


def run_fit(args: argparse.Namespace, data: Dataset) -> FitResult:
    family = Family(args.family)
    setting = FitSetting(seed=args.seed)

    if family is Family.CobbDouglas:
        return fit_cobb_douglas(data, crs=args.crs)
    if family is Family.Logistic:
        return fit_logistic_pf(
            data, _capacities(args.capacities), free=args.free_capacities, setting=setting
        )
    if family is Family.SShaped:
        return fit_sshaped(data, setting)
    raise ValidationError(f"the {family} family is derived, not fitted", "--family")


def cmd_fit(args: argparse.Namespace) -> int:
    data = Dataset.from_csv(args.csv)
    result = run_fit(args, data)

    _line("family", result.family)
    for name, value in result.params.items():
        _line(name, value)
    _line("rss", result.rss)
    _line("r_squared", result.r_squared)
    _line("crs", str(result.crs).lower())
    _line("converged", str(result.converged).lower())
    if result.iterations:
        _line("iterations", result.iterations)

    if args.emit is not None:
        fitted = fitted_values(result.pf, data)
        frame = data.to_frame()
        frame["fitted"] = fitted
        frame["residual"] = data.Y - fitted
        write_csv(frame, Path(args.emit))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecodyn",
        description="Hamiltonian Lotka-Volterra growth models and production functions",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="integrate a model, write a CSV")
    simulate.add_argument("config", type=Path)
    simulate.add_argument("-o", "--output", type=Path, help="override [output].path")

    verify = commands.add_parser("verify", help="check the Poisson structures")
    verify.add_argument("config", type=Path)
    verify.add_argument("--samples", type=int, help="override [verify].samples")
    verify.add_argument("--seed", type=int, help="override the config seed")

    derive = commands.add_parser("derive", help="derive the production function")
    derive.add_argument("config", type=Path)

    fit = commands.add_parser("fit", help="fit a production function to L,K,Y data")
    fit.add_argument("csv", type=Path)
    fit.add_argument(
        "--family",
        choices=[str(f) for f in (Family.CobbDouglas, Family.Logistic, Family.SShaped)],
        default=str(Family.CobbDouglas),
    )
    fit.add_argument("--crs", action="store_true", help="impose alpha + beta = 1")
    fit.add_argument("--capacities", help="fixed N_f,N_L,N_K for the logistic family")
    fit.add_argument("--free-capacities", action="store_true")
    fit.add_argument("--seed", type=int, default=FitSetting().seed)
    fit.add_argument("--emit", help="write fitted-vs-actual CSV here")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    utils.configure_logging()
    logger.info(f"Running {args.command}")

    try:
        if getattr(args, "seed", None) is not None and args.seed < 0:
            raise ValidationError("must be nonnegative", "--seed")
        if args.command == "fit":
            return cmd_fit(args)

        cfg = load_config(args.config)
        if args.command == "simulate":
            if args.output is not None:
                cfg.output.path = args.output
            return cmd_simulate(cfg)
        if args.command == "verify":
            if args.seed is not None:
                cfg.seed = args.seed
            if args.samples is not None and args.samples < 1:
                raise ValidationError("must be positive", "--samples")
            return cmd_verify(cfg, args.samples)
        return cmd_derive(cfg)

    except EcodynError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return e.exit_code
