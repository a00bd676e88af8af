"""Command-line surface: one subcommand per computation, JSON or CSV reports."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, TextIO

from . import __version__
from .chow_balance import balance_flow, lambda_center_of_mass, verify_balanced_degeneration
from .const import (
    CMD_BALANCE_FLOW,
    CMD_CHOW_VERIFY,
    CMD_ENERGY_SCAN,
    CMD_LADDER_TABLE,
    CMD_MODEL_MU,
    CMD_THETA_CHECK,
    DEFAULT_CHOW_TOL,
    DEFAULT_EPSILON_POWER,
    DEFAULT_ERROR_CONSTANT,
    DEFAULT_FLOW_MAX_ITER,
    DEFAULT_FLOW_TOL,
    DEFAULT_LADDER_FAR_TOL,
    DEFAULT_LADDER_TOL,
    DEFAULT_MU_TOL,
    DEFAULT_THETA_TOL,
    ENERGY_SLOPE_BOUND,
    FLOAT_FORMAT,
    FORMAT_CSV,
    FORMAT_JSON,
    LADDER_REF_DIAGONAL,
    LADDER_REF_FAR,
    LADDER_REF_NEIGHBOUR,
    SCHEMA_VERSION,
)
from .energy import DeviationModel, SurfaceData, fit_loglog_slope, scan_energy
from .exceptions import ConfigError, CuspBalanceError, MaxIterExceededError
from .model_kernel import (
    LadderPartition,
    ModelLevel,
    classify,
    expected_mu,
    ladder_integrals,
    mu_auto,
    mu_ladder,
    mu_route,
)
from .neck import theta_identity
from .schemas import RunConfig, load_cycle_config, load_run_config, parse_parameters

_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2


@dataclass(frozen=True, slots=True)
class Check:
    """A single asserted tolerance."""

    name: str
    value: float
    bound: float
    passed: bool

    @classmethod
    def at_most(cls, name: str, value: float, bound: float) -> Check:
        return cls(name, value, bound, bool(value <= bound))

    @classmethod
    def above(cls, name: str, value: float, bound: float) -> Check:
        return cls(name, value, bound, bool(value > bound))

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "bound": self.bound,
            "passed": self.passed,
        }


@dataclass
class Report:
    """Rows and checks produced by one subcommand."""

    command: str
    columns: tuple[str, ...]
    rows: list[list[Any]] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def failures(self) -> list[str]:
        failed = [
            f"{check.name}: {check.value!r} vs bound {check.bound!r}"
            for check in self.checks
            if not check.passed
        ]
        return failed + self.errors

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict[str, Any]:
        return {
            "schemaVersion": SCHEMA_VERSION,
            "command": self.command,
            "columns": list(self.columns),
            "rows": self.rows,
            "checks": [check.as_dict() for check in self.checks],
            "passed": self.passed,
            "failures": self.failures,
        }


def _tol(tol: float | None, default: float) -> float:
    return default if tol is None else tol


def _map(func: Callable[[Any], Any], items: Sequence[Any], threads: int) -> list[Any]:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(func, items))
    return [func(item) for item in items]


def sweep_indices(level: ModelLevel) -> list[int]:
    """Indices on both sides of each regime boundary at level k."""
    root = level.sqrt_k
    inner = root / level.log_k
    outer = root * level.log_k
    candidates = {
        1, 2, 3,
        math.floor(inner), math.ceil(inner),
        math.floor(root),
        math.floor(outer), math.ceil(outer),
    }
    return sorted(a for a in candidates if a >= 1)


def cmd_model_mu(params: dict[str, Any], tol: float | None, threads: int) -> Report:
    """Rows (a, regime, mu, route, |mu - expected|, ladder)."""
    level = ModelLevel(params["k"])
    indices = sweep_indices(level) if params["sweep"] else list(params["a"])
    tol = _tol(tol, DEFAULT_MU_TOL)
    n_max = LadderPartition.for_level(level).n_max

    def row(a: int) -> list[Any]:
        value = mu_auto(level, a)
        ladder = mu_ladder(level, a) if params["ladder"] and a <= n_max else None
        deviation = abs(value - expected_mu(a))
        return [a, classify(level, a).regime, value, mu_route(level, a), deviation, ladder]

    report = Report(CMD_MODEL_MU, ("a", "regime", "mu", "route", "deviation", "ladder"))
    report.rows = _map(row, indices, threads)
    report.checks = [Check.at_most(f"mu[{r[0]}]", r[4], tol) for r in report.rows]
    return report


def cmd_theta_check(params: dict[str, Any], tol: float | None, threads: int) -> Report:
    """Rows (b, integral, |integral - 2|)."""
    tol = _tol(tol, DEFAULT_THETA_TOL)
    values = _map(theta_identity, params["b"], threads)
    report = Report(CMD_THETA_CHECK, ("b", "integral", "deviation"))
    for b, value in zip(params["b"], values, strict=True):
        report.rows.append([b, value, abs(value - 2.0)])
        report.checks.append(Check.at_most(f"theta[{b!r}]", abs(value - 2.0), tol))
    return report


def _ladder_references(n: int) -> list[tuple[str, int, float]]:
    refs = [
        ("I", n, LADDER_REF_DIAGONAL),
        ("I", n - 1, LADDER_REF_NEIGHBOUR),
        ("I", n - 2, LADDER_REF_FAR),
        ("I'", n, LADDER_REF_DIAGONAL),
        ("I'", n + 1, LADDER_REF_NEIGHBOUR),
    ]
    return [ref for ref in refs if ref[1] >= 0]


def cmd_ladder_table(params: dict[str, Any], tol: float | None, threads: int) -> Report:
    """Rows (n, a, integral, value, reference, deviation) for the interval integrals."""
    level = ModelLevel(params["k"])
    n_max = params.get("n_max") or LadderPartition.for_level(level).n_max
    near_tol = _tol(tol, DEFAULT_LADDER_TOL)
    jobs = [
        (n, a)
        for n in range(1, n_max + 1)
        for a in sorted({ref[1] for ref in _ladder_references(n)})
    ]
    results = _map(lambda job: ladder_integrals(level, job[1], job[0]), jobs, threads)
    values = dict(zip(jobs, results, strict=True))

    report = Report(CMD_LADDER_TABLE, ("n", "a", "integral", "value", "reference", "deviation"))
    for n in range(1, n_max + 1):
        for name, a, reference in _ladder_references(n):
            value = values[(n, a)][0 if name == "I" else 1]
            deviation = abs(value - reference)
            report.rows.append([n, a, name, value, reference, deviation])
            bound = DEFAULT_LADDER_FAR_TOL if reference == LADDER_REF_FAR else near_tol
            report.checks.append(Check.at_most(f"{name}[{a},{n}]", deviation, bound))
    return report


def cmd_chow_verify(params: dict[str, Any], tol: float | None, threads: int) -> Report:
    """One row (d, k, lambda_k, ||mu|| at, below and above lambda_k)."""
    tol = _tol(tol, DEFAULT_CHOW_TOL)
    result = verify_balanced_degeneration(params["d"], params["k"], tol)
    lam = f"{result.lam.numerator}/{result.lam.denominator}"
    report = Report(
        CMD_CHOW_VERIFY, ("d", "k", "lambda", "norm", "norm_below", "norm_above")
    )
    report.rows.append(
        [result.d, result.k, lam, result.norm_at_lambda, result.norm_below, result.norm_above]
    )
    report.checks.append(Check.at_most("balanced", result.norm_at_lambda, tol))
    report.errors.extend(f for f in result.failures if "strictness" in f)
    return report


def write_plot_data(path: str | Path, rows: Sequence[Sequence[Any]]) -> None:
    """Write two whitespace-separated columns: log k, log energy."""
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            log_k = format(math.log(row[0]), FLOAT_FORMAT)
            log_e = format(math.log(row[1]), FLOAT_FORMAT)
            handle.write(f"{log_k} {log_e}\n")


def cmd_energy_scan(params: dict[str, Any], tol: float | None, threads: int) -> Report:
    """Rows (k, energy, slope); checks positivity, decrease and the fitted slope."""
    surface = SurfaceData(params["g"], params["l"], params["d"])
    model = DeviationModel(
        error_constant=params.get("error_constant", DEFAULT_ERROR_CONSTANT),
        epsilon_power=params.get("epsilon_power", DEFAULT_EPSILON_POWER),
        cross_class=params["cross_class"],
        bulk_normalization=params["bulk"],
    )
    scan = scan_energy(surface, params["k"], model, threads=threads)
    report = Report(CMD_ENERGY_SCAN, ("k", "energy", "slope"))
    report.rows = [[row.k, row.energy, row.slope] for row in scan]
    for row in scan:
        report.checks.append(Check.above(f"positive[{row.k}]", row.energy, 0.0))
    for prev, row in zip(scan, scan[1:], strict=False):
        report.checks.append(Check.above(f"decreasing[{row.k}]", prev.energy, row.energy))
    if len(scan) > 1:
        bound = _tol(tol, ENERGY_SLOPE_BOUND)
        report.checks.append(Check.at_most("slope", fit_loglog_slope(scan), bound))
    if params.get("plot"):
        write_plot_data(params["plot"], report.rows)
        _LOGGER.info("Wrote plot data to %s", params["plot"])
    return report


def cmd_balance_flow(params: dict[str, Any], tol: float | None, threads: int) -> Report:
    """Rows (index, weight, moment) after balancing a cycle config."""
    tol = _tol(tol, DEFAULT_FLOW_TOL)
    config = load_cycle_config(params["config"])
    report = Report(CMD_BALANCE_FLOW, ("index", "weight", "moment"))
    try:
        result = balance_flow(
            config, tol=tol, max_iter=params.get("max_iter", DEFAULT_FLOW_MAX_ITER)
        )
    except MaxIterExceededError as err:
        _LOGGER.warning("Flow did not converge: %s", err)
        report.errors.append(str(err))
        result = err.best
    moments = lambda_center_of_mass(config.with_weights(result.weights)).diag()
    report.rows = [
        [i, weight, float(moment)]
        for i, (weight, moment) in enumerate(zip(result.weights, moments, strict=True))
    ]
    report.checks.append(Check.at_most("residual", result.residual, tol))
    return report


COMMANDS: dict[str, Callable[[dict[str, Any], float | None, int], Report]] = {
    CMD_MODEL_MU: cmd_model_mu,
    CMD_THETA_CHECK: cmd_theta_check,
    CMD_LADDER_TABLE: cmd_ladder_table,
    CMD_CHOW_VERIFY: cmd_chow_verify,
    CMD_ENERGY_SCAN: cmd_energy_scan,
    CMD_BALANCE_FLOW: cmd_balance_flow,
}


def run(config: RunConfig) -> Report:
    """Execute a validated run config."""
    _LOGGER.debug("Running %s with %s", config.command, config.parameters)
    return COMMANDS[config.command](config.parameters, config.tol, config.threads)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    return str(value)


def render(report: Report, fmt: str) -> str:
    """Render a report as JSON or CSV text."""
    if fmt == FORMAT_JSON:
        return json.dumps(report.as_dict(), indent=2) + "\n"
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([_cell(value) for value in row])
    return buffer.getvalue()


def _emit(text: str, out: str | None, stdout: TextIO) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


def _dump_failures(failures: list[str]) -> None:
    json.dump({"schemaVersion": SCHEMA_VERSION, "failures": failures}, sys.stderr)
    sys.stderr.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cusp-balance",
        description="Model Bergman kernel numerics and Chow balance checks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--format", choices=[FORMAT_JSON, FORMAT_CSV], default=None)
    parser.add_argument("--out", default=None, help="write the report here instead of stdout")
    parser.add_argument("--tol", type=float, default=None, help="override the default tolerance")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--config", default=None, help="JSON run config")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    model_mu = sub.add_parser(CMD_MODEL_MU, help="mu_a at one level")
    model_mu.add_argument("-k", type=float, required=True)
    model_mu.add_argument("-a", type=int, nargs="*", default=None)
    model_mu.add_argument(
        "--sweep",
        action="store_true",
        default=None,
        help="indices around each regime boundary",
    )
    model_mu.add_argument(
        "--ladder", action="store_true", default=None, help="add the ladder-sum route"
    )

    theta = sub.add_parser(CMD_THETA_CHECK, help="int h''/h^2 = 2 over a b grid")
    theta.add_argument("-b", type=float, nargs="*", default=None)

    ladder = sub.add_parser(CMD_LADDER_TABLE, help="ladder interval integrals")
    ladder.add_argument("-k", type=float, required=True)
    ladder.add_argument("--n-max", type=int, default=None)

    chow = sub.add_parser(CMD_CHOW_VERIFY, help="balanced degeneration at lambda_k")
    chow.add_argument("-d", type=int, required=True)
    chow.add_argument("-k", type=int, required=True)

    energy = sub.add_parser(CMD_ENERGY_SCAN, help="modeled energy over a k grid")
    energy.add_argument("-g", type=int, required=True)
    energy.add_argument("-l", type=int, required=True)
    energy.add_argument("-d", type=int, required=True)
    energy.add_argument("-k", type=int, nargs="+", required=True)
    energy.add_argument("--cross-class", default=None)
    energy.add_argument("--bulk", default=None)
    energy.add_argument("--error-constant", type=float, default=None)
    energy.add_argument("--epsilon-power", type=float, default=None)
    energy.add_argument("--plot", default=None, help="plot-data file (log k, log E)")

    flow = sub.add_parser(CMD_BALANCE_FLOW, help="balance a cycle config")
    flow.add_argument("config_file")
    flow.add_argument("--max-iter", type=int, default=None)
    return parser


def _parameters(args: argparse.Namespace) -> dict[str, Any]:
    """Collect subcommand arguments, dropping unset options."""
    skip = {"format", "out", "tol", "threads", "config", "verbose", "command"}
    params = {
        key: value for key, value in vars(args).items() if key not in skip and value is not None
    }
    if "config_file" in params:
        params["config"] = params.pop("config_file")
    return params


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge --config with command-line flags; flags win."""
    if args.config:
        base = load_run_config(args.config)
        if args.command == base.command:
            merged = {**base.parameters, **_parameters(args)}
            base = replace(base, parameters=parse_parameters(base.command, merged))
    elif args.command:
        base = RunConfig(args.command, parse_parameters(args.command, _parameters(args)))
    else:
        raise ConfigError("a subcommand or --config is required")
    if args.command and args.config and args.command != base.command:
        raise ConfigError(f"--config runs {base.command!r}, not {args.command!r}")
    return RunConfig(
        command=base.command,
        parameters=base.parameters,
        format=args.format or base.format,
        out=args.out or base.out,
        tol=args.tol if args.tol is not None else base.tol,
        threads=args.threads or base.threads,
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI; exit code 0 iff every check passes."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = resolve_run_config(args)
    except ConfigError as err:
        _LOGGER.error("%s", err)
        _dump_failures([str(err)])
        return EXIT_ERROR

    try:
        report = run(config)
    except CuspBalanceError as err:
        _LOGGER.error("%s failed: %s", config.command, err)
        report = Report(config.command, ())
        report.errors.append(f"{type(err).__name__}: {err}")
        _emit(render(report, config.format), config.out, sys.stdout)
        if config.format == FORMAT_CSV:
            _dump_failures(report.failures)
        return EXIT_ERROR

    _emit(render(report, config.format), config.out, sys.stdout)
    if config.format == FORMAT_CSV and not report.passed:
        _dump_failures(report.failures)
    if not report.passed:
        _LOGGER.error("%s: %d check(s) failed", config.command, len(report.failures))
        return EXIT_CHECK_FAILED
    return EXIT_OK
