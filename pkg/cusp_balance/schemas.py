"""Configuration schemas for cycle configs and run configs."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import voluptuous as vol

from .chow_balance import CoordLine, CycleConfig, Point, WeightedRNC
from .const import (
    CMD_BALANCE_FLOW,
    CMD_CHOW_VERIFY,
    CMD_ENERGY_SCAN,
    CMD_LADDER_TABLE,
    CMD_MODEL_MU,
    CMD_THETA_CHECK,
    BULK_RAW,
    BULK_RESCALED,
    CONF_AMBIENT_DIM,
    CONF_COMMAND,
    CONF_COMPONENTS,
    CONF_DIVISOR,
    CONF_FORMAT,
    CONF_INDEX,
    CONF_INDICES,
    CONF_KIND,
    CONF_LAMBDA,
    CONF_OUT,
    CONF_PARAMETERS,
    CONF_THREADS,
    CONF_TOL,
    CONF_WEIGHTS,
    CROSS_CLASS_EPSILON,
    CROSS_CLASS_QUADRATIC,
    FORMAT_CSV,
    FORMAT_JSON,
    KIND_LINE,
    KIND_POINT,
    KIND_RNC,
    MIN_LEVEL,
)
from .exceptions import ConfigError

_LOGGER = logging.getLogger(__name__)


def not_bool(value: Any) -> Any:
    """Reject booleans ahead of an int or float check."""
    if isinstance(value, bool):
        raise vol.Invalid(f"expected a number, got {value!r}")
    return value


NUMBER = vol.All(not_bool, vol.Any(int, float))
INTEGER = vol.All(not_bool, int)
INDEX = vol.All(INTEGER, vol.Range(min=0))
POSITIVE_INT = vol.All(INTEGER, vol.Range(min=1))
POSITIVE_FLOAT = vol.All(NUMBER, vol.Range(min=0, min_included=False))


def fraction_string(value: Any) -> Fraction:
    """Parse 'p/q' into a Fraction."""
    if not isinstance(value, str):
        raise vol.Invalid("expected a fraction string such as '7/11'")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as err:
        raise vol.Invalid(f"invalid fraction {value!r}") from err


LAMBDA = vol.All(vol.Any(NUMBER, fraction_string), vol.Range(min=0, max=1))

POINT_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_KIND): KIND_POINT,
        vol.Required(CONF_INDEX): INDEX,
    }
)

LINE_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_KIND): KIND_LINE,
        vol.Required(CONF_INDICES): vol.All([INDEX], vol.Length(min=2, max=2)),
    }
)

RNC_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_KIND): KIND_RNC,
        vol.Required(CONF_INDICES): vol.All([INDEX], vol.Length(min=2)),
        vol.Optional(CONF_WEIGHTS): [POSITIVE_FLOAT],
    }
)

CYCLE_CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_AMBIENT_DIM): INDEX,
        vol.Required(CONF_COMPONENTS): [vol.Any(POINT_SCHEMA, LINE_SCHEMA, RNC_SCHEMA)],
        vol.Optional(CONF_DIVISOR, default=list): [INDEX],
        vol.Required(CONF_LAMBDA): LAMBDA,
        vol.Optional(CONF_WEIGHTS): [POSITIVE_FLOAT],
    }
)

PARAMETER_SCHEMAS: dict[str, vol.Schema] = {
    CMD_MODEL_MU: vol.Schema(
        {
            vol.Required("k"): vol.All(NUMBER, vol.Range(min=MIN_LEVEL)),
            vol.Optional("a", default=list): [POSITIVE_INT],
            vol.Optional("sweep", default=False): bool,
            vol.Optional("ladder", default=False): bool,
        }
    ),
    CMD_THETA_CHECK: vol.Schema({vol.Optional("b", default=list): [POSITIVE_FLOAT]}),
    CMD_LADDER_TABLE: vol.Schema(
        {
            vol.Required("k"): vol.All(NUMBER, vol.Range(min=MIN_LEVEL)),
            vol.Optional("n_max"): POSITIVE_INT,
        }
    ),
    CMD_CHOW_VERIFY: vol.Schema(
        {
            vol.Required("d"): vol.All(INTEGER, vol.Range(min=3)),
            vol.Required("k"): POSITIVE_INT,
        }
    ),
    CMD_ENERGY_SCAN: vol.Schema(
        {
            vol.Required("g"): INDEX,
            vol.Required("l"): POSITIVE_INT,
            vol.Required("d"): POSITIVE_INT,
            vol.Required("k"): vol.All([POSITIVE_INT], vol.Length(min=1)),
            vol.Optional("cross_class", default=CROSS_CLASS_EPSILON): vol.In(
                [CROSS_CLASS_EPSILON, CROSS_CLASS_QUADRATIC]
            ),
            vol.Optional("bulk", default=BULK_RESCALED): vol.In([BULK_RESCALED, BULK_RAW]),
            vol.Optional("error_constant"): vol.All(NUMBER, vol.Range(min=0)),
            vol.Optional("epsilon_power"): POSITIVE_FLOAT,
            vol.Optional("plot"): str,
        }
    ),
    CMD_BALANCE_FLOW: vol.Schema(
        {
            vol.Required("config"): str,
            vol.Optional("max_iter"): POSITIVE_INT,
        }
    ),
}

RUN_CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_COMMAND): vol.In(list(PARAMETER_SCHEMAS)),
        vol.Optional(CONF_PARAMETERS, default=dict): dict,
        vol.Optional(CONF_FORMAT, default=FORMAT_JSON): vol.In([FORMAT_CSV, FORMAT_JSON]),
        vol.Optional(CONF_OUT): str,
        vol.Optional(CONF_TOL): POSITIVE_FLOAT,
        vol.Optional(CONF_THREADS, default=1): POSITIVE_INT,
    }
)


@dataclass(frozen=True)
class RunConfig:
    """A validated batch run."""

    command: str
    parameters: dict[str, Any] = field(default_factory=dict)
    format: str = FORMAT_JSON
    out: str | None = None
    tol: float | None = None
    threads: int = 1


def _validate(schema: vol.Schema, data: Any, what: str) -> Any:
    try:
        return schema(data)
    except vol.Invalid as err:
        raise ConfigError(f"invalid {what}: {err}") from err


def parse_run_config(data: Any) -> RunConfig:
    """Validate a run config mapping; unknown keys are rejected."""
    conf = _validate(RUN_CONFIG_SCHEMA, data, "run config")
    command = conf[CONF_COMMAND]
    parameters = _validate(
        PARAMETER_SCHEMAS[command], conf[CONF_PARAMETERS], f"{command} parameters"
    )
    return RunConfig(
        command=command,
        parameters=parameters,
        format=conf[CONF_FORMAT],
        out=conf.get(CONF_OUT),
        tol=conf.get(CONF_TOL),
        threads=conf[CONF_THREADS],
    )


def parse_parameters(command: str, data: Any) -> dict[str, Any]:
    """Validate the parameter map of one subcommand."""
    return _validate(PARAMETER_SCHEMAS[command], data, f"{command} parameters")


def _component_from_dict(data: dict[str, Any]) -> Point | CoordLine | WeightedRNC:
    kind = data[CONF_KIND]
    if kind == KIND_POINT:
        return Point(data[CONF_INDEX])
    if kind == KIND_LINE:
        i, j = data[CONF_INDICES]
        return CoordLine(i, j)
    indices = tuple(data[CONF_INDICES])
    weights = tuple(data.get(CONF_WEIGHTS, (1.0,) * len(indices)))
    return WeightedRNC(indices, weights)


def _component_to_dict(component: Point | CoordLine | WeightedRNC) -> dict[str, Any]:
    if isinstance(component, Point):
        return {CONF_KIND: KIND_POINT, CONF_INDEX: component.index}
    if isinstance(component, CoordLine):
        return {CONF_KIND: KIND_LINE, CONF_INDICES: [component.i, component.j]}
    return {
        CONF_KIND: KIND_RNC,
        CONF_INDICES: list(component.indices),
        CONF_WEIGHTS: list(component.weights),
    }


def cycle_config_from_dict(data: Any) -> CycleConfig:
    """Validate and build a CycleConfig.

    Raises:
        ConfigError: Schema violation or inconsistent indices
    """
    conf = _validate(CYCLE_CONFIG_SCHEMA, data, "cycle config")
    try:
        return CycleConfig(
            ambient_dim=conf[CONF_AMBIENT_DIM],
            components=tuple(_component_from_dict(c) for c in conf[CONF_COMPONENTS]),
            divisor=tuple(Point(i) for i in conf[CONF_DIVISOR]),
            lam=conf[CONF_LAMBDA],
            weights=tuple(conf.get(CONF_WEIGHTS, ())),
        )
    except ValueError as err:
        raise ConfigError(f"inconsistent cycle config: {err}") from err


def cycle_config_to_dict(config: CycleConfig) -> dict[str, Any]:
    """Serialize a CycleConfig; Fraction lambdas are written as 'p/q'."""
    lam: Any = config.lam
    if isinstance(lam, Fraction):
        lam = f"{lam.numerator}/{lam.denominator}"
    return {
        CONF_AMBIENT_DIM: config.ambient_dim,
        CONF_COMPONENTS: [_component_to_dict(c) for c in config.components],
        CONF_DIVISOR: [point.index for point in config.divisor],
        CONF_LAMBDA: lam,
        CONF_WEIGHTS: list(config.weights),
    }


def load_json(path: str | Path) -> Any:
    """Read a JSON file, mapping I/O and syntax errors to ConfigError."""
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err


def load_cycle_config(path: str | Path) -> CycleConfig:
    _LOGGER.debug("Loading cycle config from %s", path)
    return cycle_config_from_dict(load_json(path))


def load_run_config(path: str | Path) -> RunConfig:
    _LOGGER.debug("Loading run config from %s", path)
    return parse_run_config(load_json(path))
