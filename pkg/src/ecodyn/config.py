"""TOML run configuration.

    seed = 7

    [model]
    kind = "sato"            # sato | logistic | debt | lv
    b = [1.0, 3.0, 2.0]      # growth rates, one per coordinate
    N = [10.0, 10.0, 10.0]   # logistic: N1..N3, debt: [N3, N4]
    a12 = -1.0               # debt interaction terms
    a21 = 1.0
    A = [[0.0]]              # lv interaction matrix
    absolute_branch = false  # logistic
    x0 = [1.0, 1.0, 1.0]

    [integrator]             # IntegratorConfig fields; t_span given as t0, t1
    method = "rk4"

    [derive]
    crs = true               # false: use the free parameter t below
    t = 1.0

    [verify]
    samples = 100

    [output]
    path = "trajectory.csv"
    record_every = 1
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ecodyn import utils
from ecodyn.errors import DataIOError, ValidationError
from ecodyn.integrators import IntegratorConfig, Method
from ecodyn.models import DebtModel, LogisticModel, LVSystem, SatoModel
from ecodyn.poisson import DEFAULT_SAMPLES, DEFAULT_SEED

logger = utils.get_colored_logger("CONFIG")

SKEW_TOL = 1e-12
JACOBI_TOL = 1e-10
CONSISTENCY_TOL = 1e-10

MODEL_KEYS = {
    "sato": {"kind", "b", "x0"},
    "logistic": {"kind", "b", "N", "absolute_branch", "x0"},
    "debt": {"kind", "b", "N", "a12", "a21", "x0"},
    "lv": {"kind", "b", "A", "x0"},
}
INTEGRATOR_KEYS = {"method", "t0", "t1", "h", "rel_tol", "abs_tol", "h_min", "h_max"}
SECTIONS = {"seed", "model", "integrator", "derive", "verify", "output"}


@dataclass
class DeriveConfig:
    crs: bool = True
    t: Optional[float] = None
    """Free parameter of the coefficient solve, used when `crs` is off."""

    def free_parameter(self) -> float | None:
        return None if self.crs else self.t


@dataclass
class VerifyConfig:
    samples: int = DEFAULT_SAMPLES
    skew_tol: float = SKEW_TOL
    jacobi_tol: float = JACOBI_TOL
    consistency_tol: float = CONSISTENCY_TOL


@dataclass
class OutputConfig:
    path: Optional[Path] = None
    """Trajectory CSV; stdout when unset."""

    record_every: int = 1


@dataclass
class RunConfig:
    model: Any
    x0: np.ndarray
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    derive: DeriveConfig = field(default_factory=DeriveConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = DEFAULT_SEED


def _section(raw: dict, name: str) -> dict:
    value = raw.get(name, {})
    if not isinstance(value, dict):
        raise ValidationError("must be a table", field=name)
    return value


def _reject_unknown(table: dict, allowed: set[str], path: str) -> None:
    for key in table:
        if key not in allowed:
            raise ValidationError("unknown key", field=f"{path}.{key}" if path else key)


def _number(table: dict, key: str, path: str, default=None) -> float:
    value = table.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"expected a number, got {value!r}", field=f"{path}.{key}")
    return float(value)


def _integer(table: dict, key: str, path: str, default: int) -> int:
    value = table.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"expected an integer, got {value!r}", field=f"{path}.{key}")
    return value


def _numbers(table: dict, key: str, path: str, length: int | None = None) -> list[float]:
    value = table.get(key)
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ValidationError(f"expected a list of numbers, got {value!r}", f"{path}.{key}")
    if length is not None and len(value) != length:
        raise ValidationError(f"expected {length} entries, got {len(value)}", f"{path}.{key}")
    return [float(v) for v in value]


def parse_model(table: dict):
    kind = table.get("kind")
    if kind not in MODEL_KEYS:
        raise ValidationError(
            f"expected one of {', '.join(MODEL_KEYS)}, got {kind!r}", field="model.kind"
        )
    _reject_unknown(table, MODEL_KEYS[kind], "model")

    try:
        if kind == "sato":
            return SatoModel(*_numbers(table, "b", "model", 3))

        if kind == "logistic":
            absolute = table.get("absolute_branch", False)
            if not isinstance(absolute, bool):
                raise ValidationError("expected a boolean", field="model.absolute_branch")
            return LogisticModel(
                *_numbers(table, "b", "model", 3),
                *_numbers(table, "N", "model", 3),
                absolute_branch=absolute,
            )

        if kind == "debt":
            b = _numbers(table, "b", "model", 4)
            for i in (2, 3):
                if b[i] == 0:
                    raise ValidationError("must be nonzero", field=f"model.b{i + 1}")
            return DebtModel(
                *b,
                a12=_number(table, "a12", "model"),
                a21=_number(table, "a21", "model"),
                N3=_numbers(table, "N", "model", 2)[0],
                N4=_numbers(table, "N", "model", 2)[1],
            )

        b = _numbers(table, "b", "model")
        A = table.get("A")
        if not isinstance(A, list) or not all(isinstance(row, list) for row in A):
            raise ValidationError("expected a matrix (list of rows)", field="model.A")
        return LVSystem(np.array(b), np.array(A, dtype=float))

    except ValidationError as e:
        if e.field is None or e.field.startswith("model"):
            raise
        # model invariants name the bare parameter
        raise ValidationError(e.reason, field=f"model.{e.field}") from e


def parse_integrator(table: dict, record_every: int) -> IntegratorConfig:
    _reject_unknown(table, INTEGRATOR_KEYS, "integrator")
    defaults = IntegratorConfig()

    method = table.get("method", str(defaults.method))
    try:
        method = Method(method)
    except ValueError as e:
        raise ValidationError(
            f"expected one of {', '.join(str(m) for m in Method)}", field="integrator.method"
        ) from e

    try:
        return IntegratorConfig(
            method=method,
            t_span=(
                _number(table, "t0", "integrator", defaults.t_span[0]),
                _number(table, "t1", "integrator", defaults.t_span[1]),
            ),
            h=_number(table, "h", "integrator", defaults.h),
            rel_tol=_number(table, "rel_tol", "integrator", defaults.rel_tol),
            abs_tol=_number(table, "abs_tol", "integrator", defaults.abs_tol),
            h_min=_number(table, "h_min", "integrator", defaults.h_min),
            h_max=_number(table, "h_max", "integrator", defaults.h_max),
            record_every=record_every,
        )
    except ValidationError as e:
        if e.field is None or e.field.startswith("integrator."):
            raise
        raise ValidationError(e.reason, field=f"integrator.{e.field}") from e


def parse_config(raw: dict, base: Path | None = None) -> RunConfig:
    """Validate a decoded TOML tree; relative output paths resolve against `base`."""

    _reject_unknown(raw, SECTIONS, "")
    seed = _integer(raw, "seed", "", DEFAULT_SEED) if "seed" in raw else DEFAULT_SEED
    if seed < 0:
        raise ValidationError(f"must be nonnegative, got {seed}", field="seed")

    model_table = _section(raw, "model")
    model = parse_model(model_table)
    x0 = np.array(_numbers(model_table, "x0", "model", model.dim))

    output = _section(raw, "output")
    _reject_unknown(output, {"path", "record_every"}, "output")
    record_every = _integer(output, "record_every", "output", 1)
    path = output.get("path")
    if path is not None:
        if not isinstance(path, str):
            raise ValidationError("expected a string", field="output.path")
        path = Path(path)
        if base is not None and not path.is_absolute():
            path = base / path

    derive = _section(raw, "derive")
    _reject_unknown(derive, {"crs", "t"}, "derive")
    crs = derive.get("crs", True)
    if not isinstance(crs, bool):
        raise ValidationError("expected a boolean", field="derive.crs")
    if not crs and "t" not in derive:
        raise ValidationError("required when crs is false", field="derive.t")
    t = _number(derive, "t", "derive") if "t" in derive else None

    verify = _section(raw, "verify")
    _reject_unknown(verify, {"samples", "skew_tol", "jacobi_tol", "consistency_tol"}, "verify")
    samples = _integer(verify, "samples", "verify", DEFAULT_SAMPLES)
    if samples < 1:
        raise ValidationError("must be positive", field="verify.samples")

    return RunConfig(
        model=model,
        x0=x0,
        integrator=parse_integrator(_section(raw, "integrator"), record_every),
        derive=DeriveConfig(crs, t),
        verify=VerifyConfig(
            samples,
            _number(verify, "skew_tol", "verify", SKEW_TOL),
            _number(verify, "jacobi_tol", "verify", JACOBI_TOL),
            _number(verify, "consistency_tol", "verify", CONSISTENCY_TOL),
        ),
        output=OutputConfig(path, record_every),
        seed=seed,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ValidationError(f"{path}: {e}", field="config") from e
    except UnicodeDecodeError as e:
        raise ValidationError(f"{path} is not UTF-8: {e.reason}", field="config") from e
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e.strerror or e}") from e

    cfg = parse_config(raw, path.parent)
    logger.info(f"Loaded {cfg.model.kind} configuration from {path}")
    return cfg
