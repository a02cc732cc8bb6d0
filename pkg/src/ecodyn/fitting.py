"""Least-squares estimation of production functions from (L, K, Y) data."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy import linalg, optimize
from scipy.special import expit, logit

from ecodyn import utils
from ecodyn.errors import DataIOError, FitError, ValidationError
from ecodyn.poisson import DEFAULT_SEED
from ecodyn.production import (
    CobbDouglasPF,
    Family,
    LogisticPF,
    ProductionFunction,
    SShapedPF,
    eval_cobb_douglas,
    eval_logistic_pf,
    eval_sshaped,
)

logger = utils.get_colored_logger("FITTING")

REQUIRED_COLUMNS = ("L", "K", "Y")
OPTIONAL_COLUMNS = ("t", "D")
MIN_ROWS = 3
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Dataset:
    L: np.ndarray
    K: np.ndarray
    Y: np.ndarray
    t: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None

    def __post_init__(self):
        length = None
        for name in REQUIRED_COLUMNS + OPTIONAL_COLUMNS:
            values = getattr(self, name)
            if values is None:
                continue

            values = np.asarray(values, dtype=float).reshape(-1)
            object.__setattr__(self, name, values)
            if length is None:
                length = len(values)
            elif len(values) != length:
                raise ValidationError(f"has {len(values)} rows, expected {length}", name)

            if name == "t":
                if not np.all(np.isfinite(values)):
                    raise ValidationError("must be finite", name)
            elif (bad := np.flatnonzero(~(values > 0) | ~np.isfinite(values))).size:
                raise ValidationError(
                    f"row {int(bad[0]) + 1} holds {values[bad[0]]!r}, must be positive",
                    name,
                )

    def __len__(self) -> int:
        return len(self.Y)

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> Dataset:
        columns = [str(c).strip() for c in df.columns]
        df = df.set_axis(columns, axis=1)

        for name in REQUIRED_COLUMNS:
            if name not in columns:
                raise ValidationError("missing column", field=name)

        present = [c for c in REQUIRED_COLUMNS + OPTIONAL_COLUMNS if c in columns]
        values = {}
        for name in present:
            numeric = pd.to_numeric(df[name], errors="coerce")
            if (bad := np.flatnonzero(numeric.isna().to_numpy())).size:
                row = int(bad[0])
                raise ValidationError(
                    f"row {row + 1} holds non-numeric value {df[name].iloc[row]!r}",
                    field=name,
                )
            values[name] = numeric.to_numpy(dtype=float)
        return cls(**values)

    @classmethod
    def from_csv(cls, path: str | Path) -> Dataset:
        try:
            df = pd.read_csv(path, skipinitialspace=True, encoding="utf-8")
        except FileNotFoundError as e:
            raise DataIOError(f"cannot read {path}: {e.strerror}") from e
        except pd.errors.EmptyDataError as e:
            raise ValidationError(f"{path} is empty", field="header") from e
        except pd.errors.ParserError as e:
            raise ValidationError(f"malformed CSV {path}: {e}", field="rows") from e
        except UnicodeDecodeError as e:
            raise ValidationError(f"{path} is not UTF-8: {e.reason}", field="rows") from e
        except OSError as e:
            raise DataIOError(f"cannot read {path}: {e}") from e
        return cls.from_frame(df)

    def to_frame(self) -> pd.DataFrame:
        columns = {name: getattr(self, name) for name in REQUIRED_COLUMNS}
        for name in OPTIONAL_COLUMNS:
            if getattr(self, name) is not None:
                columns[name] = getattr(self, name)
        return pd.DataFrame(columns)


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters; `rss` and `r_squared` are measured on Y itself."""

    family: Family
    pf: ProductionFunction
    rss: float
    r_squared: float
    crs: bool = False
    converged: bool = True
    iterations: int = 0
    message: str = ""
    params: dict[str, float] = field(default_factory=dict)


class FitSetting:
    def __init__(
        self,
        seed: int = DEFAULT_SEED,
        restarts: int = 2,
        max_iter: int = 20000,
        xatol: float = 1e-12,
        fatol: float = 1e-20,
        spread: float = 0.05,
        small_fraction: float = 0.25,
    ) -> None:
        if seed < 0:
            raise ValidationError(f"must be nonnegative, got {seed}", field="seed")
        self.seed = seed
        """Seed of the initial simplex perturbations."""

        self.restarts = restarts
        """Extra Nelder-Mead runs started from the previous optimum."""

        self.max_iter = max_iter
        self.xatol = xatol
        self.fatol = fatol

        self.spread = spread
        """Relative size of the initial simplex around the starting point."""

        self.small_fraction = small_fraction
        """Share of rows, smallest inputs first, used for the Cobb-Douglas start."""


def fitted_values(pf: ProductionFunction, data: Dataset) -> np.ndarray:
    if isinstance(pf, CobbDouglasPF):
        return np.asarray(eval_cobb_douglas(pf, data.L, data.K))
    if isinstance(pf, SShapedPF):
        return np.asarray(eval_sshaped(pf, data.L, data.K))
    if isinstance(pf, LogisticPF):
        return np.asarray(eval_logistic_pf(pf, data.L, data.K))
    raise ValidationError(f"cannot fit the {pf.family} family")


def _scores(pf: ProductionFunction, data: Dataset) -> tuple[float, float]:
    residuals = fitted_values(pf, data) - data.Y
    rss = float(residuals @ residuals)
    tss = float(np.sum((data.Y - data.Y.mean()) ** 2))
    if tss > 0:
        r_squared = 1.0 - rss / tss
    else:
        r_squared = 1.0 if rss == 0 else -np.inf
    return rss, r_squared


def _require_rows(data: Dataset, needed: int = MIN_ROWS) -> None:
    if len(data) < needed:
        raise FitError(f"need at least {needed} rows, got {len(data)}")


def _lstsq(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    coef, _, rank, sv = linalg.lstsq(X, y)
    if rank < X.shape[1] or sv[-1] <= RANK_TOL * sv[0]:
        raise FitError(
            "collinear regressors: the design has rank "
            f"{rank} < {X.shape[1]} (singular values {sv.tolist()})"
        )
    return coef


def fit_cobb_douglas(data: Dataset, crs: bool = False) -> FitResult:
    """Regress ln Y = ln A + alpha ln L + beta ln K.

    With `crs`, regress ln(Y/K) on ln(L/K) and set beta = 1 - alpha.
    """

    _require_rows(data)
    lnL, lnK, lnY = np.log(data.L), np.log(data.K), np.log(data.Y)
    ones = np.ones(len(data))

    if crs:
        intercept, alpha = _lstsq(np.column_stack([ones, lnL - lnK]), lnY - lnK)
        beta = 1.0 - alpha
    else:
        intercept, alpha, beta = _lstsq(np.column_stack([ones, lnL, lnK]), lnY)

    pf = CobbDouglasPF(float(np.exp(intercept)), float(alpha), float(beta), crs)
    rss, r_squared = _scores(pf, data)
    logger.info(f"Cobb-Douglas fit on {len(data)} rows: {pf}")
    return FitResult(
        Family.CobbDouglas,
        pf,
        rss,
        r_squared,
        crs=crs,
        params={"A": pf.A, "alpha": pf.alpha, "beta": pf.beta},
    )


def _simplex(x0: np.ndarray, rng: np.random.Generator, spread: float) -> np.ndarray:
    """x0 plus one seeded perturbation per axis."""

    n = len(x0)
    scale = spread * np.maximum(np.abs(x0), 1.0)
    jitter = rng.uniform(0.5, 1.5, size=n) * scale
    signs = rng.choice([-1.0, 1.0], size=n)
    return np.vstack([x0, x0 + np.diag(signs * jitter)])


def _nelder_mead(
    objective: Callable[[np.ndarray], float],
    starts: list[np.ndarray],
    setting: FitSetting,
) -> tuple[optimize.OptimizeResult, int]:
    rng = np.random.default_rng(setting.seed)
    best, total = None, 0

    for start in starts:
        x = np.asarray(start, dtype=float)
        for attempt in range(setting.restarts + 1):
            result = optimize.minimize(
                objective,
                x,
                method="Nelder-Mead",
                options={
                    "initial_simplex": _simplex(x, rng, setting.spread),
                    "maxiter": setting.max_iter,
                    "maxfev": 2 * setting.max_iter,
                    "xatol": setting.xatol,
                    "fatol": setting.fatol,
                },
            )
            total += int(result.nit)
            logger.debug(f"Nelder-Mead run {attempt}: rss={result.fun!r}, {result.message}")
            if best is None or result.fun < best.fun:
                best = result
            x = result.x

    return best, total


def _guarded(objective: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    def wrapped(theta: np.ndarray) -> float:
        try:
            value = objective(theta)
        except (ValidationError, ArithmeticError, ValueError):
            return np.inf
        return value if np.isfinite(value) else np.inf

    return wrapped


def _small_input_start(data: Dataset, capacities: np.ndarray, fraction: float):
    """(alpha, beta, ln C) from a Cobb-Douglas fit of the rows farthest from saturation."""

    N_f, N_L, N_K = capacities
    load = np.maximum(data.L / N_L, data.K / N_K)
    count = max(MIN_ROWS, int(np.ceil(fraction * len(data))))
    rows = np.argsort(load, kind="stable")[:count]
    subset = Dataset(data.L[rows], data.K[rows], data.Y[rows])

    try:
        cd = fit_cobb_douglas(subset).pf
    except FitError as e:
        logger.warning(f"Cobb-Douglas start unavailable ({e}); starting from 1/2, 1/2")
        return np.array([0.5, 0.5, 0.0])

    # near zero Y ~ N_f L^a K^b / (C N_L^a N_K^b)
    lnC = np.log(N_f) - np.log(cd.A) - cd.alpha * np.log(N_L) - cd.beta * np.log(N_K)
    return np.array([cd.alpha, cd.beta, lnC])


def _log_odds_start(data: Dataset, capacities: np.ndarray):
    """(alpha, beta, ln C) from the regression logit(Y / N_f) on the input log-odds."""

    N_f, N_L, N_K = capacities
    X = np.column_stack(
        [
            np.log(data.L / (N_L - data.L)),
            np.log(data.K / (N_K - data.K)),
            -np.ones(len(data)),
        ]
    )
    try:
        return _lstsq(X, logit(data.Y / N_f))
    except FitError:
        return None


def _check_capacities(data: Dataset, capacities) -> np.ndarray:
    capacities = np.asarray(capacities, dtype=float)
    if capacities.shape != (3,):
        raise ValidationError("expected (N_f, N_L, N_K)", field="capacities")

    for name, N, values in zip(("N_f", "N_L", "N_K"), capacities, (data.Y, data.L, data.K)):
        if not N > values.max():
            raise FitError(
                f"infeasible capacity {name}={N!r}: must exceed the largest "
                f"observation {values.max()!r}"
            )
    return capacities


def fit_logistic_pf(
    data: Dataset,
    capacities=None,
    free: bool = False,
    setting: FitSetting | None = None,
) -> FitResult:
    """Nelder-Mead least squares over (alpha, beta, ln C), capacities held fixed.

    With `free`, the capacities join the search as N = max observed + e^theta,
    starting from `capacities` or twice the largest observation.
    """

    setting = setting or FitSetting()
    _require_rows(data)
    observed_max = np.array([data.Y.max(), data.L.max(), data.K.max()])

    if capacities is None:
        if not free:
            raise ValidationError(
                "fixed capacities are required unless they are fitted", field="capacities"
            )
        capacities = 2.0 * observed_max
    capacities = _check_capacities(data, capacities)

    def build(theta: np.ndarray) -> LogisticPF:
        caps = observed_max + np.exp(theta[3:]) if free else capacities
        return LogisticPF(caps[0], caps[1], caps[2], theta[0], theta[1], float(np.exp(theta[2])))

    def rss(theta: np.ndarray) -> float:
        residuals = eval_logistic_pf(build(theta), data.L, data.K) - data.Y
        return float(residuals @ residuals)

    starts = [_small_input_start(data, capacities, setting.small_fraction)]
    if (linear := _log_odds_start(data, capacities)) is not None:
        starts.append(linear)
    if free:
        tail = np.log(capacities - observed_max)
        starts = [np.concatenate([s, tail]) for s in starts]

    result, iterations = _nelder_mead(_guarded(rss), starts, setting)
    if not np.isfinite(result.fun):
        raise FitError("no admissible parameters found")

    pf = build(result.x)
    if not result.success:
        logger.warning(f"Logistic fit did not converge: {result.message}")
    return _simplex_result(Family.Logistic, pf, data, result, iterations, {
        "alpha": pf.alpha,
        "beta": pf.beta,
        "C": pf.C,
        "N_f": pf.N_f,
        "N_L": pf.N_L,
        "N_K": pf.N_K,
    })


def fit_sshaped(data: Dataset, setting: FitSetting | None = None) -> FitResult:
    """Nelder-Mead least squares over (ln a, sqrt b, logit p)."""

    setting = setting or FitSetting()
    _require_rows(data)

    def build(theta: np.ndarray) -> SShapedPF:
        return SShapedPF(float(np.exp(theta[0])), float(theta[1] ** 2), float(expit(theta[2])))

    def rss(theta: np.ndarray) -> float:
        residuals = eval_sshaped(build(theta), data.L, data.K) - data.Y
        return float(residuals @ residuals)

    try:
        cd = fit_cobb_douglas(data, crs=True).pf
        start = np.array([np.log(cd.A), 0.1, logit(np.clip(cd.alpha, 0.01, 0.99))])
    except FitError as e:
        logger.warning(f"Cobb-Douglas start unavailable ({e})")
        start = np.array([0.0, 0.1, 0.0])

    result, iterations = _nelder_mead(_guarded(rss), [start], setting)
    if not np.isfinite(result.fun):
        raise FitError("no admissible parameters found")

    pf = build(result.x)
    if not result.success:
        logger.warning(f"S-shaped fit did not converge: {result.message}")
    return _simplex_result(
        Family.SShaped, pf, data, result, iterations, {"a": pf.a, "b": pf.b, "p": pf.p}
    )


def _simplex_result(
    family: Family,
    pf: ProductionFunction,
    data: Dataset,
    result: optimize.OptimizeResult,
    iterations: int,
    params: dict[str, float],
) -> FitResult:
    rss, r_squared = _scores(pf, data)
    return FitResult(
        family,
        pf,
        rss,
        r_squared,
        converged=bool(result.success),
        iterations=iterations,
        message=str(result.message),
        params={k: float(v) for k, v in params.items()},
    )

