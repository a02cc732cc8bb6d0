"""Production functions and their derivation from Hamiltonian level sets.

Each family is solved for the output coordinate x3 = f of its model; the
inputs come from the remaining coordinates (`evaluate_state`).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy.special import expit, logit

from ecodyn import utils
from ecodyn.errors import DerivationError, DomainError, ValidationError
from ecodyn.hamiltonians import (
    BiHamiltonianParams,
    CoeffSolution,
    build_debt_H,
    build_logistic_H,
    build_sato_H,
    sato_solve_c,
)
from ecodyn.models import (
    DebtModel,
    GrowthModel,
    LogisticModel,
    SatoModel,
    Trajectory,
    to_log_coords,
)
from ecodyn.poisson import Residual

logger = utils.get_colored_logger("PRODUCTION")

CRS_TOL = 1e-12
OUTPUT_INDEX = 2


class Family(Enum):
    CobbDouglas = "cobb-douglas"
    SShaped = "s-shaped"
    Logistic = "logistic"
    Debt = "debt"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CobbDouglasPF:
    """Y = A L^alpha K^beta."""

    A: float
    alpha: float
    beta: float
    crs: bool = False

    family = Family.CobbDouglas

    def __post_init__(self):
        if not self.A > 0:
            raise ValidationError("scale must be positive", field="A")
        if self.crs and abs(self.alpha + self.beta - 1.0) > CRS_TOL:
            raise ValidationError(
                f"alpha + beta = {self.alpha + self.beta!r} under constant returns",
                field="beta",
            )


COBB_DOUGLAS_1928 = CobbDouglasPF(A=1.01, alpha=0.75, beta=0.25, crs=True)
"""The original 1899-1922 US manufacturing estimate."""


@dataclass(frozen=True)
class SShapedPF:
    """Y = a L^p K^(1-p) / (1 + b L^p K^(1-p))."""

    a: float
    b: float
    p: float

    family = Family.SShaped

    def __post_init__(self):
        if not self.a > 0:
            raise ValidationError("must be positive", field="a")
        if not self.b >= 0:
            raise ValidationError("must be nonnegative", field="b")
        if not 0 <= self.p <= 1:
            raise ValidationError("must lie in [0, 1]", field="p")


@dataclass(frozen=True)
class LogisticPF:
    """Y = N_f L^a K^b / (C |N_L - L|^a |N_K - K|^b + L^a K^b)."""

    N_f: float
    N_L: float
    N_K: float
    alpha: float
    beta: float
    C: float
    absolute_branch: bool = False

    family = Family.Logistic

    def __post_init__(self):
        for name in ("N_f", "N_L", "N_K", "C"):
            if not getattr(self, name) > 0:
                raise ValidationError("must be positive", field=name)


@dataclass(frozen=True)
class DebtPF:
    """Y = N_f sigmoid(b3 G(L, K, D)).

    G = C + b2 [ln(s_K K) - s_K K] - b1 [ln(s_D D) - s_D D] + ln(L / (N_L - L)) / b4
    with s_K = -a21 / b2 and s_D = -a12 / b1.
    """

    N_f: float
    N_L: float
    b1: float
    b2: float
    b3: float
    b4: float
    a12: float
    a21: float
    C: float

    family = Family.Debt

    def __post_init__(self):
        for name in ("N_f", "N_L"):
            if not getattr(self, name) > 0:
                raise ValidationError("must be positive", field=name)
        for name in ("b3", "b4"):
            if getattr(self, name) == 0:
                raise ValidationError("must be nonzero", field=name)
        if self.a12 * self.b1 >= 0:
            raise ValidationError("a12 * b1 must be negative", field="a12")
        if self.a21 * self.b2 >= 0:
            raise ValidationError("a21 * b2 must be negative", field="a21")

    @property
    def capital_scale(self) -> float:
        return -self.a21 / self.b2

    @property
    def debt_scale(self) -> float:
        return -self.a12 / self.b1


ProductionFunction = Union[CobbDouglasPF, SShapedPF, LogisticPF, DebtPF]


def _positive(name: str, values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if np.any(~(values > 0)):
        raise DomainError(f"{name} must be positive")
    return values


def _below(name: str, values, capacity: float) -> np.ndarray:
    values = _positive(name, values)
    if np.any(values >= capacity):
        raise DomainError(f"{name} must stay below its capacity {capacity!r}")
    return values


def eval_cobb_douglas(pf: CobbDouglasPF, L, K):
    L, K = _positive("L", L), _positive("K", K)
    return pf.A * L**pf.alpha * K**pf.beta


def eval_sshaped(pf: SShapedPF, L, K):
    L, K = _positive("L", L), _positive("K", K)
    core = L**pf.p * K ** (1.0 - pf.p)
    return pf.a * core / (1.0 + pf.b * core)


def eval_logistic_pf(pf: LogisticPF, L, K):
    if pf.absolute_branch:
        L, K = _positive("L", L), _positive("K", K)
        if np.any(L == pf.N_L) or np.any(K == pf.N_K):
            raise DomainError("inputs must differ from their capacities")
    else:
        L, K = _below("L", L, pf.N_L), _below("K", K, pf.N_K)

    # Y / (N_f - Y) = (L / |N_L - L|)^alpha (K / |N_K - K|)^beta / C
    log_odds = (
        pf.alpha * np.log(L / np.abs(pf.N_L - L))
        + pf.beta * np.log(K / np.abs(pf.N_K - K))
        - np.log(pf.C)
    )
    return pf.N_f * expit(log_odds)


def debt_g(pf: DebtPF, L, K, D, interaction: bool = True):
    """The level-set function G; `interaction=False` drops the capital/debt terms."""

    L = _below("L", L, pf.N_L)
    K, D = _positive("K", K), _positive("D", D)

    G = pf.C + np.log(L / (pf.N_L - L)) / pf.b4
    if interaction:
        sK, sD = pf.capital_scale * K, pf.debt_scale * D
        G = G + pf.b2 * (np.log(sK) - sK) - pf.b1 * (np.log(sD) - sD)
    return G


def eval_debt_pf(pf: DebtPF, L, K, D, interaction: bool = True):
    return pf.N_f * expit(pf.b3 * debt_g(pf, L, K, D, interaction))


def debt_labor_reduction(pf: DebtPF) -> LogisticPF:
    """The logistic function of L alone that the debt function becomes without
    the capital/debt interaction; beta = 0, so any K in (0, 1) may be passed.
    """

    return LogisticPF(
        N_f=pf.N_f,
        N_L=pf.N_L,
        N_K=1.0,
        alpha=pf.b3 / pf.b4,
        beta=0.0,
        C=float(np.exp(-pf.b3 * pf.C)),
    )


@functools.singledispatch
def evaluate_state(pf, x) -> float:
    """Evaluate a production function on the inputs held in a model state."""

    raise ValidationError(f"unsupported production function {type(pf).__name__}")


@evaluate_state.register
def _(pf: CobbDouglasPF, x) -> float:
    return float(eval_cobb_douglas(pf, x[0], x[1]))


@evaluate_state.register
def _(pf: SShapedPF, x) -> float:
    return float(eval_sshaped(pf, x[0], x[1]))


@evaluate_state.register
def _(pf: LogisticPF, x) -> float:
    return float(eval_logistic_pf(pf, x[0], x[1]))


@evaluate_state.register
def _(pf: DebtPF, x) -> float:
    # debt roles: x1 = K, x2 = D, x3 = f, x4 = L
    return float(eval_debt_pf(pf, x[3], x[0], x[1]))


def cobb_douglas_from_integral(coefficients, x0, crs: bool = False) -> CobbDouglasPF:
    """Solve sum_k c_k ln x_k = H(x0) for x3."""

    k1, k2, k3 = np.asarray(coefficients, dtype=float)
    if k3 == 0:
        raise DerivationError("the x3 coefficient vanishes; cannot solve for production")

    x0 = _positive("x0", x0)
    H = float(np.dot([k1, k2, k3], np.log(x0)))
    return CobbDouglasPF(float(np.exp(H / k3)), -k1 / k3, -k2 / k3, crs)


def solve_constant_from_state(
    model: GrowthModel, x0, c: CoeffSolution | None = None
) -> float:
    """The constant (A for Sato, C otherwise) placing x0 on the production surface.

    Sato: A = exp(H / c3); logistic: C = exp(-H3 / c3); debt: C = H4(x0).
    """

    x0 = np.asarray(x0, dtype=float)
    model.domain().check(x0)

    if isinstance(model, SatoModel):
        c = c or sato_solve_c(model.b)
        return float(np.exp(build_sato_H(c).value(x0) / c.c3))

    if isinstance(model, LogisticModel):
        if model.absolute_branch:
            raise DerivationError("level sets are solved on the below-capacity branch only")
        c = c or sato_solve_c(model.b)
        return float(np.exp(-build_logistic_H(model, c).value(x0) / c.c3))

    if isinstance(model, DebtModel):
        return build_debt_H(model).value(to_log_coords(model, x0))

    raise ValidationError(f"no production function is derived for the {model.kind} model")


def derive_production_function(
    model: GrowthModel, x0, c: CoeffSolution | None = None
) -> ProductionFunction:
    """The production function through x0 for a model's conserved quantity."""

    constant = solve_constant_from_state(model, x0, c)

    if isinstance(model, SatoModel):
        c = c or sato_solve_c(model.b)
        return CobbDouglasPF(constant, c.alpha, c.beta, c.crs_normalized)

    if isinstance(model, LogisticModel):
        c = c or sato_solve_c(model.b)
        N = model.N
        return LogisticPF(N[2], N[0], N[1], c.alpha, c.beta, constant)

    return DebtPF(
        N_f=model.N3,
        N_L=model.N4,
        b1=model.b1,
        b2=model.b2,
        b3=model.b3,
        b4=model.b4,
        a12=model.a12,
        a21=model.a21,
        C=constant,
    )


def derive_bihamiltonian_cobb_douglas(params: BiHamiltonianParams, x0) -> CobbDouglasPF:
    """Cobb-Douglas function on the level set of H3 = H1 - H2 through x0."""

    pf = cobb_douglas_from_integral(params.h3, x0)
    return CobbDouglasPF(pf.A, pf.alpha, pf.beta, crs=True)


def surface_residual(pf: ProductionFunction, traj: Trajectory) -> Residual:
    """max_t |pf(inputs(t)) - f(t)| / max(1, |f(t)|)."""

    gaps = np.empty(len(traj.states))
    for index, x in enumerate(traj.states):
        try:
            predicted = evaluate_state(pf, x)
        except DomainError as e:
            raise DomainError(
                f"trajectory sample {index} is not an admissible input: {e}",
                time=float(traj.times[index]),
            ) from e
        output = x[OUTPUT_INDEX]
        gaps[index] = abs(predicted - output) / max(1.0, abs(output))

    worst = int(np.argmax(gaps))
    return Residual(float(gaps[worst]), traj.states[worst].copy(), len(gaps))


def elasticity_check(
    pf: CobbDouglasPF, L: float = 2.0, K: float = 3.0, step: float = 1e-5
) -> tuple[float, float]:
    """Central-difference estimates of d ln Y / d ln L and d ln Y / d ln K."""

    _positive("L", L)
    _positive("K", K)
    up, down = np.exp(step), np.exp(-step)

    def log_y(l: float, k: float) -> float:
        return float(np.log(eval_cobb_douglas(pf, l, k)))

    alpha_hat = (log_y(L * up, K) - log_y(L * down, K)) / (2 * step)
    beta_hat = (log_y(L, K * up) - log_y(L, K * down)) / (2 * step)
    return alpha_hat, beta_hat


def debt_output_logit(pf: DebtPF, f: float) -> float:
    """b3 G at which the debt function returns f."""

    return float(logit(f / pf.N_f))
