"""The general Lotka-Volterra system and the three growth models built on it.

Model roles:
    Sato and logistic: x1 = L (labor), x2 = K (capital), x3 = f (production).
    Debt: x1 = K, x2 = D (debt), x3 = f, x4 = L.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import numpy as np

from ecodyn import utils
from ecodyn.errors import ValidationError
from ecodyn.poisson import DEFAULT_SAMPLES, DEFAULT_SEED, Domain, Sampler, Vector

logger = utils.get_colored_logger("MODELS")


class ModelKind(Enum):
    Sato = "sato"
    Logistic = "logistic"
    Debt = "debt"
    LV = "lv"

    def __str__(self) -> str:
        return self.value


def _vector(values, name: str, length: int | None = None) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != 1:
        raise ValidationError("expected a vector", field=name)
    if length is not None and len(array) != length:
        raise ValidationError(f"expected {length} values, got {len(array)}", field=name)
    if not np.all(np.isfinite(array)):
        raise ValidationError("entries must be finite", field=name)
    return array


@dataclass(frozen=True, eq=False)
class LVSystem:
    """x_i' = x_i (b_i + sum_j a_ij x_j)."""

    b: Vector
    A: np.ndarray

    def __post_init__(self):
        b = _vector(self.b, "b")
        A = np.array(self.A, dtype=float)
        if len(b) < 1:
            raise ValidationError("need at least one species", field="b")
        if A.shape != (len(b), len(b)):
            raise ValidationError(
                f"expected a {len(b)}x{len(b)} matrix, got shape {A.shape}", field="A"
            )
        if not np.all(np.isfinite(A)):
            raise ValidationError("entries must be finite", field="A")

        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)

    kind = ModelKind.LV

    @property
    def dim(self) -> int:
        return len(self.b)

    def as_lv(self) -> LVSystem:
        return self

    def flow_domain(self) -> Domain:
        return Domain.positive(self.dim)

    def domain(self) -> Domain:
        return self.flow_domain()

    def log_domain(self) -> Domain:
        return Domain.unbounded(self.dim)

    def scale(self) -> Vector:
        return np.ones(self.dim)

    def rhs_log(self, v: Vector) -> Vector:
        return self.b + self.A @ np.exp(v)

    def log_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        return (-2.0,) * self.dim, (2.0,) * self.dim


@dataclass(frozen=True)
class SatoModel:
    """Exponential growth of labor, capital and production: x_i' = b_i x_i."""

    b1: float
    b2: float
    b3: float

    kind = ModelKind.Sato
    dim = 3

    def __post_init__(self):
        _vector((self.b1, self.b2, self.b3), "b", 3)

    @classmethod
    def from_sato_notation(cls, a: float, b: float) -> SatoModel:
        """Sato writes the labor rate as b, the capital rate as a, production as 1."""

        return cls(b, a, 1.0)

    @property
    def b(self) -> Vector:
        return np.array([self.b1, self.b2, self.b3])

    def as_lv(self) -> LVSystem:
        return LVSystem(self.b, np.zeros((3, 3)))

    def flow_domain(self) -> Domain:
        return Domain.positive(3)

    def domain(self) -> Domain:
        return Domain.positive(3)

    def log_domain(self) -> Domain:
        return Domain.unbounded(3)

    def scale(self) -> Vector:
        return np.ones(3)

    def rhs_log(self, v: Vector) -> Vector:
        return self.b.copy()

    def log_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        # x in (e^-4, 10)
        return (-4.0,) * 3, (float(np.log(10.0)),) * 3


@dataclass(frozen=True)
class LogisticModel:
    """Logistic growth x_i' = b_i x_i (1 - x_i / N_i) with carrying capacities N_i."""

    b1: float
    b2: float
    b3: float
    N1: float
    N2: float
    N3: float
    absolute_branch: bool = False
    """Admit states above capacity, using |N_i - x_i| in the Hamiltonian."""

    kind = ModelKind.Logistic
    dim = 3

    def __post_init__(self):
        _vector(self.b, "b", 3)
        N = _vector(self.N, "N", 3)
        for i, value in enumerate(N):
            if value <= 0:
                raise ValidationError("carrying capacity must be positive", f"N{i + 1}")

    @property
    def b(self) -> Vector:
        return np.array([self.b1, self.b2, self.b3])

    @property
    def N(self) -> Vector:
        return np.array([self.N1, self.N2, self.N3])

    def as_lv(self) -> LVSystem:
        return LVSystem(self.b, np.diag(-self.b / self.N))

    def flow_domain(self) -> Domain:
        return Domain.positive(3)

    def domain(self) -> Domain:
        if self.absolute_branch:
            return Domain(np.zeros(3), np.full(3, np.inf), excluded=self.N)
        return Domain(np.zeros(3), self.N)

    def log_domain(self) -> Domain:
        if self.absolute_branch:
            return Domain(np.full(3, -np.inf), np.full(3, np.inf), excluded=np.zeros(3))
        return Domain(np.full(3, -np.inf), np.zeros(3))

    def scale(self) -> Vector:
        return 1.0 / self.N

    def rhs_log(self, v: Vector) -> Vector:
        return self.b * (1.0 - np.exp(v))

    def log_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        return (-3.0,) * 3, (-0.1,) * 3


@dataclass(frozen=True)
class DebtModel:
    """Predator-prey capital/debt pair plus logistic production and labor.

    x1' = x1 (b1 + a12 x2), x2' = x2 (b2 + a21 x1),
    x3' = b3 x3 (1 - x3 / N3), x4' = b4 x4 (1 - x4 / N4).
    """

    b1: float
    b2: float
    b3: float
    b4: float
    a12: float
    a21: float
    N3: float
    N4: float

    kind = ModelKind.Debt
    dim = 4

    def __post_init__(self):
        _vector((*self.b, self.a12, self.a21, self.N3, self.N4), "model", 8)
        if self.a12 * self.b1 >= 0:
            raise ValidationError("a12 * b1 must be negative", field="a12")
        if self.a21 * self.b2 >= 0:
            raise ValidationError("a21 * b2 must be negative", field="a21")
        for name in ("N3", "N4"):
            if getattr(self, name) <= 0:
                raise ValidationError("carrying capacity must be positive", name)

    @property
    def b(self) -> Vector:
        return np.array([self.b1, self.b2, self.b3, self.b4])

    def as_lv(self) -> LVSystem:
        A = np.zeros((4, 4))
        A[0, 1] = self.a12
        A[1, 0] = self.a21
        A[2, 2] = -self.b3 / self.N3
        A[3, 3] = -self.b4 / self.N4
        return LVSystem(self.b, A)

    def flow_domain(self) -> Domain:
        return Domain.positive(4)

    def domain(self) -> Domain:
        return Domain(np.zeros(4), [np.inf, np.inf, self.N3, self.N4])

    def log_domain(self) -> Domain:
        return Domain(np.full(4, -np.inf), [np.inf, np.inf, 0.0, 0.0])

    def scale(self) -> Vector:
        # the capital coordinate is scaled by the debt equation's ratio and
        # vice versa, which turns the pair into v1' = b1 (1 - e^v2),
        # v2' = b2 (1 - e^v1)
        return np.array(
            [-self.a21 / self.b2, -self.a12 / self.b1, 1.0 / self.N3, 1.0 / self.N4]
        )

    def rhs_log(self, v: Vector) -> Vector:
        e = np.exp(v)
        return np.array(
            [
                self.b1 * (1.0 - e[1]),
                self.b2 * (1.0 - e[0]),
                self.b3 * (1.0 - e[2]),
                self.b4 * (1.0 - e[3]),
            ]
        )

    def log_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        return (-2.0, -2.0, -3.0, -3.0), (2.0, 2.0, -0.1, -0.1)


class GrowthModel(Protocol):
    kind: ModelKind
    dim: int

    def as_lv(self) -> LVSystem:
        """The model as a special case of the general LV system"""

    def flow_domain(self) -> Domain:
        """States on which the dynamics are integrated"""

    def domain(self) -> Domain:
        """States on which the model's Hamiltonian is defined"""

    def log_domain(self) -> Domain:
        """The image of `domain` under the log coordinates"""

    def scale(self) -> Vector:
        """Per-coordinate factors s with v = ln(s * x)"""

    def rhs_log(self, v: Vector) -> Vector:
        """Dynamics in log coordinates"""


def lv_rhs(sys: LVSystem, x) -> Vector:
    x = np.asarray(x, dtype=float)
    if len(x) != sys.dim:
        raise ValidationError(f"expected a state of length {sys.dim}, got {len(x)}")
    return x * (sys.b + sys.A @ x)


def lv_jacobian(sys: LVSystem, x) -> np.ndarray:
    """J_ij = delta_ij (b_i + sum_k a_ik x_k) + x_i a_ij."""

    x = np.asarray(x, dtype=float)
    if len(x) != sys.dim:
        raise ValidationError(f"expected a state of length {sys.dim}, got {len(x)}")
    return np.diag(sys.b + sys.A @ x) + x[:, None] * sys.A


def to_log_coords(model: GrowthModel, x) -> Vector:
    """v = ln(s * x); Sato s = 1, logistic s = 1/N, debt per `DebtModel.scale`."""

    x = np.asarray(x, dtype=float)
    model.domain().check(x)
    return np.log(model.scale() * x)


def from_log_coords(model: GrowthModel, v) -> Vector:
    v = np.asarray(v, dtype=float)
    model.log_domain().check(v)
    return np.exp(v) / model.scale()


def rhs_log(model: GrowthModel, v) -> Vector:
    v = np.asarray(v, dtype=float)
    model.log_domain().check(v)
    return model.rhs_log(v)


def pushforward_rhs(model: GrowthModel, v) -> Vector:
    """lv_rhs carried to log coordinates by the Jacobian diag(1 / x)."""

    x = from_log_coords(model, v)
    jacobian = np.diag(1.0 / x)
    return jacobian @ lv_rhs(model.as_lv(), x)


def model_rhs(model: GrowthModel):
    lv = model.as_lv()
    return lambda x: lv_rhs(lv, x)


def log_sampler(
    model: GrowthModel, count: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED
) -> Sampler:
    lower, upper = model.log_box()
    return Sampler(lower, upper, count, seed)


def state_sampler(
    model: GrowthModel, count: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED
) -> Sampler:
    """The log box mapped back to the original coordinates (a box again)."""

    lower, upper = model.log_box()
    s = model.scale()
    lo = tuple(np.exp(lower) / s)
    hi = tuple(np.exp(upper) / s)
    return Sampler(lo, hi, count, seed)


def exact_solution(model: GrowthModel, x0, t) -> np.ndarray:
    """Closed-form flow of the Sato and logistic models, and of any LV with A = 0.

    Returns one state per entry of `t` (a single state for scalar `t`).
    """

    x0 = np.asarray(x0, dtype=float)
    t = np.asarray(t, dtype=float)
    growth = np.exp(np.multiply.outer(t, model.b))

    if isinstance(model, LogisticModel):
        N = model.N
        return N * x0 * growth / (N + x0 * (growth - 1.0))

    if isinstance(model, SatoModel) or (
        isinstance(model, LVSystem) and not np.any(model.A)
    ):
        return x0 * growth

    raise ValidationError(f"no closed-form solution for the {model.kind} model")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: Vector
    states: np.ndarray
    model: str = "custom"
    monitor_names: tuple[str, ...] = ()
    monitor_values: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if len(times) != len(states):
            raise ValidationError("times and states differ in length")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise ValidationError("states must be finite")

        monitors = np.asarray(self.monitor_values, dtype=float)
        if self.monitor_names:
            monitors = monitors.reshape(len(times), len(self.monitor_names))

        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "monitor_values", monitors)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def final(self) -> Vector:
        return self.states[-1]

    def monitor(self, name: str) -> Vector:
        return self.monitor_values[:, self.monitor_names.index(name)]

    @classmethod
    def constant(cls, x, times, model: str = "custom") -> Trajectory:
        times = np.asarray(times, dtype=float)
        return cls(times, np.tile(np.asarray(x, dtype=float), (len(times), 1)), model)
