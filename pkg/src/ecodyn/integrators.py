"""Explicit Runge-Kutta integration with conserved-quantity monitors."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from ecodyn import utils
from ecodyn.errors import DomainError, IntegrationError, ValidationError
from ecodyn.models import Trajectory
from ecodyn.poisson import Domain, HamiltonianFn, Vector

logger = utils.get_colored_logger("INTEGRATORS")

VectorField = Callable[[Vector], Vector]

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0

# Fehlberg 4(5) pair, advanced with the 5th order solution (local extrapolation)
RKF45_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
RKF45_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
RKF45_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])


class Method(Enum):
    RK4 = "rk4"
    RKF45 = "rkf45"
    Euler = "euler"
    """First order reference method, used to check the order estimator."""

    def __str__(self) -> str:
        return self.value

    @property
    def adaptive(self) -> bool:
        return self is Method.RKF45


@dataclass
class IntegratorConfig:
    method: Method = Method.RK4
    t_span: tuple[float, float] = (0.0, 1.0)

    h: float = 1e-3
    """Fixed step, and the initial step of the adaptive method."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    h_min: float = 1e-12
    h_max: float = 0.1

    record_every: int = 1
    """Keep every n-th (accepted) step; the final state is always kept."""

    def __post_init__(self):
        self.method = Method(self.method)
        t0, t1 = map(float, self.t_span)
        self.t_span = (t0, t1)

        if not (np.isfinite(t0) and np.isfinite(t1)):
            raise ValidationError(f"times must be finite, got {self.t_span!r}", field="t_span")
        for name in ("h", "rel_tol", "abs_tol", "h_min", "h_max"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"must be finite, got {getattr(self, name)!r}", field=name)
        if not t0 < t1:
            raise ValidationError("t0 must be smaller than t1", field="t_span")
        if not self.h > 0:
            raise ValidationError("step must be positive", field="h")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValidationError("tolerances must be positive", field="rel_tol")
        if not 0 < self.h_min <= self.h_max:
            raise ValidationError("need 0 < h_min <= h_max", field="h_min")
        if self.record_every < 1:
            raise ValidationError("must be a positive integer", field="record_every")


def euler_step(rhs: VectorField, x: Vector, h: float) -> Vector:
    return x + h * rhs(x)


def rk4_step(rhs: VectorField, x: Vector, h: float) -> Vector:
    k1 = rhs(x)
    k2 = rhs(x + h / 2 * k1)
    k3 = rhs(x + h / 2 * k2)
    k4 = rhs(x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rkf45_step(rhs: VectorField, x: Vector, h: float) -> tuple[Vector, Vector]:
    """One Fehlberg step: (5th order solution, estimate of the 4th order error)."""

    k = np.empty((6, len(x)))
    for stage, row in enumerate(RKF45_A):
        k[stage] = rhs(x + h * np.dot(row, k[: len(row)]))

    x4 = x + h * (RKF45_B4 @ k)
    x5 = x + h * (RKF45_B5 @ k)
    return x5, x5 - x4


FIXED_STEPS = {
    Method.RK4: rk4_step,
    Method.Euler: euler_step,
}


@dataclass
class _Recorder:
    monitors: Sequence[HamiltonianFn]
    domain: Optional[Domain]
    times: list[float] = field(default_factory=list)
    states: list[Vector] = field(default_factory=list)
    values: list[list[float]] = field(default_factory=list)

    def check(self, x: Vector, t: float) -> None:
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite state at t={t!r}")

        if self.domain is not None:
            self.domain.check(x, time=t)

        for H in self.monitors:
            if (i := H.domain.violation(x)) is not None:
                raise DomainError(
                    f"state left the domain of {H.name}", coordinate=i, time=t
                )

    def record(self, x: Vector, t: float) -> None:
        self.times.append(t)
        self.states.append(x.copy())
        self.values.append([H.value(x) for H in self.monitors])

    def trajectory(self, model: str) -> Trajectory:
        names = tuple(H.name for H in self.monitors)
        values = np.array(self.values, dtype=float).reshape(len(self.times), len(names))
        return Trajectory(np.array(self.times), np.array(self.states), model, names, values)


def integrate(
    rhs: VectorField,
    x0,
    cfg: IntegratorConfig,
    monitors: Sequence[HamiltonianFn] = (),
    domain: Domain | None = None,
    model: str = "custom",
) -> Trajectory:
    """Integrate x' = rhs(x) over cfg.t_span, recording monitor values.

    A step that leaves `domain` or the domain of any monitor is an error,
    reported with the time and the coordinate.
    """

    x = np.array(x0, dtype=float)
    recorder = _Recorder(monitors, domain)
    t0, t1 = cfg.t_span

    recorder.check(x, t0)
    recorder.record(x, t0)

    if cfg.method.adaptive:
        _integrate_adaptive(rhs, x, cfg, recorder)
    else:
        _integrate_fixed(rhs, x, cfg, recorder)

    logger.debug(
        f"Integrated {model} with {cfg.method} over [{t0}, {t1}]: "
        f"{len(recorder.times)} samples"
    )
    return recorder.trajectory(model)


def _integrate_fixed(
    rhs: VectorField, x: Vector, cfg: IntegratorConfig, recorder: _Recorder
) -> None:
    t0, t1 = cfg.t_span
    steps = max(1, round((t1 - t0) / cfg.h))
    # land exactly on t1
    h = (t1 - t0) / steps
    step = FIXED_STEPS[cfg.method]

    for n in range(1, steps + 1):
        x = step(rhs, x, h)
        t = t1 if n == steps else t0 + n * h
        recorder.check(x, t)
        if n % cfg.record_every == 0 or n == steps:
            recorder.record(x, t)


def _integrate_adaptive(
    rhs: VectorField, x: Vector, cfg: IntegratorConfig, recorder: _Recorder
) -> None:
    t0, t1 = cfg.t_span
    t = t0
    h = min(cfg.h, cfg.h_max)
    accepted = 0

    while t < t1:
        last = t + h >= t1
        if last:
            h = t1 - t

        x_new, error = rkf45_step(rhs, x, h)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
        norm = float(np.max(np.abs(error) / scale))

        if not np.isfinite(norm):
            norm = np.inf

        if norm <= 1.0:
            t = t1 if last else t + h
            x = x_new
            accepted += 1
            recorder.check(x, t)
            if accepted % cfg.record_every == 0 or t >= t1:
                recorder.record(x, t)
        else:
            logger.debug(f"Rejected step h={h!r} at t={t!r} (error norm {norm:.3g})")

        factor = MAX_FACTOR if norm == 0 else SAFETY * norm ** (-1 / 5)
        h = min(cfg.h_max, h * min(MAX_FACTOR, max(MIN_FACTOR, factor)))

        if h < cfg.h_min and t < t1:
            raise IntegrationError(f"step size {h!r} fell below h_min at t={t!r}")


@dataclass(frozen=True)
class ConvergenceEstimate:
    order: float
    steps: tuple[float, ...]
    errors: tuple[float, ...]
    reliable: bool
    """False when the errors sit at the rounding floor or do not decrease."""


ROUNDING_FLOOR = 1e-13


def convergence_order(
    rhs: VectorField,
    x0,
    exact: Callable[[float], Vector],
    method: Method = Method.RK4,
    t_span: tuple[float, float] = (0.0, 1.0),
    h: float = 0.05,
    levels: int = 4,
) -> ConvergenceEstimate:
    """Richardson-style order estimate from successive step halvings.

    The order is the mean of log2(e_k / e_{k+1}) over the last two halvings.
    """

    method = Method(method)
    if method.adaptive:
        raise ValidationError("order estimation needs a fixed-step method", "method")

    x0 = np.asarray(x0, dtype=float)
    reference = np.asarray(exact(t_span[1]), dtype=float)
    if reference.shape != x0.shape:
        raise ValidationError(
            f"oracle returns shape {reference.shape}, state has {x0.shape}", "exact"
        )

    steps, errors = [], []
    for level in range(levels):
        step = h / 2**level
        cfg = IntegratorConfig(method=method, t_span=t_span, h=step, record_every=10**9)
        final = integrate(rhs, x0, cfg).final
        scale = np.maximum(1.0, np.abs(reference))
        steps.append(step)
        errors.append(float(np.max(np.abs(final - reference) / scale)))

    e = np.array(errors)
    reliable = bool(np.all(e > ROUNDING_FLOOR) and np.all(np.diff(e) < 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.log2(e[:-1] / e[1:])
    order = float(np.mean(ratios[-2:])) if reliable else float("nan")

    if not reliable:
        logger.warning(f"Order estimate unreliable, errors {errors}")
    return ConvergenceEstimate(order, tuple(steps), tuple(errors), reliable)
