"""Poisson bivectors, Hamiltonian functions and their structure residuals.

A bivector is stored as its antisymmetric coefficient matrix P(x), so the
Hamiltonian dynamics read x' = P(x) grad H(x). Every shipped model fixes the
sign and scale of its P by matching the model's right-hand side exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from ecodyn import utils
from ecodyn.errors import DomainError, ValidationError

if TYPE_CHECKING:
    from ecodyn.models import Trajectory

DEFAULT_SEED = 7
DEFAULT_SAMPLES = 100
FD_STEP = 1e-6

logger = utils.get_colored_logger("POISSON")

Vector = np.ndarray
Matrix = np.ndarray


@dataclass(frozen=True, eq=False)
class Domain:
    """Open box of admissible states, optionally with excluded hyperplanes.

    `excluded[i]` is a value x_i must not take (nan when nothing is excluded);
    it models the |N - x| branch of the logistic Hamiltonian.
    """

    lower: Vector
    upper: Vector
    excluded: Optional[Vector] = None

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ValidationError("lower and upper bounds differ in length")
        if self.excluded is not None:
            object.__setattr__(self, "excluded", np.asarray(self.excluded, float))

    @classmethod
    def unbounded(cls, dim: int) -> Domain:
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @classmethod
    def positive(cls, dim: int) -> Domain:
        return cls(np.zeros(dim), np.full(dim, np.inf))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def violation(self, x: Vector) -> int | None:
        """Index of the first coordinate outside the domain, None if admissible."""

        x = np.asarray(x, dtype=float)
        bad = ~np.isfinite(x) | (x <= self.lower) | (x >= self.upper)
        if self.excluded is not None:
            bad |= x == self.excluded
        hits = np.flatnonzero(bad)
        return int(hits[0]) if hits.size else None

    def contains(self, x: Vector) -> bool:
        return self.violation(x) is None

    def check(self, x: Vector, time: float | None = None) -> None:
        x = np.asarray(x, dtype=float)
        if len(x) != self.dim:
            raise ValidationError(f"expected a state of length {self.dim}, got {len(x)}")

        if (i := self.violation(x)) is not None:
            raise DomainError(
                f"state component {x[i]!r} outside "
                f"({self.lower[i]!r}, {self.upper[i]!r})",
                coordinate=i,
                time=time,
            )


@dataclass(frozen=True)
class Sampler:
    """Seeded uniform points inside the box (lower, upper)."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    count: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED

    @property
    def dim(self) -> int:
        return len(self.lower)

    def points(self) -> Matrix:
        if self.count <= 0:
            raise ValidationError("sampler produces no points")
        logger.debug(f"Sampling {self.count} points with seed {self.seed}")
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.lower, self.upper, size=(self.count, self.dim))


@dataclass(frozen=True)
class Bivector:
    dim: int
    coeff: Callable[[Vector], Matrix]
    """x -> the dim x dim coefficient matrix P(x)."""

    partials: Callable[[Vector], np.ndarray]
    """x -> array D with D[l] = dP/dx_l at x, shape (dim, dim, dim)."""

    name: str = "pi"

    def coeff_partial(self, x: Vector, l: int) -> Matrix:
        return self.partials(x)[l]


@dataclass(frozen=True)
class HamiltonianFn:
    dim: int
    value: Callable[[Vector], float]
    grad: Callable[[Vector], Vector]
    domain: Domain
    name: str = "H"

    def admissible(self, x: Vector) -> bool:
        return self.domain.contains(x)


@dataclass(frozen=True, eq=False)
class Residual:
    max_abs: float
    argmax_point: Optional[Vector]
    samples: int
    vacuous: bool = False
    """Set when the identity holds trivially, e.g. Jacobi below three dimensions."""

    def below(self, threshold: float) -> bool:
        return self.max_abs <= threshold


def constant_bivector(matrix, name: str = "pi") -> Bivector:
    S = np.array(matrix, dtype=float)
    n = S.shape[0]
    zeros = np.zeros((n, n, n))
    return Bivector(n, lambda x: S.copy(), lambda x: zeros.copy(), name)


def separable_bivector(
    matrix,
    phi: Callable[[Vector], Vector],
    dphi: Callable[[Vector], Vector],
    name: str = "pi",
) -> Bivector:
    """P_ij(x) = S_ij phi_i(x_i) phi_j(x_j) for a constant skew matrix S.

    Each such bivector is Poisson: in the coordinates w_i with
    dw_i = dx_i / phi_i(x_i) it becomes the constant matrix S.
    """

    S = np.array(matrix, dtype=float)
    n = S.shape[0]

    def coeff(x: Vector) -> Matrix:
        p = phi(np.asarray(x, dtype=float))
        return S * np.outer(p, p)

    def partials(x: Vector) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p, dp = phi(x), dphi(x)
        out = np.zeros((n, n, n))
        for l in range(n):
            # only row l and column l depend on x_l
            out[l, l, :] += S[l, :] * dp[l] * p
            out[l, :, l] += S[:, l] * p * dp[l]
        return out

    return Bivector(n, coeff, partials, name)


def log_canonical_bivector(matrix, name: str = "pi") -> Bivector:
    """Quadratic bivector P_ij = S_ij x_i x_j."""

    return separable_bivector(matrix, lambda x: x, np.ones_like, name)


def pencil(first: Bivector, second: Bivector, lam: float) -> Bivector:
    """The bivector first + lam * second."""

    if first.dim != second.dim:
        raise ValidationError("pencil members differ in dimension")

    return Bivector(
        first.dim,
        lambda x: first.coeff(x) + lam * second.coeff(x),
        lambda x: first.partials(x) + lam * second.partials(x),
        f"{first.name}+{lam!r}*{second.name}",
    )


def skew_from_cross(omega) -> Matrix:
    """Skew matrix S with S v = omega x v."""

    w1, w2, w3 = np.asarray(omega, dtype=float)
    return np.array(
        [
            [0.0, -w3, w2],
            [w3, 0.0, -w1],
            [-w2, w1, 0.0],
        ]
    )


def hamiltonian_vector_field(pi: Bivector, H: HamiltonianFn, x) -> Vector:
    """X_H(x) = P(x) grad H(x)."""

    x = np.asarray(x, dtype=float)
    if not pi.dim == H.dim == len(x):
        raise ValidationError(
            f"dimension mismatch: bivector {pi.dim}, Hamiltonian {H.dim}, "
            f"state {len(x)}"
        )
    H.domain.check(x)
    return pi.coeff(x) @ H.grad(x)


def _max_over_points(points: Matrix, metric: Callable[[Vector], float]) -> Residual:
    if len(points) == 0:
        raise ValidationError("sampler produces no points")

    values = np.array([metric(x) for x in points])
    worst = int(np.argmax(values))
    return Residual(float(values[worst]), points[worst].copy(), len(points))


def skew_residual(pi: Bivector, sampler: Sampler) -> Residual:
    def metric(x: Vector) -> float:
        P = pi.coeff(x)
        return float(np.max(np.abs(P + P.T)))

    return _max_over_points(sampler.points(), metric)


def jacobiator(P: Matrix, D: np.ndarray) -> np.ndarray:
    """J_ijk = sum_l P_il d_l P_jk + P_jl d_l P_ki + P_kl d_l P_ij."""

    T = np.einsum("il,ljk->ijk", P, D)
    return T + np.einsum("jki->ijk", T) + np.einsum("kij->ijk", T)


def jacobi_residual(pi: Bivector, sampler: Sampler) -> Residual:
    points = sampler.points()
    if pi.dim < 3:
        return Residual(0.0, None, len(points), vacuous=True)

    triples = np.array(list(itertools.combinations(range(pi.dim), 3)))
    i, j, k = triples.T

    def metric(x: Vector) -> float:
        J = jacobiator(pi.coeff(x), pi.partials(x))
        return float(np.max(np.abs(J[i, j, k])))

    return _max_over_points(points, metric)


def conservation_residual(H: HamiltonianFn, traj: Trajectory) -> Residual:
    """max_t |H(x(t)) - H(x(0))| / max(1, |H(x(0))|)."""

    states = traj.states
    if len(states) == 0:
        raise ValidationError("empty trajectory")

    for index, x in enumerate(states):
        if (i := H.domain.violation(x)) is not None:
            raise DomainError(
                f"trajectory sample {index} is outside the domain of {H.name}",
                coordinate=i,
                time=float(traj.times[index]),
            )

    values = np.array([H.value(x) for x in states])
    drift = np.abs(values - values[0]) / max(1.0, abs(values[0]))
    worst = int(np.argmax(drift))
    return Residual(float(drift[worst]), states[worst].copy(), len(states))


def grad_fd_residual(
    H: HamiltonianFn, sampler: Sampler, step: float = FD_STEP
) -> Residual:
    """Relative gap between the analytic gradient and central differences."""

    def metric(x: Vector) -> float:
        fd = np.empty(H.dim)
        for l in range(H.dim):
            e = np.zeros(H.dim)
            e[l] = step
            fd[l] = (H.value(x + e) - H.value(x - e)) / (2 * step)
        g = H.grad(x)
        return float(np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(g))))

    return _max_over_points(sampler.points(), metric)


def partials_fd_residual(
    pi: Bivector, sampler: Sampler, step: float = FD_STEP
) -> Residual:
    """Relative gap between analytic dP/dx_l and central differences of P."""

    def metric(x: Vector) -> float:
        D = pi.partials(x)
        worst = 0.0
        for l in range(pi.dim):
            e = np.zeros(pi.dim)
            e[l] = step
            fd = (pi.coeff(x + e) - pi.coeff(x - e)) / (2 * step)
            gap = np.abs(D[l] - fd) / np.maximum(1.0, np.abs(D[l]))
            worst = max(worst, float(np.max(gap)))
        return worst

    return _max_over_points(sampler.points(), metric)


@dataclass(frozen=True)
class StructureReport:
    """Residuals of one (bivector, Hamiltonian, field) triple."""

    skew: Residual
    jacobi: Residual
    consistency: Optional[Residual] = None
    notes: list[str] = field(default_factory=list)


def consistency_residual(
    pi: Bivector,
    H: HamiltonianFn,
    rhs: Callable[[Vector], Vector],
    sampler: Sampler,
) -> Residual:
    """Relative gap between X_H and a reference right-hand side."""

    def metric(x: Vector) -> float:
        expected = rhs(x)
        actual = hamiltonian_vector_field(pi, H, x)
        scale = max(1.0, float(np.max(np.abs(expected))))
        return float(np.max(np.abs(actual - expected))) / scale

    return _max_over_points(sampler.points(), metric)


def structure_report(
    pi: Bivector,
    sampler: Sampler,
    H: HamiltonianFn | None = None,
    rhs: Callable[[Vector], Vector] | None = None,
) -> StructureReport:
    skew = skew_residual(pi, sampler)
    jacobi = jacobi_residual(pi, sampler)
    notes = ["Jacobi identity is vacuous below three dimensions"] if jacobi.vacuous else []

    consistency = None
    if H is not None and rhs is not None:
        consistency = consistency_residual(pi, H, rhs, sampler)
    return StructureReport(skew, jacobi, consistency, notes)
