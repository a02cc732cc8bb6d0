"""Hamiltonians, Poisson structures and coefficient solves for the growth models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ecodyn import utils
from ecodyn.errors import DerivationError, ValidationError
from ecodyn.models import (
    DebtModel,
    GrowthModel,
    LogisticModel,
    SatoModel,
    log_sampler,
    lv_jacobian,
    lv_rhs,
    pushforward_rhs,
    state_sampler,
)
from ecodyn.poisson import (
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    Bivector,
    Domain,
    HamiltonianFn,
    Residual,
    Sampler,
    Vector,
    constant_bivector,
    log_canonical_bivector,
    pencil,
    separable_bivector,
    skew_from_cross,
)

logger = utils.get_colored_logger("HAMILTONIANS")

SATO_MATRIX = np.array(
    [
        [0.0, -1.0, -1.0],
        [1.0, 0.0, -1.0],
        [1.0, 1.0, 0.0],
    ]
)
"""Skew matrix A of the coefficient system A c = b (rank 2)."""

COMPATIBILITY_TOL = 1e-10
SINGULARITY_TOL = 1e-12
PENCIL_LAMBDAS = (-1.0, 0.0, 1.0, 2.0)


@dataclass(frozen=True)
class CoeffSolution:
    """A solution c of A c = b, parametrized by t = c3."""

    c1: float
    c2: float
    c3: float
    t: float
    crs_normalized: bool
    b: tuple[float, float, float]

    @property
    def c(self) -> Vector:
        return np.array([self.c1, self.c2, self.c3])

    @property
    def alpha(self) -> float:
        return -self.c1 / self.c3

    @property
    def beta(self) -> float:
        return -self.c2 / self.c3

    def defect(self) -> float:
        """|A c - b|."""

        return float(np.max(np.abs(SATO_MATRIX @ self.c - np.array(self.b))))


@dataclass(frozen=True)
class BiHamiltonianParams:
    """Exponents a, b of H1 = b ln x1 + ln x2 + a ln x3 and H2 = ln x1 + a ln x2 + b ln x3.

    alpha and beta are the labor and capital exponents obtained by solving
    H3 = H1 - H2 = const for x3.
    """

    a: float
    b: float
    alpha: float
    beta: float
    growth: tuple[float, float, float]

    @property
    def h1(self) -> Vector:
        return np.array([self.b, 1.0, self.a])

    @property
    def h2(self) -> Vector:
        return np.array([1.0, self.a, self.b])

    @property
    def h3(self) -> Vector:
        return self.h1 - self.h2


def _growth3(b) -> Vector:
    b = np.array(b, dtype=float)
    if b.shape != (3,) or not np.all(np.isfinite(b)):
        raise ValidationError("expected three finite growth rates", field="b")
    return b


def compatibility_defect(b) -> float:
    b1, b2, b3 = _growth3(b)
    return float(b1 + b3 - b2)


def sato_solve_c(b, t: float | None = None) -> CoeffSolution:
    """Solve A c = b; t = c3 is free, and t = None picks the CRS choice t = -b3.

    The general solution is c = (b2 + t, b3 - b2 - t, t).
    """

    b = _growth3(b)
    b1, b2, b3 = b
    defect = compatibility_defect(b)
    if abs(defect) > COMPATIBILITY_TOL * max(1.0, abs(b2)):
        raise DerivationError(
            f"A c = b has no solution: b1 + b3 = b2 fails with defect {defect!r}",
            defect=defect,
        )

    crs = t is None
    if crs:
        t = -b3
    if t == 0:
        raise DerivationError("c3 = 0 cannot be solved for production (choose t != 0)")

    solution = CoeffSolution(b2 + t, b3 - b2 - t, t, t, crs, (b1, b2, b3))
    logger.debug(f"Solved A c = b for b={b.tolist()}: c={solution.c.tolist()}")
    return solution


def require_solution(c: CoeffSolution, b) -> None:
    """Raise unless c solves A c = b for the given growth rates."""

    b = _growth3(b)
    scale = max(1.0, float(np.max(np.abs(b))))
    defect = float(np.max(np.abs(SATO_MATRIX @ c.c - b)))
    if defect > COMPATIBILITY_TOL * scale:
        raise DerivationError(
            f"coefficients {c.c.tolist()} do not solve A c = b for b={b.tolist()}",
            defect=defect,
        )


def bihamiltonian_ab(b) -> BiHamiltonianParams:
    """Solve b*b1 + b2 + a*b3 = 0 and b1 + a*b2 + b*b3 = 0 for (a, b)."""

    growth = _growth3(b)
    b1, b2, b3 = growth
    det = b1 * b2 - b3**2
    scale = max(1.0, float(np.max(np.abs(growth)))) ** 2
    if abs(det) <= SINGULARITY_TOL * scale:
        raise DerivationError(
            f"b1*b2 - b3^2 = {det!r} vanishes; the bi-Hamiltonian exponents are singular",
            defect=det,
        )

    a = (b2 * b3 - b1**2) / det
    bb = (b1 * b3 - b2**2) / det
    if abs(a - bb) <= SINGULARITY_TOL * max(1.0, abs(a), abs(bb)):
        raise DerivationError(f"a = b = {a!r}: elasticities are undefined")

    params = BiHamiltonianParams(
        a=a,
        b=bb,
        alpha=(1.0 - bb) / (a - bb),
        beta=(a - 1.0) / (a - bb),
        growth=(b1, b2, b3),
    )

    # both Hamiltonians are conserved along the exponential flow
    for h in (params.h1, params.h2):
        residual = abs(float(h @ growth))
        if residual > 1e-9 * max(1.0, float(np.max(np.abs(h)))) * np.sqrt(scale):
            raise DerivationError(f"conditions on (a, b) fail by {residual!r}")

    return params


def log_linear_hamiltonian(coefficients, name: str = "H") -> HamiltonianFn:
    """H = sum_k c_k ln x_k on the positive orthant."""

    c = np.array(coefficients, dtype=float)
    return HamiltonianFn(
        len(c),
        lambda x: float(c @ np.log(x)),
        lambda x: c / np.asarray(x, dtype=float),
        Domain.positive(len(c)),
        name,
    )


def linear_hamiltonian(coefficients, name: str = "H~") -> HamiltonianFn:
    """H = sum_k c_k v_k on all of R^n."""

    c = np.array(coefficients, dtype=float)
    return HamiltonianFn(
        len(c),
        lambda v: float(c @ np.asarray(v, dtype=float)),
        lambda v: c.copy(),
        Domain.unbounded(len(c)),
        name,
    )


def build_sato_H(c: CoeffSolution) -> HamiltonianFn:
    return log_linear_hamiltonian(c.c, "H")


def build_sato_log_H(c: CoeffSolution) -> HamiltonianFn:
    """The Sato Hamiltonian in v = ln x, conserved by v' = b."""

    return linear_hamiltonian(c.c, "H~")


def build_bihamiltonian_pair(
    params: BiHamiltonianParams,
) -> tuple[HamiltonianFn, HamiltonianFn, HamiltonianFn]:
    return (
        log_linear_hamiltonian(params.h1, "H1"),
        log_linear_hamiltonian(params.h2, "H2"),
        log_linear_hamiltonian(params.h3, "H3"),
    )


def build_logistic_H(model: LogisticModel, c: CoeffSolution) -> HamiltonianFn:
    """H3 = sum_k c_k ln(x_k / |N_k - x_k|)."""

    require_solution(c, model.b)
    coefficients, N = c.c, model.N

    def value(x: Vector) -> float:
        x = np.asarray(x, dtype=float)
        return float(coefficients @ np.log(x / np.abs(N - x)))

    def grad(x: Vector) -> Vector:
        x = np.asarray(x, dtype=float)
        return coefficients * N / (x * (N - x))

    return HamiltonianFn(3, value, grad, model.domain(), "H3")


def build_logistic_log_H(model: LogisticModel, c: CoeffSolution) -> HamiltonianFn:
    """H~3 = sum_k c_k (v_k - ln(1 - e^v_k)) in v = ln(x / N)."""

    require_solution(c, model.b)
    coefficients = c.c

    def value(v: Vector) -> float:
        v = np.asarray(v, dtype=float)
        return float(coefficients @ (v - np.log(np.abs(1.0 - np.exp(v)))))

    def grad(v: Vector) -> Vector:
        return coefficients / (1.0 - np.exp(np.asarray(v, dtype=float)))

    return HamiltonianFn(3, value, grad, model.log_domain(), "H~3")


def build_debt_H(model: DebtModel) -> HamiltonianFn:
    """H4 in the debt model's log coordinates.

    H4 = b1 (v2 - e^v2) - b2 (v1 - e^v1)
         + (v3 - ln(1 - e^v3)) / b3 - (v4 - ln(1 - e^v4)) / b4
    """

    for name in ("b3", "b4"):
        if getattr(model, name) == 0:
            raise ValidationError("must be nonzero for the debt Hamiltonian", name)

    b1, b2, b3, b4 = model.b

    def value(v: Vector) -> float:
        v1, v2, v3, v4 = np.asarray(v, dtype=float)
        return float(
            b1 * (v2 - np.exp(v2))
            - b2 * (v1 - np.exp(v1))
            + (v3 - np.log(1.0 - np.exp(v3))) / b3
            - (v4 - np.log(1.0 - np.exp(v4))) / b4
        )

    def grad(v: Vector) -> Vector:
        e = np.exp(np.asarray(v, dtype=float))
        return np.array(
            [
                -b2 * (1.0 - e[0]),
                b1 * (1.0 - e[1]),
                1.0 / (b3 * (1.0 - e[2])),
                -1.0 / (b4 * (1.0 - e[3])),
            ]
        )

    return HamiltonianFn(4, value, grad, model.log_domain(), "H4")


def pullback_to_state(model: GrowthModel, H: HamiltonianFn) -> HamiltonianFn:
    """Compose a log-coordinate Hamiltonian with v = ln(s * x)."""

    s = model.scale()

    def value(x: Vector) -> float:
        return H.value(np.log(s * np.asarray(x, dtype=float)))

    def grad(x: Vector) -> Vector:
        x = np.asarray(x, dtype=float)
        return H.grad(np.log(s * x)) / x

    return HamiltonianFn(H.dim, value, grad, model.domain(), H.name)


def sato_bivector() -> Bivector:
    """P_ij = A_ij x_i x_j, so that P(x) grad H = x * (A c) = b * x."""

    return log_canonical_bivector(SATO_MATRIX, "pi")


def sato_log_bivector() -> Bivector:
    """The constant (degenerate) bivector behind v' = b."""

    return constant_bivector(SATO_MATRIX, "pi~")


def quadratic_bivector_for(h, growth, name: str) -> Bivector:
    """Log-canonical P with P(x) grad(sum h_k ln x_k) = growth * x.

    Uses S v = omega x v with omega = (h x growth) / |h|^2, which needs h . growth = 0.
    """

    h = np.asarray(h, dtype=float)
    omega = np.cross(h, growth) / (h @ h)
    return log_canonical_bivector(skew_from_cross(omega), name)


def bihamiltonian_bivectors(params: BiHamiltonianParams) -> tuple[Bivector, Bivector]:
    growth = np.array(params.growth)
    return (
        quadratic_bivector_for(params.h1, growth, "pi1"),
        quadratic_bivector_for(params.h2, growth, "pi2"),
    )


def logistic_bivector() -> Bivector:
    """P_ij = A_ij (1 - e^v_i)(1 - e^v_j) in v = ln(x / N)."""

    return separable_bivector(
        SATO_MATRIX,
        lambda v: 1.0 - np.exp(v),
        lambda v: -np.exp(v),
        "pi3",
    )


def debt_bivector(model: DebtModel) -> Bivector:
    """pi^12 = 1 and pi^34 = -b3 b4 (1 - e^v3)(1 - e^v4); all else vanishes."""

    S = np.zeros((4, 4))
    S[0, 1], S[1, 0] = 1.0, -1.0
    S[2, 3] = -model.b3 * model.b4
    S[3, 2] = model.b3 * model.b4

    def phi(v: Vector) -> Vector:
        e = np.exp(v)
        return np.array([1.0, 1.0, 1.0 - e[2], 1.0 - e[3]])

    def dphi(v: Vector) -> Vector:
        e = np.exp(v)
        return np.array([0.0, 0.0, -e[2], -e[3]])

    return separable_bivector(S, phi, dphi, "pi4")


def sato_divergence(model: SatoModel, x=None) -> float:
    """Trace of the analytic Jacobian of the Sato field (b1 + b2 + b3 everywhere).

    The LV field stands in for X_H = pi grad H; the two agree wherever the
    consistency residual of `model_structures` vanishes.
    """

    x = np.ones(3) if x is None else np.asarray(x, dtype=float)
    return float(np.trace(lv_jacobian(model.as_lv(), x)))


def sato_curl_residual(model: SatoModel, sampler: Sampler) -> Residual:
    """max |J - J^T| of the field's Jacobian; zero for an irrotational field.

    J comes from the LV field, equal to X_H = pi grad H under the consistency check.
    """

    lv = model.as_lv()
    points = sampler.points()
    values = [np.max(np.abs(J - J.T)) for J in (lv_jacobian(lv, x) for x in points)]
    worst = int(np.argmax(values))
    return Residual(float(values[worst]), points[worst].copy(), len(points))


def sato_potential_residual(model: SatoModel, sampler: Sampler) -> Residual:
    """max |X(x) - grad f(x)| with f = (b1 x1^2 + b2 x2^2 + b3 x3^2) / 2."""

    lv = model.as_lv()
    points = sampler.points()
    values = [np.max(np.abs(lv_rhs(lv, x) - model.b * x)) for x in points]
    worst = int(np.argmax(values))
    return Residual(float(values[worst]), points[worst].copy(), len(points))


@dataclass(frozen=True)
class Structure:
    """A bivector with its Hamiltonian and the field they must reproduce."""

    label: str
    pi: Bivector
    sampler: Sampler
    H: Optional[HamiltonianFn] = None
    rhs: Optional[Callable[[Vector], Vector]] = None


def model_structures(
    model: GrowthModel,
    t: float | None = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
) -> list[Structure]:
    """Every Poisson structure shipped for a model.

    Hamiltonians that cannot be built (e.g. b1 + b3 != b2) are left out and the
    bivector is still checked for skew-symmetry and the Jacobi identity.
    """

    states = state_sampler(model, samples, seed)
    logs = log_sampler(model, samples, seed)

    def from_log(v: Vector) -> Vector:
        return pushforward_rhs(model, v)

    if isinstance(model, SatoModel):
        lv = model.as_lv()
        c = _try(lambda: sato_solve_c(model.b, t))
        structures = [
            Structure(
                "pi",
                sato_bivector(),
                states,
                None if c is None else build_sato_H(c),
                lambda x: lv_rhs(lv, x),
            ),
            Structure(
                "pi~",
                sato_log_bivector(),
                logs,
                None if c is None else build_sato_log_H(c),
                from_log,
            ),
        ]

        params = _try(lambda: bihamiltonian_ab(model.b))
        if params is not None:
            pi1, pi2 = bihamiltonian_bivectors(params)
            H1, H2, _ = build_bihamiltonian_pair(params)
            structures.append(Structure("pi1", pi1, states, H1, lambda x: lv_rhs(lv, x)))
            structures.append(Structure("pi2", pi2, states, H2, lambda x: lv_rhs(lv, x)))
            structures.extend(
                Structure(f"pi1{lam:+g}*pi2", pencil(pi1, pi2, lam), states)
                for lam in PENCIL_LAMBDAS
            )
        return structures

    if isinstance(model, LogisticModel):
        c = _try(lambda: sato_solve_c(model.b, t))
        H = None if c is None else build_logistic_log_H(model, c)
        return [Structure("pi3", logistic_bivector(), logs, H, from_log)]

    if isinstance(model, DebtModel):
        return [Structure("pi4", debt_bivector(model), logs, build_debt_H(model), from_log)]

    raise ValidationError(f"no Poisson structure is shipped for the {model.kind} model")


def _try(build):
    try:
        return build()
    except DerivationError as e:
        logger.warning(f"Skipping Hamiltonian: {e}")
        return None


def model_hamiltonians(model: GrowthModel, t: float | None = None) -> list[HamiltonianFn]:
    """Conserved quantities of a model in its original coordinates."""

    if isinstance(model, SatoModel):
        monitors = []
        if (c := _try(lambda: sato_solve_c(model.b, t))) is not None:
            monitors.append(build_sato_H(c))
        if (params := _try(lambda: bihamiltonian_ab(model.b))) is not None:
            monitors.extend(build_bihamiltonian_pair(params))
        return monitors

    if isinstance(model, LogisticModel):
        c = _try(lambda: sato_solve_c(model.b, t))
        return [] if c is None else [build_logistic_H(model, c)]

    if isinstance(model, DebtModel):
        return [pullback_to_state(model, build_debt_H(model))]

    return []
