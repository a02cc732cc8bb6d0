import numpy as np
import pytest

from ecodyn.errors import DomainError, IntegrationError, ValidationError
from ecodyn.hamiltonians import build_logistic_log_H, model_hamiltonians, sato_solve_c
from ecodyn.integrators import (
    IntegratorConfig,
    Method,
    convergence_order,
    euler_step,
    integrate,
    rk4_step,
    rkf45_step,
)
from ecodyn.models import (
    DebtModel,
    LogisticModel,
    LVSystem,
    SatoModel,
    exact_solution,
    lv_rhs,
    model_rhs,
    rhs_log,
    to_log_coords,
)
from ecodyn.poisson import Domain, conservation_residual

SATO = SatoModel(1.0, 3.0, 2.0)
LOGISTIC = LogisticModel(0.5, 1.5, 1.0, 2.0, 4.0, 8.0)
DEBT = DebtModel(b1=0.5, b2=-0.8, b3=1.2, b4=0.7, a12=-0.4, a21=0.6, N3=5.0, N4=3.0)

LONG_RUN = IntegratorConfig(Method.RK4, (0.0, 5.0), h=1e-3, record_every=10)


def decay(x):
    return -np.ones_like(x)


def test_steppers_on_linear_growth():
    rhs = lambda x: 2.0 * x  # noqa: E731
    x = np.array([1.0])
    h = 0.1

    assert euler_step(rhs, x, h) == pytest.approx(1.2)
    # RK4 is the degree-4 Taylor polynomial on linear problems
    z = 2.0 * h
    assert rk4_step(rhs, x, h) == pytest.approx(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24)

    x5, error = rkf45_step(rhs, x, h)
    assert x5 == pytest.approx(np.exp(z), abs=1e-6)
    assert abs(error[0]) < 1e-5


def test_config_validation():
    assert IntegratorConfig(method="rkf45").method is Method.RKF45

    for kwargs, field in (
        ({"t_span": (1.0, 0.0)}, "t_span"),
        ({"h": 0.0}, "h"),
        ({"rel_tol": -1.0}, "rel_tol"),
        ({"h_min": 1.0, "h_max": 0.1}, "h_min"),
        ({"record_every": 0}, "record_every"),
    ):
        with pytest.raises(ValidationError) as e:
            IntegratorConfig(**kwargs)
        assert e.value.field == field

    with pytest.raises(ValueError):
        IntegratorConfig(method="leapfrog")


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"t_span": (0.0, np.inf)}, "t_span"),
        ({"t_span": (np.nan, 1.0)}, "t_span"),
        ({"h": np.inf}, "h"),
        ({"h_max": np.inf}, "h_max"),
        ({"abs_tol": np.nan}, "abs_tol"),
    ],
)
def test_config_needs_finite_values(kwargs, field):
    with pytest.raises(ValidationError) as e:
        IntegratorConfig(**kwargs)
    assert e.value.field == field


def test_fixed_step_lands_on_t1():
    cfg = IntegratorConfig(Method.RK4, (0.0, 1.0), h=0.03)
    traj = integrate(model_rhs(SATO), [1.0, 1.0, 1.0], cfg)

    assert traj.times[0] == 0.0
    assert traj.times[-1] == 1.0
    assert np.allclose(traj.final, np.exp(SATO.b), rtol=1e-5)


def test_record_every():
    cfg = IntegratorConfig(Method.RK4, (0.0, 1.0), h=1e-3, record_every=100)
    traj = integrate(model_rhs(SATO), [1.0, 1.0, 1.0], cfg)

    assert len(traj.times) == 11
    assert traj.times[-1] == 1.0


def test_sato_matches_exponential_oracle():
    x0 = np.array([1.0, 2.0, 0.5])
    cfg = IntegratorConfig(Method.RK4, (0.0, 1.0), h=1e-3)
    traj = integrate(model_rhs(SATO), x0, cfg)

    assert np.allclose(traj.final, exact_solution(SATO, x0, 1.0), rtol=1e-10)


def test_adaptive_matches_rk4():
    x0 = np.array([1.0, 2.0, 0.5])
    exact = exact_solution(SATO, x0, 1.0)

    fixed = integrate(model_rhs(SATO), x0, IntegratorConfig(Method.RK4, (0.0, 1.0), h=1e-3))
    adaptive = integrate(
        model_rhs(SATO),
        x0,
        IntegratorConfig(Method.RKF45, (0.0, 1.0), h=1e-2, rel_tol=1e-10, abs_tol=1e-12),
    )

    assert adaptive.times[-1] == 1.0
    assert np.allclose(adaptive.final, exact, rtol=1e-8)
    assert np.max(np.abs(adaptive.final - fixed.final) / np.abs(exact)) < 1e-8
    # far fewer steps than the fixed grid
    assert len(adaptive.times) < 1001


def test_adaptive_logistic():
    x0 = np.array([0.5, 0.5, 0.5])
    cfg = IntegratorConfig(Method.RKF45, (0.0, 5.0), h=1e-2, rel_tol=1e-10)
    traj = integrate(model_rhs(LOGISTIC), x0, cfg, domain=LOGISTIC.flow_domain())

    assert np.allclose(traj.final, exact_solution(LOGISTIC, x0, 5.0), rtol=1e-8)


def test_domain_exit_is_an_error():
    cfg = IntegratorConfig(Method.RK4, (0.0, 1.0), h=0.01)

    with pytest.raises(DomainError) as e:
        integrate(decay, [0.5], cfg, domain=Domain.positive(1))
    assert e.value.coordinate == 0
    assert e.value.time == pytest.approx(0.5, abs=0.011)


def test_monitor_domain_exit_is_an_error():
    cfg = IntegratorConfig(Method.RK4, (0.0, 1.0), h=0.01)
    monitor = model_hamiltonians(SATO)[0]
    with pytest.raises(DomainError):
        integrate(lambda x: -np.ones(3), [0.2, 0.3, 0.4], cfg, monitors=[monitor])


def test_non_finite_state():
    cfg = IntegratorConfig(Method.RK4, (0.0, 2.0), h=0.01)

    with pytest.raises(IntegrationError), np.errstate(over="ignore", invalid="ignore"):
        integrate(lambda x: x**2, [1.0], cfg)


def test_step_underflow():
    cfg = IntegratorConfig(Method.RKF45, (0.0, 1.0), h=1e-3, h_min=0.05, h_max=0.1)

    with pytest.raises(IntegrationError):
        integrate(model_rhs(SATO), [1.0, 1.0, 1.0], cfg)


def test_sato_hamiltonians_conserved():
    traj = integrate(
        model_rhs(SATO), [1.0, 1.0, 1.0], LONG_RUN, monitors=model_hamiltonians(SATO)
    )

    assert traj.monitor_names == ("H", "H1", "H2", "H3")
    for H in model_hamiltonians(SATO):
        assert conservation_residual(H, traj).max_abs < 1e-6, H.name


def test_logistic_hamiltonian_conserved():
    x0 = [0.5, 0.5, 0.5]
    (H3,) = model_hamiltonians(LOGISTIC)
    traj = integrate(model_rhs(LOGISTIC), x0, LONG_RUN, monitors=[H3])

    assert conservation_residual(H3, traj).max_abs < 1e-6


def test_logistic_log_hamiltonian_conserved():
    H = build_logistic_log_H(LOGISTIC, sato_solve_c(LOGISTIC.b))
    v0 = to_log_coords(LOGISTIC, [0.5, 0.5, 0.5])
    traj = integrate(lambda v: rhs_log(LOGISTIC, v), v0, LONG_RUN, monitors=[H])

    assert conservation_residual(H, traj).max_abs < 1e-6


def test_debt_hamiltonian_conserved():
    (H4,) = model_hamiltonians(DEBT)
    traj = integrate(
        model_rhs(DEBT), [1.0, 1.0, 1.0, 1.0], LONG_RUN, monitors=[H4], model="debt"
    )

    assert traj.model == "debt"
    assert conservation_residual(H4, traj).max_abs < 1e-6


def test_rk4_order_on_sato():
    x0 = np.array([1.0, 1.0, 1.0])
    estimate = convergence_order(
        model_rhs(SATO), x0, lambda t: exact_solution(SATO, x0, t), Method.RK4
    )

    assert estimate.reliable
    assert estimate.order == pytest.approx(4.0, abs=0.2)


def test_rk4_order_on_logistic():
    # x' = 2 x (1 - x / 2)
    sys = LVSystem([2.0], [[-1.0]])
    x0 = np.array([0.2])

    def exact(t):
        return 2.0 * x0 * np.exp(2.0 * t) / (2.0 + x0 * (np.exp(2.0 * t) - 1.0))

    estimate = convergence_order(lambda x: lv_rhs(sys, x), x0, exact, Method.RK4, h=0.1)
    assert estimate.order == pytest.approx(4.0, abs=0.2)


def test_euler_order():
    x0 = np.array([1.0, 1.0, 1.0])
    estimate = convergence_order(
        model_rhs(SATO), x0, lambda t: exact_solution(SATO, x0, t), Method.Euler, h=0.01
    )

    assert estimate.order == pytest.approx(1.0, abs=0.2)


def test_order_estimator_flags_exact_methods():
    # RK4 is exact on linear fields: errors sit at the rounding floor
    estimate = convergence_order(
        decay, np.array([5.0]), lambda t: np.array([5.0 - t]), Method.RK4
    )

    assert not estimate.reliable
    assert np.isnan(estimate.order)


def test_order_estimator_checks():
    with pytest.raises(ValidationError):
        convergence_order(decay, [1.0], lambda t: np.array([1.0 - t]), Method.RKF45)

    with pytest.raises(ValidationError):
        convergence_order(decay, [1.0], lambda t: np.array([1.0, 2.0]))
