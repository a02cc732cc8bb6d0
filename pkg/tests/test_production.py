import dataclasses

import numpy as np
import pytest

from ecodyn.errors import DerivationError, DomainError, ValidationError
from ecodyn.hamiltonians import bihamiltonian_ab
from ecodyn.integrators import IntegratorConfig, Method, integrate
from ecodyn.models import DebtModel, LogisticModel, SatoModel, Trajectory, model_rhs
from ecodyn.production import (
    COBB_DOUGLAS_1928,
    CobbDouglasPF,
    DebtPF,
    Family,
    LogisticPF,
    SShapedPF,
    cobb_douglas_from_integral,
    debt_g,
    debt_labor_reduction,
    debt_output_logit,
    derive_bihamiltonian_cobb_douglas,
    derive_production_function,
    elasticity_check,
    eval_cobb_douglas,
    eval_debt_pf,
    eval_logistic_pf,
    eval_sshaped,
    evaluate_state,
    solve_constant_from_state,
    surface_residual,
)

SATO = SatoModel(1.0, 3.0, 2.0)
LOGISTIC = LogisticModel(0.5, 1.5, 1.0, 2.0, 4.0, 8.0)
DEBT = DebtModel(b1=0.5, b2=-0.8, b3=1.2, b4=0.7, a12=-0.4, a21=0.6, N3=5.0, N4=3.0)

DEBT_PF = DebtPF(
    N_f=5.0, N_L=3.0, b1=0.5, b2=-0.8, b3=1.2, b4=0.7, a12=-0.4, a21=0.6, C=0.3
)

TEST_DATA = [
    # model, x0, t1, tolerance
    (SATO, [1.0, 1.0, 1.0], 1.0, 1e-8),
    (SATO, [2.0, 3.0, 5.0], 1.0, 1e-8),
    (LOGISTIC, [0.5, 0.5, 0.5], 5.0, 1e-5),
    (LOGISTIC, [1.5, 0.2, 7.0], 5.0, 1e-5),
    (DEBT, [1.0, 1.0, 1.0, 1.0], 5.0, 1e-5),
    (DEBT, [1.5, 0.8, 4.0, 0.3], 5.0, 1e-5),
]


def test_families():
    assert str(Family.SShaped) == "s-shaped"
    assert CobbDouglasPF(1.0, 0.5, 0.5).family is Family.CobbDouglas
    assert DEBT_PF.family is Family.Debt


def test_cobb_douglas_1928():
    pf = COBB_DOUGLAS_1928

    assert pf.crs
    assert pf.alpha + pf.beta == 1.0
    assert eval_cobb_douglas(pf, 1.0, 1.0) == pytest.approx(1.01)


def test_validation():
    with pytest.raises(ValidationError) as e:
        CobbDouglasPF(0.0, 0.5, 0.5)
    assert e.value.field == "A"

    with pytest.raises(ValidationError) as e:
        CobbDouglasPF(1.0, 0.5, 0.6, crs=True)
    assert e.value.field == "beta"

    with pytest.raises(ValidationError):
        SShapedPF(1.0, 0.5, 1.5)

    with pytest.raises(ValidationError) as e:
        LogisticPF(8.0, 2.0, -4.0, 0.5, 0.5, 1.0)
    assert e.value.field == "N_K"

    with pytest.raises(ValidationError) as e:
        DebtPF(5.0, 3.0, 0.5, -0.8, 1.2, 0.7, a12=0.4, a21=0.6, C=0.0)
    assert e.value.field == "a12"


def test_domain_errors():
    pf = LogisticPF(8.0, 2.0, 4.0, 0.5, 0.5, 1.0)

    with pytest.raises(DomainError):
        eval_cobb_douglas(COBB_DOUGLAS_1928, -1.0, 1.0)
    with pytest.raises(DomainError):
        eval_logistic_pf(pf, 2.0, 1.0)
    with pytest.raises(DomainError):
        eval_debt_pf(DEBT_PF, 1.0, 0.0, 1.0)


def test_logistic_absolute_branch():
    below = LogisticPF(8.0, 2.0, 4.0, 0.5, 0.5, 1.0)
    either = LogisticPF(8.0, 2.0, 4.0, 0.5, 0.5, 1.0, absolute_branch=True)

    assert eval_logistic_pf(either, 1.0, 1.0) == pytest.approx(eval_logistic_pf(below, 1.0, 1.0))
    assert 0.0 < eval_logistic_pf(either, 3.0, 6.0) < 8.0

    with pytest.raises(DomainError):
        eval_logistic_pf(either, 2.0, 1.0)


def test_logistic_pf_closed_form():
    pf = LogisticPF(N_f=8.0, N_L=2.0, N_K=4.0, alpha=0.3, beta=0.6, C=1.7)
    L, K = 0.7, 2.5
    top = L**0.3 * K**0.6
    expected = 8.0 * top / (1.7 * (2.0 - L) ** 0.3 * (4.0 - K) ** 0.6 + top)

    assert eval_logistic_pf(pf, L, K) == pytest.approx(expected, rel=1e-12)


def test_sshaped_without_saturation_is_cobb_douglas():
    grid = np.logspace(-3, 3, 20)
    L, K = np.meshgrid(grid, grid)

    for a, p in ((1.0, 0.5), (2.5, 0.2), (0.3, 0.9)):
        s_shaped = eval_sshaped(SShapedPF(a, 0.0, p), L, K)
        cobb_douglas = eval_cobb_douglas(CobbDouglasPF(a, p, 1.0 - p), L, K)
        assert np.allclose(s_shaped, cobb_douglas, rtol=1e-12, atol=0.0)


def test_logistic_approaches_sshaped_for_small_inputs():
    a, p = 2.0, 0.4
    logistic = LogisticPF(N_f=a, N_L=1.0, N_K=1.0, alpha=p, beta=1.0 - p, C=1.0)
    s_shaped = SShapedPF(a, 1.0, p)

    gaps = [
        abs(eval_logistic_pf(logistic, eps, eps) - eval_sshaped(s_shaped, eps, eps))
        for eps in (1e-2, 1e-3, 1e-4)
    ]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[0] == pytest.approx(a * 1e-4 / 1.01, rel=1e-6)


def test_sshaped_saturates():
    pf = SShapedPF(3.0, 2.0, 0.5)

    assert eval_sshaped(pf, 1e8, 1e8) == pytest.approx(1.5, rel=1e-6)


def test_elasticity_check():
    pf = CobbDouglasPF(1.5, 0.3, 0.6)
    alpha, beta = elasticity_check(pf)

    assert alpha == pytest.approx(0.3, abs=1e-8)
    assert beta == pytest.approx(0.6, abs=1e-8)


def test_constant_returns_elasticities_sum_to_one():
    alpha, beta = elasticity_check(CobbDouglasPF(1.2, 0.35, 0.65, crs=True))

    assert alpha + beta == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("lam", [0.1, 0.5, 2.0, 7.3, 100.0])
def test_cobb_douglas_homogeneity(lam):
    pf = CobbDouglasPF(1.5, 0.3, 0.6)
    L, K = np.linspace(0.5, 5.0, 10), np.linspace(2.0, 0.2, 10)

    scaled = eval_cobb_douglas(pf, lam * L, lam * K)
    assert np.allclose(scaled, lam**0.9 * eval_cobb_douglas(pf, L, K), rtol=1e-12, atol=0.0)


def test_logistic_and_debt_output_stay_below_capacity():
    rng = np.random.default_rng(11)
    count = 10_000

    logistic = LogisticPF(N_f=8.0, N_L=2.0, N_K=4.0, alpha=0.3, beta=0.6, C=1.7)
    L = rng.uniform(0.02, 0.98, count) * logistic.N_L
    K = rng.uniform(0.02, 0.98, count) * logistic.N_K
    Y = eval_logistic_pf(logistic, L, K)
    assert np.all((Y > 0) & (Y < logistic.N_f))

    L = rng.uniform(0.02, 0.98, count) * DEBT_PF.N_L
    K, D = rng.uniform(0.1, 5.0, (2, count))
    Y = eval_debt_pf(DEBT_PF, L, K, D)
    assert np.all((Y > 0) & (Y < DEBT_PF.N_f))


def test_debt_midpoint_and_saturation():
    L, K, D = 1.2, 0.8, 1.5
    level = float(debt_g(DEBT_PF, L, K, D))
    midpoint = dataclasses.replace(DEBT_PF, C=DEBT_PF.C - level)

    assert float(debt_g(midpoint, L, K, D)) == pytest.approx(0.0, abs=1e-12)
    assert float(eval_debt_pf(midpoint, L, K, D)) == pytest.approx(DEBT_PF.N_f / 2, rel=1e-12)

    # b3 > 0, so a huge G saturates at N_f and a very negative one at 0
    high = eval_debt_pf(dataclasses.replace(DEBT_PF, C=1e6), L, K, D)
    low = eval_debt_pf(dataclasses.replace(DEBT_PF, C=-1e6), L, K, D)
    assert float(high) == DEBT_PF.N_f
    assert float(low) == 0.0


def test_cobb_douglas_from_integral():
    pf = cobb_douglas_from_integral([1.0, 1.0, -2.0], [2.0, 3.0, 5.0], crs=True)

    assert pf.alpha == pytest.approx(0.5)
    assert pf.beta == pytest.approx(0.5)
    assert pf.A == pytest.approx(5.0 / np.sqrt(6.0))
    assert eval_cobb_douglas(pf, 2.0, 3.0) == pytest.approx(5.0)

    with pytest.raises(DerivationError):
        cobb_douglas_from_integral([1.0, -1.0, 0.0], [2.0, 3.0, 5.0])


def test_derive_sato():
    pf = derive_production_function(SATO, [2.0, 3.0, 5.0])

    assert isinstance(pf, CobbDouglasPF)
    assert pf.crs
    assert (pf.alpha, pf.beta) == pytest.approx((0.5, 0.5))
    assert evaluate_state(pf, [2.0, 3.0, 5.0]) == pytest.approx(5.0)


def test_derive_bihamiltonian_route_agrees():
    x0 = [2.0, 3.0, 5.0]
    first = derive_production_function(SATO, x0)
    second = derive_bihamiltonian_cobb_douglas(bihamiltonian_ab(SATO.b), x0)

    assert second.crs
    assert second.alpha == pytest.approx(first.alpha, abs=1e-10)
    assert second.beta == pytest.approx(first.beta, abs=1e-10)
    assert second.A == pytest.approx(first.A, rel=1e-10)


def test_derive_logistic():
    x0 = [1.5, 0.2, 7.0]
    pf = derive_production_function(LOGISTIC, x0)

    assert isinstance(pf, LogisticPF)
    assert (pf.N_f, pf.N_L, pf.N_K) == (8.0, 2.0, 4.0)
    assert evaluate_state(pf, x0) == pytest.approx(7.0, rel=1e-12)

    with pytest.raises(DerivationError):
        solve_constant_from_state(
            LogisticModel(0.5, 1.5, 1.0, 2.0, 4.0, 8.0, absolute_branch=True), x0
        )


def test_derive_debt():
    x0 = [1.5, 0.8, 4.0, 0.3]
    pf = derive_production_function(DEBT, x0)

    assert isinstance(pf, DebtPF)
    assert pf.capital_scale == pytest.approx(0.75)
    assert pf.debt_scale == pytest.approx(0.8)
    assert evaluate_state(pf, x0) == pytest.approx(4.0, rel=1e-12)
    assert debt_output_logit(pf, 4.0) == pytest.approx(
        pf.b3 * debt_g(pf, 0.3, 1.5, 0.8), abs=1e-10
    )


def test_derive_rejects_points_off_the_domain():
    with pytest.raises(DomainError):
        derive_production_function(LOGISTIC, [1.0, 5.0, 1.0])


def test_debt_state_roles():
    x = np.array([1.5, 0.8, 4.0, 0.3])  # K, D, f, L

    assert evaluate_state(DEBT_PF, x) == pytest.approx(eval_debt_pf(DEBT_PF, 0.3, 1.5, 0.8))


def test_debt_labor_reduction():
    reduced = debt_labor_reduction(DEBT_PF)

    assert reduced.beta == 0.0
    assert reduced.alpha == pytest.approx(1.2 / 0.7)
    for L in (0.1, 1.0, 2.9):
        assert eval_debt_pf(DEBT_PF, L, 1.0, 1.0, interaction=False) == pytest.approx(
            eval_logistic_pf(reduced, L, 0.5), rel=1e-12
        )


def test_production_surface_holds_along_trajectories():
    for model, x0, t1, tolerance in TEST_DATA:
        cfg = IntegratorConfig(Method.RK4, (0.0, t1), h=1e-3, record_every=10)
        traj = integrate(model_rhs(model), x0, cfg, domain=model.flow_domain())
        pf = derive_production_function(model, x0)

        assert surface_residual(pf, traj).max_abs < tolerance, (model, x0)


def test_surface_residual_reports_inadmissible_samples():
    pf = LogisticPF(8.0, 2.0, 4.0, 0.5, 0.5, 1.0)
    traj = Trajectory([0.0, 1.0], [[0.5, 0.5, 0.5], [3.0, 0.5, 0.5]])

    with pytest.raises(DomainError) as e:
        surface_residual(pf, traj)
    assert e.value.time == 1.0
