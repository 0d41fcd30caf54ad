import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aggne import (DomainError, OracleError, active_set_reference, cournot_instance, kkt_residual,
                   quadratic_game, solve_reference_gne)

from conftest import random_cournot_like


def closed_form_cournot():
    """Agents 1..5 interior with sum(x) = 20, agents 6..20 at zero.

    Stationarity 1.05 x_i + sigma + (2i - 1) - 60 + lam = 0 with sigma = 1 gives
    x_i = (59 - (2i - 1) - lam)/1.05; summing over i <= 5 and setting the
    total to 20 gives (270 - 5 lam)/1.05 = 20, so lam = 49.8.
    """
    lam = (5 * 59 - 25 - 20 * 1.05) / 5
    i = np.arange(1, 6)
    x = np.concatenate([(59 - (2 * i - 1) - lam) / 1.05, np.zeros(15)])
    return x, lam


def test_closed_form_matches_rounded_vector():
    x, lam = closed_form_cournot()
    assert lam == pytest.approx(49.8, abs=1e-12)
    np.testing.assert_allclose(x[:5], [7.8095, 5.9048, 4.0, 2.0952, 0.1905], atol=1e-4)


def test_residual_at_solution(cournot20):
    x, lam = closed_form_cournot()
    assert kkt_residual(x, [lam], cournot20) <= 1e-9


def test_residual_without_multiplier(cournot20):
    x, _ = closed_form_cournot()
    assert kkt_residual(x, [0.0], cournot20) > 1.0


def test_residual_unconstrained_interior():
    # F(x) = x - 1 with boxes [-5, 5] and a slack coupling constraint
    N = 3
    g = quadratic_game(np.ones(N), np.zeros(N), np.zeros(N), -np.ones(N), np.zeros(N),
                       np.full(N, -5.0), np.full(N, 5.0), np.ones(N), np.full(N, 10.0))
    assert kkt_residual(np.ones(N), [0.0], g) == 0.0


def test_reference_solver(cournot20, cournot_ref):
    x, lam = closed_form_cournot()
    np.testing.assert_allclose(cournot_ref.x, x, atol=1e-4)
    assert cournot_ref.lam[0] == pytest.approx(lam, abs=1e-4)
    assert cournot_ref.residual <= 1e-12
    assert cournot_ref.active == (0,)


def test_two_oracles_agree(cournot20, cournot_ref):
    alt = active_set_reference(cournot20)
    np.testing.assert_allclose(alt.x, cournot_ref.x, atol=1e-8)
    assert alt.lam[0] == pytest.approx(cournot_ref.lam[0], abs=1e-8)


def test_reference_feasibility(cournot20, cournot_ref):
    x = cournot_ref.x
    assert cournot20.A @ x <= cournot20.b + 1e-9
    assert np.all(x >= 0.0) and np.all(x <= 10.0)
    assert abs(cournot_ref.lam @ (cournot20.A @ x - cournot20.b)) <= 1e-9


def test_slack_capacity():
    g = cournot_instance(20, capacity=1e6)
    ref = solve_reference_gne(g)
    assert ref.lam[0] == 0.0
    # every firm wants more: F_i(10 * 1) = 1.05 * 10 + 10 + (2i - 1) - 60 < 0
    np.testing.assert_allclose(ref.x, 10.0)
    assert active_set_reference(g).lam[0] == 0.0


def test_symmetric_game_has_equal_actions():
    N = 6
    g = quadratic_game(np.full(N, 1.5), np.full(N, 0.5), np.zeros(N), np.full(N, -10.0),
                       np.zeros(N), np.zeros(N), np.full(N, 8.0), np.ones(N), np.full(N, 2.0))
    ref = solve_reference_gne(g)
    assert np.ptp(ref.x) <= 1e-8
    assert ref.x.sum() == pytest.approx(12.0, abs=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_heterogeneous_enumeration_agrees(seed):
    g = random_cournot_like(4, seed)
    ref = solve_reference_gne(g)
    alt = active_set_reference(g)
    np.testing.assert_allclose(alt.x, ref.x, atol=1e-8)
    np.testing.assert_allclose(alt.lam, ref.lam, atol=1e-8)


def test_oracle_error_on_iteration_cap(cournot20):
    with pytest.raises(OracleError):
        solve_reference_gne(cournot20, tol=1e-14, max_iter=20)


def test_active_set_needs_scalar_quadratic():
    N = 2
    g = quadratic_game(np.ones(N), np.zeros(N), np.zeros(N), np.zeros((N, 2)), np.zeros((N, 2)),
                       np.zeros((N, 2)), np.ones((N, 2)), np.ones((N, 1, 2)), np.ones((N, 1)))
    with pytest.raises(DomainError):
        active_set_reference(g)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_reference_self_consistency(N, seed):
    g = random_cournot_like(N, seed)
    ref = solve_reference_gne(g, tol=1e-9)
    assert kkt_residual(ref.x, ref.lam, g) <= 1e-9
    assert np.all(ref.lam >= 0)
    assert np.all(g.A @ ref.x <= g.b + 1e-8)
