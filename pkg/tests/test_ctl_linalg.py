import numpy as np
import pytest
from scipy.linalg import solve_continuous_are

from hetcons.ctl_linalg import (StateSpace, check_spr, eigenvalue_multiplicity, freq_response,
                                is_hurwitz, is_minimum_phase, minimal_realization, pbh_test,
                                rosenbrock_full_row_rank, solve_care, solve_lyapunov,
                                solve_riccati, solve_sylvester, transmission_zeros)
from hetcons.errors import NumericalError, ValidationError


def test_sylvester_scalar_and_identity():
    np.testing.assert_allclose(solve_sylvester([[2.0]], [[3.0]], [[10.0]]), [[2.0]])
    np.testing.assert_allclose(solve_sylvester(np.eye(2), np.eye(2), 2 * np.eye(2)), np.eye(2))


def test_sylvester_random_residual():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    B = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    C = rng.standard_normal((4, 4))
    X = solve_sylvester(A, B, C)
    assert np.linalg.norm(A @ X + X @ B - C) <= 1e-9 * (1 + np.linalg.norm(C))


def test_sylvester_resonant():
    with pytest.raises(NumericalError, match="resonant"):
        solve_sylvester([[1.0]], [[-1.0]], [[1.0]])


def test_lyapunov():
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    X = solve_lyapunov(A, np.eye(2))
    np.testing.assert_allclose(A.T @ X + X @ A + np.eye(2), 0, atol=1e-12)


def test_care_scalar_cases():
    s = solve_care([[0.0]], [[1.0]], [[1.0]])
    np.testing.assert_allclose(s.X, [[1.0]], atol=1e-10)
    np.testing.assert_allclose(s.closed_loop_spectrum, [-1.0], atol=1e-10)
    s = solve_care([[1.0]], [[1.0]], [[2.0]])
    np.testing.assert_allclose(s.X, [[1 + np.sqrt(3)]], atol=1e-10)
    np.testing.assert_allclose(s.closed_loop_spectrum, [-np.sqrt(3)], atol=1e-10)


def test_care_dual_filter():
    Y = solve_care(np.zeros((1, 1)).T, np.ones((1, 1)).T, [[1.0]]).X
    np.testing.assert_allclose(Y, [[1.0]], atol=1e-10)


def test_care_matches_scipy():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 5))
    B = rng.standard_normal((5, 2))
    C = rng.standard_normal((2, 5))
    X = solve_care(A, B, C.T @ C).X
    np.testing.assert_allclose(X, solve_continuous_are(A, B, C.T @ C, np.eye(2)), atol=1e-8)


def test_care_no_stabilizing_solution():
    # uncontrollable mode on the imaginary axis
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(NumericalError):
        solve_care(A, np.zeros((2, 1)), np.eye(2))


def test_indefinite_riccati():
    A = np.array([[-1.0]])
    X = solve_riccati(A, np.array([[-0.5]]), np.array([[1.0]])).X
    assert abs(-2 * X[0, 0] + 0.5 * X[0, 0] ** 2 + 1) < 1e-10
    assert -1 + 0.5 * X[0, 0] < 0


def test_is_hurwitz_examples():
    assert is_hurwitz(-np.eye(3))
    assert not is_hurwitz([[0.0, 1.0], [0.0, 0.0]])
    assert is_hurwitz([[0.0, 1.0], [-1.0, -1.0]])


def test_pbh_examples():
    assert pbh_test(np.diag([1.0, -1.0]), np.array([[1.0], [0.0]]), "control")
    assert not pbh_test([[1.0]], [[0.0]], "control")
    assert pbh_test([[1.0]], [[1.0]], "observation")
    with pytest.raises(ValidationError):
        pbh_test([[1.0]], [[1.0]], "sideways")


def test_freq_response_examples():
    ss = StateSpace([[-1.0]], [[1.0]], [[1.0]])
    np.testing.assert_allclose(freq_response(ss, 0.0), [[1.0]])
    np.testing.assert_allclose(freq_response(ss, 1.0), [[0.5 - 0.5j]])
    np.testing.assert_allclose(freq_response(ss, 1.0, input_gain=[[2.0]]), [[1.0 - 1.0j]])
    with pytest.raises(NumericalError, match="pole"):
        freq_response(StateSpace([[0.0]], [[1.0]], [[1.0]]), 0.0)


def test_spr_examples():
    rep = check_spr(StateSpace([[-1.0]], [[1.0]], [[1.0]]))
    assert rep.passed and rep.hurwitz
    rep = check_spr(StateSpace([[-1.0]], [[-2.0]], [[1.0]]))
    assert not rep.passed and rep.hurwitz and rep.min_eigenvalue < 0
    rep = check_spr(StateSpace([[1.0]], [[1.0]], [[1.0]]))
    assert not rep.passed and not rep.hurwitz
    with pytest.raises(ValidationError):
        check_spr(StateSpace(-np.eye(2), np.eye(2), np.ones((1, 2))))


def test_spr_report_worst_omega_on_grid():
    # T(s) = (s + 2) / ((s + 1)(s + 3)) has positive real part, smallest at high frequency
    ss = StateSpace([[0.0, 1.0], [-3.0, -4.0]], [[0.0], [1.0]], [[2.0, 1.0]])
    rep = check_spr(ss)
    assert rep.passed
    assert rep.worst_omega == pytest.approx(1e3)


def test_transmission_zeros_and_minimum_phase():
    # (s + 2) / (s^2 + 3 s + 2) after cancellation: zero at -2
    ss = StateSpace([[0.0, 1.0], [-2.0, -3.0]], [[0.0], [1.0]], [[2.0, 1.0]])
    np.testing.assert_allclose(transmission_zeros(ss), [-2.0])
    assert is_minimum_phase(ss)
    nmp = StateSpace([[0.0, 1.0], [-2.0, -3.0]], [[0.0], [1.0]], [[-1.0, 1.0]])
    assert not is_minimum_phase(nmp)
    assert not rosenbrock_full_row_rank(nmp, 1.0)
    assert rosenbrock_full_row_rank(nmp, 0.0)


def test_minimal_realization_drops_hidden_modes():
    ss = StateSpace(np.diag([-1.0, -2.0, -3.0]), [[1.0], [0.0], [1.0]], [[1.0, 1.0, 0.0]])
    mr = minimal_realization(ss)
    assert mr.n == 1
    np.testing.assert_allclose(freq_response(mr, 0.7), freq_response(ss, 0.7), atol=1e-12)


def test_eigenvalue_multiplicity():
    J = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert eigenvalue_multiplicity(J, 0.0) == 2
    assert eigenvalue_multiplicity(np.diag([0.0, 0.0, 1.0]), 0.0) == 2
    assert eigenvalue_multiplicity(np.diag([1.0, 2.0]), 0.0) == 0
    w = 3.77
    A = np.array([[0.0, 1.0], [-w * w, 0.0]])
    assert eigenvalue_multiplicity(A, 1j * w) == 1


def test_statespace_validation():
    with pytest.raises(ValidationError):
        StateSpace(np.eye(2), np.ones((3, 1)), np.ones((1, 2)))
    ss = StateSpace([[0.0]], [[1.0]], [[1.0]])
    with pytest.raises(ValueError):
        ss.A[0, 0] = 1.0
