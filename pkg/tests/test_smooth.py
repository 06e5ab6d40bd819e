import numpy as np
import pytest

from constrained_dynamics import SmoothMap, State, fd_jacobian


def test_fd_square_scalar():
    m = SmoothMap(dim=1, value=lambda t, x, v: np.array([x[0] ** 2]))
    s = State(0.0, np.array([3.0]), np.array([0.0]))
    J = fd_jacobian(m, s, "x")
    assert abs(J[0, 0] - 6.0) < 1e-9


def test_fd_affine_exact_in_v():
    A = np.array([[1.0, 2.0], [3.0, -4.0]])
    a = np.array([0.5, -0.5])
    m = SmoothMap(dim=2, value=lambda t, x, v: a + A @ v)
    s = State(0.0, np.array([1.0, 1.0]), np.array([0.7, -0.2]))
    J = fd_jacobian(m, s, "v")
    assert np.abs(J - A).max() < 1e-9


def test_fd_pendulum_constraint_v_slot():
    m = SmoothMap(dim=1, value=lambda t, x, v: np.array([x @ v]))
    s = State(0.0, np.array([0.0, -1.0]), np.array([2.0, 0.0]))
    J = fd_jacobian(m, s, "v")
    assert np.abs(J - np.array([[0.0, -1.0]])).max() < 1e-9


def test_fd_time_slot():
    m = SmoothMap(dim=1, value=lambda t, x, v: np.array([np.sin(t) * x[0]]))
    s = State(0.3, np.array([2.0]), np.array([0.0]))
    d = fd_jacobian(m, s, "t")
    assert abs(d[0] - 2.0 * np.cos(0.3)) < 1e-9


def test_bad_slot_rejected():
    m = SmoothMap(dim=1, value=lambda t, x, v: np.array([0.0]))
    s = State(0.0, np.array([1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        fd_jacobian(m, s, "z")


def test_dimension_mismatch_detected():
    m = SmoothMap(dim=2, value=lambda t, x, v: np.array([1.0]))
    with pytest.raises(ValueError, match="declared output dimension"):
        m(0.0, np.array([1.0]), np.array([1.0]))


def test_evaluation_failure_reports_stencil():
    def bad(t, x, v):
        if x[0] > 1.0:
            raise FloatingPointError("blew up")
        return np.array([x[0]])

    m = SmoothMap(dim=1, value=bad)
    s = State(0.0, np.array([1.0]), np.array([0.0]))
    from constrained_dynamics.smooth import EvaluationError

    with pytest.raises(EvaluationError, match=r"x\[0\]"):
        fd_jacobian(m, s, "x")


def test_state_invariants():
    with pytest.raises(ValueError):
        State(0.0, np.array([1.0, 2.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        State(0.0, np.array([np.nan]), np.array([1.0]))
    with pytest.raises(ValueError):
        State(0.0, np.array([]), np.array([]))


def test_provenance_flag():
    bare = SmoothMap(dim=1, value=lambda t, x, v: np.array([x[0]]))
    full = SmoothMap(
        dim=1,
        value=lambda t, x, v: np.array([x[0]]),
        jac_t=lambda t, x, v: np.zeros(1),
        jac_x=lambda t, x, v: np.array([[1.0]]),
        jac_v=lambda t, x, v: np.array([[0.0]]),
    )
    assert bare.provenance == "finite-difference"
    assert full.provenance == "analytic"
