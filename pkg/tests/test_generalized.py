import numpy as np
import pytest

from constrained_dynamics import (
    ChartError,
    GeneralizedState,
    IntegratorConfig,
    MassMatrix,
    State,
    covariance_residual,
    decompose_T,
    generalized_forces,
    integrate_first_kind,
    integrate_second_kind,
    lagrangian_derivative,
    lagrangian_derivative_from_pieces,
    match_trajectories,
    pullback_lagrangian,
    pushforward_state,
    random_polynomial_chart,
)
from constrained_dynamics.generalized import (
    pushforward_second_order,
    second_kind_acceleration,
)
from constrained_dynamics.scenarios import (
    circle_embedding,
    rotating_line_embedding,
    sphere_polar_embedding,
)


def test_pushforward_circle_bottom():
    emb = circle_embedding(1.0)
    gs = GeneralizedState(0.0, np.array([0.0]), np.array([2.0]))
    s = pushforward_state(emb, gs)
    assert np.abs(s.x - np.array([0.0, -1.0])).max() < 1e-15
    assert np.abs(s.v - np.array([2.0, 0.0])).max() < 1e-15


def test_pushforward_respects_domain():
    emb = sphere_polar_embedding(1.0)
    with pytest.raises(ChartError):
        pushforward_state(emb, GeneralizedState(0.0, np.array([0.0, 0.0]), np.zeros(2)))


def test_decompose_circle():
    # M2 = 1, b = 0, T0 = 0 for the unit circle with unit mass
    emb = circle_embedding(1.0)
    lag = pullback_lagrangian(emb, MassMatrix(np.eye(2)))
    M2, b, T0 = decompose_T(lag, 0.0, np.array([0.7]))
    assert abs(M2[0, 0] - 1.0) < 1e-14
    assert abs(b[0]) < 1e-14
    assert abs(T0) < 1e-14


def test_decompose_sphere_polar():
    # spherical metric: diag(R^2, R^2 sin^2 theta)
    R = 2.0
    emb = sphere_polar_embedding(R)
    lag = pullback_lagrangian(emb, MassMatrix(np.eye(3)))
    th = 1.1
    M2, b, T0 = decompose_T(lag, 0.0, np.array([th, 0.4]))
    expect = np.diag([R * R, R * R * np.sin(th) ** 2])
    assert np.abs(M2 - expect).max() < 1e-12
    assert np.abs(b).max() < 1e-14
    assert abs(T0) < 1e-14


def test_decompose_rotating_line_rheonomic_terms():
    # u = s(t) (cos wt, sin wt)? no: position y along the rotating direction,
    # so u_t carries the rotation and b, T0 are nonzero
    emb = rotating_line_embedding(1.5)
    lag = pullback_lagrangian(emb, MassMatrix(np.eye(2)))
    y = np.array([0.8])
    M2, b, T0 = decompose_T(lag, 0.3, y)
    assert abs(M2[0, 0] - 1.0) < 1e-12
    assert abs(b[0]) < 1e-12  # u_t is orthogonal to u_y on a rotating line
    assert abs(T0 - 0.5 * (1.5 * 0.8) ** 2) < 1e-12


def test_degenerate_metric_raises():
    emb = sphere_polar_embedding(1.0, pole_margin=0.0)
    lag = pullback_lagrangian(emb, MassMatrix(np.eye(3)))
    with pytest.raises(ChartError):
        decompose_T(lag, 0.0, np.array([0.0, 0.3]))


def test_lagrangian_derivative_pendulum_oracle():
    # chart theta: [L] = theta_dd + g sin theta against hand algebra
    emb = circle_embedding(1.0)
    lag = pullback_lagrangian(emb, MassMatrix(np.eye(2)))
    th, w, a = 0.6, 1.3, -2.0
    row = lagrangian_derivative(lag, 0.0, np.array([th]), np.array([w]), np.array([a]))
    assert abs(row[0] - a) < 1e-12


def test_lagrangian_derivative_matches_finite_differences():
    # independent oracle: FD of dL/dw along a quadratic path minus FD of L in y
    rng = np.random.default_rng(21)
    h = 1e-5
    for _ in range(10):
        emb = random_polynomial_chart(rng, m=4, r=2)
        lag = pullback_lagrangian(emb, MassMatrix(np.diag(rng.uniform(0.5, 2.0, 4))))
        t = float(rng.uniform(-0.5, 0.5))
        y = rng.uniform(-0.3, 0.3, 2)
        w = rng.uniform(-0.5, 0.5, 2)
        a = rng.uniform(-0.5, 0.5, 2)
        row = lagrangian_derivative(lag, t, y, w, a)

        def dL_dw(tt, yy, ww):
            out = np.zeros(2)
            for i in range(2):
                wp, wm = ww.copy(), ww.copy()
                wp[i] += h
                wm[i] -= h
                out[i] = (lag.value(tt, yy, wp) - lag.value(tt, yy, wm)) / (2 * h)
            return out

        plus = dL_dw(t + h, y + h * w + 0.5 * h * h * a, w + h * a)
        minus = dL_dw(t - h, y - h * w + 0.5 * h * h * a, w - h * a)
        total = (plus - minus) / (2 * h)
        L_y = np.zeros(2)
        for i in range(2):
            yp, ym = y.copy(), y.copy()
            yp[i] += h
            ym[i] -= h
            L_y[i] = (lag.value(t, yp, w) - lag.value(t, ym, w)) / (2 * h)
        assert np.abs(row - (total - L_y)).max() < 1e-5


def test_total_derivative_annihilated():
    # L = dW/dt pointwise has [L] = 0: encode W(t, y) with random polynomial
    # coefficients and feed its t/y derivatives through the generic kernel
    rng = np.random.default_rng(22)
    r = 3
    for _ in range(20):
        c = rng.uniform(-1, 1)
        g1 = rng.uniform(-1, 1, r)
        H = rng.uniform(-1, 1, (r, r))
        H = 0.5 * (H + H.T)
        # W(t, y) = c t + g1 . y + t y^T H y / 2  gives
        # dW/dt = c + t y^T H w + ... : b = W_y, T0 = W_t
        t = float(rng.uniform(-1, 1))
        y = rng.uniform(-1, 1, r)
        w = rng.uniform(-1, 1, r)
        a = rng.uniform(-1, 1, r)
        # b(t, y) = W_y = g1 + t H y ; T0(t, y) = W_t = c + y^T H y / 2
        db_dt = H @ y
        db_dy = t * H  # row k is d b / d y^k = t H[k]
        dT0_dy = H @ y
        row = lagrangian_derivative_from_pieces(
            np.zeros((r, r)), np.zeros((r, r)), np.zeros((r, r, r)),
            db_dt, db_dy, dT0_dy, w, a,
        )
        assert np.abs(row).max() < 1e-9


def test_generalized_forces_gravity_on_circle():
    from constrained_dynamics import ForceField

    emb = circle_embedding(1.0)
    f = ForceField(dim=2, value=lambda t, x, v: np.array([0.0, -10.0]))
    Q = generalized_forces(emb, f)
    # u = (sin th, -cos th), u_y = (cos th, sin th): Q = -10 sin th
    th = 0.8
    assert abs(Q(0.0, np.array([th]), np.zeros(1))[0] - (-10.0 * np.sin(th))) < 1e-12


def test_second_kind_pendulum_acceleration(pendulum):
    lag = pullback_lagrangian(pendulum.embedding, pendulum.system.mass)
    Q = generalized_forces(pendulum.embedding, pendulum.system.force)
    a = second_kind_acceleration(lag, Q, 0.0, np.array([0.3]), np.array([0.0]))
    assert abs(a[0] - (-10.0 * np.sin(0.3))) < 1e-12


def test_integrate_second_kind_energy(pendulum):
    traj = integrate_second_kind(
        pendulum.embedding,
        pendulum.system,
        None,
        pendulum.initial_generalized,
        4.0,
        IntegratorConfig(dt=1e-3),
    )
    # E = w^2/2 - 10 cos th is conserved on the chart
    def E(s):
        return 0.5 * float(s.w @ s.w) - 10.0 * np.cos(s.y[0])

    vals = [E(s) for s in traj.samples]
    assert max(vals) - min(vals) < 1e-9


def test_second_kind_aborts_outside_domain():
    emb = sphere_polar_embedding(1.0, pole_margin=0.3)
    from constrained_dynamics import ForceField, MechanicalSystem

    sys = MechanicalSystem(
        mass=MassMatrix(np.eye(3)),
        force=ForceField(dim=3, value=lambda t, x, v: np.array([0.0, 0.0, -10.0])),
    )
    init = GeneralizedState(0.0, np.array([0.5, 0.0]), np.array([-2.0, 0.0]))
    with pytest.raises(ChartError):
        integrate_second_kind(emb, sys, None, init, 2.0, IntegratorConfig(dt=1e-3))


def test_pushforward_second_order_chain_rule():
    rng = np.random.default_rng(23)
    emb = random_polynomial_chart(rng, m=3, r=2)
    t = 0.2
    y = rng.uniform(-0.3, 0.3, 2)
    w = rng.uniform(-0.5, 0.5, 2)
    a = rng.uniform(-0.5, 0.5, 2)
    x, v, xdd = pushforward_second_order(emb, t, y, w, a)
    # FD oracle: differentiate the pushforward velocity along the jet path
    h = 1e-5

    def vel(tt):
        dt = tt - t
        yy = y + dt * w + 0.5 * dt * dt * a
        ww = w + dt * a
        return emb.d_t(tt, yy) + emb.d_y(tt, yy) @ ww

    fd = (vel(t + h) - vel(t - h)) / (2 * h)
    assert np.abs(xdd - fd).max() < 1e-6


def test_covariance_residual_random_charts():
    rng = np.random.default_rng(24)
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(2, 5))
        r = int(rng.integers(1, m))
        emb = random_polynomial_chart(rng, m, r)
        mass = MassMatrix(np.diag(rng.uniform(0.5, 3.0, m)))
        t = float(rng.uniform(-0.5, 0.5))
        y = rng.uniform(-0.3, 0.3, r)
        w = rng.uniform(-1, 1, r)
        a = rng.uniform(-1, 1, r)
        worst = max(worst, covariance_residual(emb, mass, None, t, y, w, a))
    assert worst < 1e-10


def test_covariance_residual_with_force(pendulum):
    rng = np.random.default_rng(25)
    for _ in range(20):
        t = float(rng.uniform(0, 1))
        y = rng.uniform(-2, 2, 1)
        w = rng.uniform(-2, 2, 1)
        a = rng.uniform(-2, 2, 1)
        res = covariance_residual(
            pendulum.embedding, pendulum.system.mass, pendulum.system.force, t, y, w, a
        )
        assert res < 1e-12


def test_match_trajectories_pendulum(pendulum):
    first = integrate_first_kind(
        pendulum.system, pendulum.constraints, pendulum.initial, 2.0,
        IntegratorConfig(dt=1e-3),
    )
    second = integrate_second_kind(
        pendulum.embedding, pendulum.system, None, pendulum.initial_generalized, 2.0,
        IntegratorConfig(dt=1e-3),
    )
    rep = match_trajectories(first, pendulum.embedding, second, pendulum.system.mass)
    assert rep.sup_position < 1e-6
    assert rep.sup_velocity < 1e-5
    assert rep.max_inversion_residual < 1e-10


def test_match_rejects_short_chart_run(pendulum):
    first = integrate_first_kind(
        pendulum.system, pendulum.constraints, pendulum.initial, 1.0,
        IntegratorConfig(dt=1e-2),
    )
    second = integrate_second_kind(
        pendulum.embedding, pendulum.system, None, pendulum.initial_generalized, 0.5,
        IntegratorConfig(dt=1e-2),
    )
    with pytest.raises(ValueError):
        match_trajectories(first, pendulum.embedding, second)


def test_generalized_csv_layout(pendulum):
    traj = integrate_second_kind(
        pendulum.embedding, pendulum.system, None, pendulum.initial_generalized, 0.01,
        IntegratorConfig(dt=5e-3),
    )
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,y1,w1,Q1,covariance_residual"
    assert lines[1].endswith(",")  # covariance column empty when not supplied
