"""Generalized coordinates: embeddings u(t, y), the pullback Lagrangian,
second-kind equations, covariance of the Lagrangian derivative, and
first/second-kind trajectory matching.

The ambient Lagrangian is fixed to the kinetic energy T = 1/2 v^T G v with
constant G, so its Lagrangian derivative is simply (G xdd)^T.  The pullback
L(t, y, w) = T(t, u, u_t + u_y w) splits exactly into

    L = 1/2 w^T M2 w + b w + T0,
    M2 = u_y^T G u_y,  b = u_t^T G u_y,  T0 = 1/2 u_t^T G u_t,

with M2 symmetric positive definite wherever the chart is regular.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .integrate import IntegratorConfig, Trajectory
from .smooth import Array, State, _fd_step
from .system import ForceField, MassMatrix, MechanicalSystem, check_spd


class ChartError(RuntimeError):
    """Chart degeneration or domain exit during a generalized-coordinate run."""


@dataclass(frozen=True)
class GeneralizedState:
    t: float
    y: Array
    w: Array

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, float).reshape(-1))
        object.__setattr__(self, "w", np.asarray(self.w, float).reshape(-1))
        if self.y.size != self.w.size:
            raise ValueError("y and w must have equal length")


@dataclass(frozen=True)
class Embedding:
    """Chart u(t, y) : R x Y -> R^m with first and second derivatives.

    Second derivatives default to central differences of u_t and u_y;
    catalog charts supply them analytically.
    """

    dim: int  # m
    r: int
    u: Callable[[float, Array], Array]
    u_t: Callable[[float, Array], Array]
    u_y: Callable[[float, Array], Array]  # (m, r)
    u_tt: Optional[Callable[[float, Array], Array]] = None
    u_ty: Optional[Callable[[float, Array], Array]] = None  # (m, r)
    u_yy: Optional[Callable[[float, Array], Array]] = None  # (m, r, r)
    domain_lo: Optional[Array] = None
    domain_hi: Optional[Array] = None

    def value(self, t, y):
        return np.asarray(self.u(t, y), float).reshape(self.dim)

    def d_t(self, t, y):
        return np.asarray(self.u_t(t, y), float).reshape(self.dim)

    def d_y(self, t, y):
        return np.asarray(self.u_y(t, y), float).reshape(self.dim, self.r)

    def d_tt(self, t, y):
        if self.u_tt is not None:
            return np.asarray(self.u_tt(t, y), float).reshape(self.dim)
        h = _fd_step(t)
        return (self.d_t(t + h, y) - self.d_t(t - h, y)) / (2 * h)

    def d_ty(self, t, y):
        if self.u_ty is not None:
            return np.asarray(self.u_ty(t, y), float).reshape(self.dim, self.r)
        h = _fd_step(t)
        return (self.d_y(t + h, y) - self.d_y(t - h, y)) / (2 * h)

    def d_yy(self, t, y):
        if self.u_yy is not None:
            return np.asarray(self.u_yy(t, y), float).reshape(self.dim, self.r, self.r)
        slabs = []
        for k in range(self.r):
            h = _fd_step(y[k])
            yh, yl = y.copy(), y.copy()
            yh[k] += h
            yl[k] -= h
            slabs.append((self.d_y(t, yh) - self.d_y(t, yl)) / (2 * h))
        return np.stack(slabs, axis=2)

    def in_domain(self, y: Array) -> bool:
        if self.domain_lo is not None and np.any(y < self.domain_lo):
            return False
        if self.domain_hi is not None and np.any(y > self.domain_hi):
            return False
        return True


def pushforward_state(emb: Embedding, gs: GeneralizedState) -> State:
    """x = u(t, y), v = u_t + u_y w."""
    if not emb.in_domain(gs.y):
        raise ChartError(f"y={gs.y} outside the chart domain")
    x = emb.value(gs.t, gs.y)
    v = emb.d_t(gs.t, gs.y) + emb.d_y(gs.t, gs.y) @ gs.w
    return State(t=gs.t, x=x, v=v)


@dataclass(frozen=True)
class PullbackLagrangian:
    """L(t, y, w) = kinetic energy pulled back through an embedding."""

    emb: Embedding
    mass: MassMatrix

    def decompose(self, t: float, y: Array) -> Tuple[Array, Array, float]:
        """(M2, b, T0) of the exact quadratic/linear/constant split in w."""
        G = self.mass.G
        Ut = self.emb.d_t(t, y)
        Uy = self.emb.d_y(t, y)
        M2 = Uy.T @ G @ Uy
        b = Ut @ G @ Uy
        T0 = 0.5 * float(Ut @ G @ Ut)
        return M2, b, T0

    def value(self, t: float, y: Array, w: Array) -> float:
        M2, b, T0 = self.decompose(t, y)
        return 0.5 * float(w @ M2 @ w) + float(b @ w) + T0

    def _derivative_pieces(self, t: float, y: Array):
        """t- and y-derivatives of (M2, b, T0) from embedding second derivatives."""
        G = self.mass.G
        emb = self.emb
        Ut = emb.d_t(t, y)
        Uy = emb.d_y(t, y)
        Utt = emb.d_tt(t, y)
        Uty = emb.d_ty(t, y)
        Uyy = emb.d_yy(t, y)
        r = emb.r
        M2 = Uy.T @ G @ Uy
        dM2_dt = Uty.T @ G @ Uy + Uy.T @ G @ Uty
        dM2_dy = np.empty((r, r, r))
        db_dy = np.empty((r, r))
        dT0_dy = np.empty(r)
        GUy = G @ Uy
        GUt = G @ Ut
        for k in range(r):
            Uyk = Uyy[:, :, k]  # d u_y / d y^k, (m, r)
            dM2_dy[k] = Uyk.T @ GUy + GUy.T @ Uyk
            db_dy[k] = Uty[:, k] @ GUy + Ut @ G @ Uyk
            dT0_dy[k] = float(Ut @ G @ Uty[:, k])
        db_dt = Utt @ GUy + Ut @ G @ Uty
        return M2, dM2_dt, dM2_dy, db_dt, db_dy, dT0_dy


def decompose_T(lag: PullbackLagrangian, t: float, y) -> Tuple[Array, Array, float]:
    """(M2, b, T0); raises ChartError when M2 fails the SPD check."""
    y = np.asarray(y, float).reshape(-1)
    M2, b, T0 = lag.decompose(t, y)
    verdict = check_spd(M2, tol=1e-10)
    sv = np.linalg.svd(M2, compute_uv=False)
    if not verdict or (sv.size and sv[-1] <= 1e-10 * max(1.0, sv[0])):
        raise ChartError(f"chart metric M2 degenerate at t={t}, y={y}")
    return M2, b, T0


def lagrangian_derivative_from_pieces(
    M2: Array,
    dM2_dt: Array,
    dM2_dy: Array,
    db_dt: Array,
    db_dy: Array,
    dT0_dy: Array,
    w: Array,
    a: Array,
) -> Array:
    """[L] for any Lagrangian of the form 1/2 w^T M2 w + b w + T0.

    ``dM2_dy[k]`` is the y^k-derivative of M2, ``db_dy[k]`` the y^k-derivative
    of the row b.  M2 may be singular (e.g. a pure total derivative, M2 = 0).
    """
    r = w.size
    M2dot = dM2_dt + np.einsum("k,kij->ij", w, dM2_dy)
    bdot = db_dt + w @ db_dy
    dLw_dt = M2 @ a + M2dot @ w + bdot
    L_y = np.array(
        [0.5 * float(w @ dM2_dy[k] @ w) + float(db_dy[k] @ w) + dT0_dy[k] for k in range(r)]
    )
    return dLw_dt - L_y


def lagrangian_derivative(lag: PullbackLagrangian, t: float, y, w, a) -> Array:
    """Row [L] = d/dt(dL/dw) - dL/dy at the second-order jet (t, y, w, a)."""
    y = np.asarray(y, float).reshape(-1)
    w = np.asarray(w, float).reshape(-1)
    a = np.asarray(a, float).reshape(-1)
    return lagrangian_derivative_from_pieces(*lag._derivative_pieces(t, y), w, a)


@dataclass(frozen=True)
class GeneralizedForce:
    r: int
    Q: Callable[[float, Array, Array], Array]

    def __call__(self, t, y, w):
        return np.asarray(self.Q(t, y, w), float).reshape(self.r)

    @classmethod
    def zero(cls, r: int) -> "GeneralizedForce":
        return cls(r=r, Q=lambda t, y, w: np.zeros(r))


def pullback_lagrangian(emb: Embedding, mass: MassMatrix) -> PullbackLagrangian:
    return PullbackLagrangian(emb=emb, mass=mass)


def generalized_forces(emb: Embedding, f: ForceField) -> GeneralizedForce:
    """Q(t, y, w) = f(t, u, u_t + u_y w) u_y, the chart pullback of the force row."""

    def Q(t, y, w):
        y = np.asarray(y, float).reshape(-1)
        w = np.asarray(w, float).reshape(-1)
        Uy = emb.d_y(t, y)
        x = emb.value(t, y)
        v = emb.d_t(t, y) + Uy @ w
        return f(t, x, v) @ Uy

    return GeneralizedForce(r=emb.r, Q=Q)


@dataclass(frozen=True)
class GeneralizedSample:
    t: float
    y: Array
    w: Array
    a: Array
    Q: Array


@dataclass
class GeneralizedTrajectory:
    emb: Embedding
    samples: List[GeneralizedSample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> Array:
        return np.array([s.t for s in self.samples])

    def to_csv(self, covariance: Optional[List[float]] = None) -> str:
        if not self.samples:
            return ""
        r = self.samples[0].y.size
        cols = (
            ["t"]
            + [f"y{i+1}" for i in range(r)]
            + [f"w{i+1}" for i in range(r)]
            + [f"Q{i+1}" for i in range(r)]
            + ["covariance_residual"]
        )
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        fmt = lambda z: "" if z is None else f"{z:.17g}"  # noqa: E731
        for i, s in enumerate(self.samples):
            cov = covariance[i] if covariance is not None else None
            row = (
                [fmt(s.t)]
                + [fmt(c) for c in s.y]
                + [fmt(c) for c in s.w]
                + [fmt(c) for c in s.Q]
                + [fmt(cov)]
            )
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def second_kind_acceleration(
    lag: PullbackLagrangian, Q: GeneralizedForce, t: float, y: Array, w: Array
) -> Array:
    """ydd solving [L] = Q, via the normal form M2 ydd = Q^T - (rest)."""
    M2, dM2_dt, dM2_dy, db_dt, db_dy, dT0_dy = lag._derivative_pieces(t, y)
    r = y.size
    sv = np.linalg.svd(M2, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise ChartError(f"chart metric M2 degenerate at t={t}, y={y}")
    M2dot = dM2_dt + np.einsum("k,kij->ij", w, dM2_dy)
    bdot = db_dt + w @ db_dy
    L_y = np.array(
        [0.5 * float(w @ dM2_dy[k] @ w) + float(db_dy[k] @ w) + dT0_dy[k] for k in range(r)]
    )
    rhs = Q(t, y, w) - M2dot @ w - bdot + L_y
    try:
        c = np.linalg.cholesky(M2)
    except np.linalg.LinAlgError as exc:
        raise ChartError(f"chart metric M2 not SPD at t={t}, y={y}") from exc
    z = np.linalg.solve(c, rhs)
    return np.linalg.solve(c.T, z)


def integrate_second_kind(
    emb: Embedding,
    sys: MechanicalSystem,
    Q: Optional[GeneralizedForce],
    init: GeneralizedState,
    t_end: float,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> GeneralizedTrajectory:
    """Integrate the second-kind equations [L] = Q on the chart.

    ``Q=None`` derives the generalized forces from the system's force field.
    Aborts with :class:`ChartError` when the solution leaves the chart
    domain or the metric degenerates.
    """
    if cfg.method != "rk4-fixed":
        raise NotImplementedError("second-kind integration uses the rk4-fixed method")
    lag = pullback_lagrangian(emb, sys.mass)
    if Q is None:
        Q = generalized_forces(emb, sys.force)

    def accel(t, y, w):
        if not emb.in_domain(y):
            raise ChartError(f"trajectory left the chart domain at t={t}, y={y}")
        return second_kind_acceleration(lag, Q, t, y, w)

    traj = GeneralizedTrajectory(emb=emb)

    def record(t, y, w):
        a = accel(t, y, w)
        traj.samples.append(GeneralizedSample(t=t, y=y, w=w, a=a, Q=Q(t, y, w)))

    t, y, w = init.t, init.y.copy(), init.w.copy()
    record(t, y, w)
    dt = cfg.dt
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        h = min(dt, t_end - t)
        k1y, k1w = w, accel(t, y, w)
        y2, w2 = y + 0.5 * h * k1y, w + 0.5 * h * k1w
        k2y, k2w = w2, accel(t + 0.5 * h, y2, w2)
        y3, w3 = y + 0.5 * h * k2y, w + 0.5 * h * k2w
        k3y, k3w = w3, accel(t + 0.5 * h, y3, w3)
        y4, w4 = y + h * k3y, w + h * k3w
        k4y, k4w = w4, accel(t + h, y4, w4)
        y = y + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        w = w + (h / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
        t = t + h
        record(t, y, w)
    return traj


def pushforward_second_order(emb: Embedding, t: float, y: Array, w: Array, a: Array):
    """(x, v, xdd) of the chart jet (t, y, w, a) in ambient coordinates."""
    Uy = emb.d_y(t, y)
    x = emb.value(t, y)
    v = emb.d_t(t, y) + Uy @ w
    xdd = (
        emb.d_tt(t, y)
        + 2.0 * emb.d_ty(t, y) @ w
        + np.einsum("pij,i,j->p", emb.d_yy(t, y), w, w)
        + Uy @ a
    )
    return x, v, xdd


def covariance_residual(
    emb: Embedding,
    mass: MassMatrix,
    f: Optional[ForceField],
    t: float,
    y,
    w,
    a,
) -> float:
    """inf-norm defect of the covariance identity at a second-order jet.

    The ambient Lagrangian derivative (G xdd)^T is pushed through u_y and
    compared against the chart-side [L] computed from the decomposition
    derivatives; with a force field both sides subtract their force rows.
    """
    y = np.asarray(y, float).reshape(-1)
    w = np.asarray(w, float).reshape(-1)
    a = np.asarray(a, float).reshape(-1)
    x, v, xdd = pushforward_second_order(emb, t, y, w, a)
    Uy = emb.d_y(t, y)
    ambient_row = xdd @ mass.G
    if f is not None:
        ambient_row = ambient_row - f(t, x, v)
    lag = PullbackLagrangian(emb=emb, mass=mass)
    chart_row = lagrangian_derivative(lag, t, y, w, a)
    if f is not None:
        chart_row = chart_row - generalized_forces(emb, f)(t, y, w)
    return float(np.abs(ambient_row @ Uy - chart_row).max())


def _chart_invert(
    emb: Embedding, mass: MassMatrix, t: float, x: Array, y0: Array,
    tol: float = 1e-12, max_iter: int = 20,
) -> Tuple[Array, float]:
    """Solve u(t, y) = x by G-weighted Gauss-Newton; returns (y, residual)."""
    y = y0.copy()
    G = mass.G
    for _ in range(max_iter):
        r = emb.value(t, y) - x
        if np.abs(r).max() <= tol:
            break
        J = emb.d_y(t, y)
        JG = J.T @ G
        y = y - np.linalg.solve(JG @ J, JG @ r)
    resid = float(np.abs(emb.value(t, y) - x).max())
    if resid > 1e-6:
        raise ChartError(
            f"chart inversion diverged at t={t} (residual {resid:.3e}); "
            "trajectory left the chart"
        )
    return y, resid


@dataclass(frozen=True)
class MatchReport:
    sup_position: float
    sup_velocity: float
    max_inversion_residual: float


def match_trajectories(
    traj_x: Trajectory,
    emb: Embedding,
    traj_y: GeneralizedTrajectory,
    mass: Optional[MassMatrix] = None,
) -> MatchReport:
    """Compare a first-kind run against a second-kind run pushed through the chart.

    The first-kind grid is authoritative; (y, w) are resampled onto it by
    cubic Hermite interpolation.  Also inverts the chart per sample
    (Gauss-Newton, previous sample as warm start) to report u(t,y)=x
    solvability residuals.
    """
    if mass is None:
        mass = MassMatrix(np.eye(emb.dim))
    ty = traj_y.times
    Y = np.array([s.y for s in traj_y.samples])
    W = np.array([s.w for s in traj_y.samples])
    y_spline = CubicHermiteSpline(ty, Y, W, axis=0)
    w_spline = y_spline.derivative()

    times = traj_x.times
    if times[0] < ty[0] - 1e-12 or times[-1] > ty[-1] + 1e-12:
        raise ValueError("first-kind grid extends beyond the second-kind run")
    Ys = np.atleast_2d(y_spline(times))
    Ws = np.atleast_2d(w_spline(times))

    sup_x = 0.0
    sup_v = 0.0
    max_inv = 0.0
    y_warm = traj_y.samples[0].y.copy()
    for i, smp in enumerate(traj_x.samples):
        t = smp.state.t
        y = Ys[i]
        w = Ws[i]
        x_pred = emb.value(t, y)
        v_pred = emb.d_t(t, y) + emb.d_y(t, y) @ w
        sup_x = max(sup_x, float(np.abs(smp.state.x - x_pred).max()))
        sup_v = max(sup_v, float(np.abs(smp.state.v - v_pred).max()))
        y_warm, resid = _chart_invert(emb, mass, t, smp.state.x, y_warm)
        max_inv = max(max_inv, resid)
    return MatchReport(sup_position=sup_x, sup_velocity=sup_v, max_inversion_residual=max_inv)


def random_polynomial_chart(rng: np.random.Generator, m: int, r: int) -> Embedding:
    """Random degree-<=3 polynomial chart with analytic derivatives.

    u_p(t, y) = a + c1 t + c2 t^2 + B y + t D y + 1/2 y^T Q_p y + k_p (w_p . y)^3
    with coefficients scaled so rank u_y = r holds with overwhelming
    probability near the origin.
    """
    a0 = rng.uniform(-1, 1, m)
    c1 = rng.uniform(-1, 1, m)
    c2 = 0.5 * rng.uniform(-1, 1, m)
    B = rng.uniform(-1, 1, (m, r)) + np.eye(m, r) * 2.0
    D = 0.3 * rng.uniform(-1, 1, (m, r))
    Qp = 0.3 * rng.uniform(-1, 1, (m, r, r))
    Qp = 0.5 * (Qp + np.transpose(Qp, (0, 2, 1)))
    kp = 0.1 * rng.uniform(-1, 1, m)
    wp = rng.uniform(-1, 1, (m, r))

    def u(t, y):
        lin = wp @ y
        return (
            a0
            + c1 * t
            + c2 * t * t
            + B @ y
            + t * (D @ y)
            + 0.5 * np.einsum("pij,i,j->p", Qp, y, y)
            + kp * lin**3
        )

    def u_t(t, y):
        return c1 + 2.0 * c2 * t + D @ y

    def u_y(t, y):
        lin = wp @ y
        return B + t * D + np.einsum("pij,j->pi", Qp, y) + 3.0 * (kp * lin**2)[:, None] * wp

    def u_tt(t, y):
        return 2.0 * c2

    def u_ty(t, y):
        return D

    def u_yy(t, y):
        lin = wp @ y
        cubic = 6.0 * (kp * lin)[:, None, None] * np.einsum("pi,pj->pij", wp, wp)
        return Qp + cubic

    return Embedding(
        dim=m, r=r, u=u, u_t=u_t, u_y=u_y, u_tt=u_tt, u_ty=u_ty, u_yy=u_yy
    )
