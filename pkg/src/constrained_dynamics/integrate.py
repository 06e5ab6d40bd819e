"""First-kind dynamics: G xdd = f^T + N^T, integrated with per-sample
diagnostics (constraint residuals, general-equation-of-dynamics residual,
energy) and optional manifold projection for drift control.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .constraints import (
    ConstraintSet,
    RegularityError,
    check_regularity,
    virtual_basis,
)
from .reactions import (
    ReactionResult,
    Realization,
    _chol_solve,
    reaction,
    reaction_with_realization,
)
from .smooth import Array, State
from .system import MechanicalSystem, energy


class OffManifoldError(ValueError):
    """Initial data violates the declared constraints."""


class ProjectionError(RuntimeError):
    """Gauss-Newton projection failed to converge."""


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4-fixed"
    dt: float = 1e-3
    tolerance: float = 1e-9  # local error tolerance, adaptive method only
    projection: str = "off"  # off | positional | positional+velocity
    projection_tol: float = 1e-12
    projection_max_iter: int = 20

    def __post_init__(self):
        if self.method not in ("rk4-fixed", "rk45-adaptive"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.projection not in ("off", "positional", "positional+velocity"):
            raise ValueError(f"unknown projection mode {self.projection!r}")
        if self.dt <= 0 or self.tolerance <= 0 or self.projection_tol <= 0:
            raise ValueError("steps and tolerances must be positive")


@dataclass(frozen=True)
class Diagnostics:
    g_norm: Optional[float]
    phi_norm: float
    gde_residual: float
    energy: float


@dataclass(frozen=True)
class TrajectorySample:
    state: State
    reaction: ReactionResult
    diagnostics: Diagnostics


@dataclass
class Trajectory:
    """Time-ordered samples of a first-kind integration run."""

    samples: List[TrajectorySample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> Array:
        return np.array([s.state.t for s in self.samples])

    @property
    def positions(self) -> Array:
        return np.array([s.state.x for s in self.samples])

    @property
    def velocities(self) -> Array:
        return np.array([s.state.v for s in self.samples])

    def max_diag(self, name: str) -> float:
        vals = [getattr(s.diagnostics, name) for s in self.samples]
        vals = [v for v in vals if v is not None]
        return max(vals) if vals else 0.0

    def to_csv(self) -> str:
        """Deterministic CSV dump; 17 significant digits, '\\n' endings."""
        if not self.samples:
            return ""
        m = self.samples[0].state.dim
        n = self.samples[0].reaction.Lambda.size
        cols = (
            ["t"]
            + [f"x{i+1}" for i in range(m)]
            + [f"v{i+1}" for i in range(m)]
            + [f"lambda{i+1}" for i in range(n)]
            + [f"N{i+1}" for i in range(m)]
            + ["g_norm", "phi_norm", "gde_residual", "energy"]
        )
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        fmt = lambda z: "" if z is None else f"{z:.17g}"  # noqa: E731
        for smp in self.samples:
            st, rx, dg = smp.state, smp.reaction, smp.diagnostics
            row = (
                [fmt(st.t)]
                + [fmt(c) for c in st.x]
                + [fmt(c) for c in st.v]
                + [fmt(c) for c in rx.Lambda]
                + [fmt(c) for c in rx.N]
                + [fmt(dg.g_norm), fmt(dg.phi_norm), fmt(dg.gde_residual), fmt(dg.energy)]
            )
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def _accel_raw(sys: MechanicalSystem, cs: Optional[ConstraintSet], t, x, v) -> Array:
    # hot path: no State construction, no ReactionResult packaging
    f = sys.force(t, x, v)
    Ginv = sys.mass.inverse
    if cs is None or cs.is_empty:
        return Ginv @ f
    phi = cs.phi
    B = phi.d_v(t, x, v)
    W = B @ Ginv
    gram = W @ B.T
    rhs = phi.d_t(t, x, v) + phi.d_x(t, x, v) @ v + W @ f
    lam = -_chol_solve(gram, rhs, t)
    return Ginv @ (f + lam @ B)


def acceleration(sys: MechanicalSystem, cs: Optional[ConstraintSet], s: State) -> Array:
    """xdd = G^-1 (f^T + N^T); free dynamics when no constraints."""
    return _accel_raw(sys, cs, s.t, s.x, s.v)


def gde_residual(sys: MechanicalSystem, cs: ConstraintSet, s: State, xdd: Array) -> float:
    """max over virtual displacements xi of |(xdd^T G - f) xi|.

    Vanishes exactly along true solutions and, with the constraints
    satisfied, suffices for being one.
    """
    basis = virtual_basis(cs, s)
    row = xdd @ sys.mass.G - sys.force(s.t, s.x, s.v)
    if basis.Xi.shape[1] == 0:
        return 0.0
    return float(np.abs(row @ basis.Xi).max())


def project_to_manifold(
    s: State,
    cs: ConstraintSet,
    mass,
    tol: float = 1e-12,
    max_iter: int = 20,
    velocity: bool = True,
) -> State:
    """Pull a drifted state back to W = {g = 0, g_t + g_x v = 0}.

    Position: Gauss-Newton with the minimal correction in the G-metric.
    Velocity: G-orthogonal projection onto the affine set g_x v = -g_t.
    """
    if not cs.is_holonomic:
        raise ValueError("projection requires a holonomic constraint set")
    g = cs.generator
    Ginv = mass.inverse
    t, x = s.t, s.x.copy()
    for _ in range(max_iter):
        r = g(t, x)
        if np.abs(r).max(initial=0.0) <= tol:
            break
        J = g.grad_x(t, x)
        K = J @ Ginv @ J.T
        x = x - Ginv @ J.T @ np.linalg.solve(K, r)
    else:
        raise ProjectionError(
            f"position projection did not reach tol={tol} in {max_iter} iterations "
            f"(residual {np.abs(g(t, x)).max():.3e})"
        )
    v = s.v
    if velocity:
        J = g.grad_x(t, x)
        K = J @ Ginv @ J.T
        defect = g.grad_t(t, x) + J @ v
        v = v - Ginv @ J.T @ np.linalg.solve(K, defect)
    return State(t=t, x=x, v=v)


def _sample(sys, cs, s: State, xdd: Array) -> TrajectorySample:
    """Full per-step diagnostics; shares one SVD between the regularity
    check, the reaction solve and the virtual-basis residual."""
    t, x, v = s.t, s.x, s.v
    f = sys.force(t, x, v)
    T, V = energy(sys, s)
    E = T + (V or 0.0)
    if cs is None or cs.is_empty:
        rx = ReactionResult(
            Lambda=np.zeros(0), N=np.zeros(s.dim), gram=np.zeros((0, 0)), state=s
        )
        gde = float(np.abs(xdd @ sys.mass.G - f).max())
        diag = Diagnostics(g_norm=None, phi_norm=0.0, gde_residual=gde, energy=E)
        return TrajectorySample(state=s, reaction=rx, diagnostics=diag)

    phi = cs.phi
    B = phi.d_v(t, x, v)
    _, sv, Vt = np.linalg.svd(B, full_matrices=True)
    smin = float(sv[-1]) if sv.size else 0.0
    if smin <= 1e-8 * max(1.0, sv[0] if sv.size else 0.0):
        raise RegularityError(
            f"regularity lost at t={t}: sigma_min={smin:.3e}", sigma_min=smin, t=t
        )
    Ginv = sys.mass.inverse
    W = B @ Ginv
    gram = W @ B.T
    rhs = phi.d_t(t, x, v) + phi.d_x(t, x, v) @ v + W @ f
    lam = -_chol_solve(gram, rhs, t)
    rx = ReactionResult(Lambda=lam, N=lam @ B, gram=gram, state=s)

    phi_norm = float(np.abs(phi(t, x, v)).max(initial=0.0))
    g_norm = None
    if cs.is_holonomic:
        g_norm = float(np.abs(cs.generator(t, x)).max(initial=0.0))
    Xi = Vt[cs.n :, :].T
    row = xdd @ sys.mass.G - f
    gde = float(np.abs(row @ Xi).max()) if Xi.shape[1] else 0.0
    diag = Diagnostics(g_norm=g_norm, phi_norm=phi_norm, gde_residual=gde, energy=E)
    return TrajectorySample(state=s, reaction=rx, diagnostics=diag)


def _check_initial(cs: Optional[ConstraintSet], init: State, tol: float = 1e-8):
    if cs is None or cs.is_empty:
        return
    phi0 = float(np.abs(cs.phi(init.t, init.x, init.v)).max(initial=0.0))
    if phi0 > tol:
        raise OffManifoldError(f"initial phi residual {phi0:.6g} exceeds {tol}")
    if cs.is_holonomic:
        g0 = float(np.abs(cs.generator(init.t, init.x)).max(initial=0.0))
        if g0 > tol:
            raise OffManifoldError(f"initial g residual {g0:.6g} exceeds {tol}")


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def integrate_first_kind(
    sys: MechanicalSystem,
    cs: Optional[ConstraintSet],
    init: State,
    t_end: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    accel=None,
) -> Trajectory:
    """Integrate G xdd = f^T + N^T from ``init`` to ``t_end``.

    ``accel``, when given, replaces the ideal-reaction right-hand side
    (used for non-ideal realizations); diagnostics are still recorded
    against the declared constraint set.
    """
    _check_initial(cs, init)
    if accel is None:
        def accel(t, x, v):  # noqa: ANN001
            return _accel_raw(sys, cs, t, x, v)

    traj = Trajectory()

    def record(t, x, v):
        s = State(t, x, v)
        traj.samples.append(_sample(sys, cs, s, accel(t, x, v)))
        return s

    project = (
        cfg.projection != "off"
        and cs is not None
        and cs.is_holonomic
        and not cs.is_empty
    )

    def maybe_project(t, x, v):
        if not project:
            return x, v
        s = project_to_manifold(
            State(t, x, v),
            cs,
            sys.mass,
            tol=cfg.projection_tol,
            max_iter=cfg.projection_max_iter,
            velocity=cfg.projection == "positional+velocity",
        )
        return s.x, s.v

    t, x, v = init.t, init.x.copy(), init.v.copy()
    record(t, x, v)

    if cfg.method == "rk4-fixed":
        dt = cfg.dt
        while t < t_end - 1e-12 * max(1.0, abs(t_end)):
            h = min(dt, t_end - t)
            k1x, k1v = v, accel(t, x, v)
            x2, v2 = x + 0.5 * h * k1x, v + 0.5 * h * k1v
            k2x, k2v = v2, accel(t + 0.5 * h, x2, v2)
            x3, v3 = x + 0.5 * h * k2x, v + 0.5 * h * k2v
            k3x, k3v = v3, accel(t + 0.5 * h, x3, v3)
            x4, v4 = x + h * k3x, v + h * k3v
            k4x, k4v = v4, accel(t + h, x4, v4)
            x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            t = t + h
            x, v = maybe_project(t, x, v)
            record(t, x, v)
        return traj

    # rk45-adaptive (Dormand-Prince, local extrapolation)
    y = np.concatenate([x, v])
    m = x.size

    def rhs(tt, yy):
        return np.concatenate([yy[m:], accel(tt, yy[:m], yy[m:])])

    h = cfg.dt
    tol = cfg.tolerance
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        h = min(h, t_end - t)
        ks = [rhs(t, y)]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_DP_A[i], ks))
            ks.append(rhs(t + _DP_C[i] * h, yi))
        y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks))
        y4 = y + h * sum(b * k for b, k in zip(_DP_B4, ks))
        scale = tol * (1.0 + np.abs(y5).max())
        err = float(np.abs(y5 - y4).max()) / scale
        if err <= 1.0:
            t = t + h
            y = y5
            xx, vv = maybe_project(t, y[:m], y[m:])
            y = np.concatenate([xx, vv])
            record(t, y[:m], y[m:])
        factor = 0.9 * (err + 1e-16) ** (-0.2)
        h = h * min(5.0, max(0.2, factor))
        if h < 1e-14:
            raise RuntimeError(f"adaptive step collapsed at t={t}")
    return traj


def integrate_with_realization(
    sys: MechanicalSystem,
    cs: ConstraintSet,
    real: Realization,
    init: State,
    t_end: float,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> Trajectory:
    """First-kind run with a non-ideal realization S in place of phi_v."""

    def accel(t, x, v):
        s = State(t, x, v)
        res = reaction_with_realization(sys, cs, real, s)
        return sys.mass.solve(sys.force(t, x, v) + res.N)

    return integrate_first_kind(sys, cs, init, t_end, cfg, accel=accel)
