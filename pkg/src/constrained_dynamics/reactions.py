"""Ideal constraint reactions in closed form, plus alternative realizations
and constraint-reparametrization machinery.

The multiplier row solves

    Lambda^T = -(phi_v G^-1 phi_v^T)^-1 (phi_t + phi_x v + phi_v G^-1 f^T)

and the reaction covector is N = Lambda phi_v.  The Gram matrix
phi_v G^-1 phi_v^T is symmetric positive definite whenever the constraint
Jacobian has full row rank, so the solve goes through Cholesky; a failed
factorization doubles as a regularity diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg

from .constraints import (
    ConstraintSet,
    RegularityError,
    VirtualBasis,
)
from .smooth import Array, SmoothMap, State, _fd_step
from .system import MechanicalSystem


@dataclass(frozen=True)
class ReactionResult:
    """Multipliers, reaction covector and the Gram matrix at one state."""

    Lambda: Array
    N: Array
    gram: Array
    state: State


def gram_matrix(cs: ConstraintSet, mass, s: State) -> Array:
    """phi_v G^-1 phi_v^T, the SPD kernel of the multiplier solve."""
    B = cs.phi.d_v(s.t, s.x, s.v)
    W = B @ mass.inverse
    return W @ B.T


def _chol_solve(gram: Array, rhs: Array, t: float) -> Array:
    n = gram.shape[0]
    if n == 1:
        if gram[0, 0] <= 0.0:
            raise RegularityError(
                f"singular constraint Gram matrix at t={t}", sigma_min=0.0, t=t
            )
        return rhs / gram[0, 0]
    try:
        c, low = scipy.linalg.cho_factor(gram, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise RegularityError(
            f"constraint Gram matrix not positive definite at t={t}: {exc}",
            sigma_min=0.0,
            t=t,
        ) from exc
    return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)


def multipliers(sys: MechanicalSystem, cs: ConstraintSet, s: State) -> Array:
    """Multiplier row Lambda; defined at any regular state, on-manifold or not."""
    if cs.is_empty:
        return np.zeros(0)
    t, x, v = s.t, s.x, s.v
    phi_t = cs.phi.d_t(t, x, v)
    phi_x = cs.phi.d_x(t, x, v)
    B = cs.phi.d_v(t, x, v)
    Ginv = sys.mass.inverse
    f = sys.force(t, x, v)
    W = B @ Ginv
    gram = W @ B.T
    rhs = phi_t + phi_x @ v + W @ f
    return -_chol_solve(gram, rhs, t)


def reaction(sys: MechanicalSystem, cs: ConstraintSet, s: State) -> ReactionResult:
    """Unique ideal reaction N = Lambda phi_v at a regular state."""
    if cs.is_empty:
        return ReactionResult(
            Lambda=np.zeros(0), N=np.zeros(sys.dim), gram=np.zeros((0, 0)), state=s
        )
    B = cs.phi.d_v(s.t, s.x, s.v)
    lam = multipliers(sys, cs, s)
    gram = B @ sys.mass.inverse @ B.T
    return ReactionResult(Lambda=lam, N=lam @ B, gram=gram, state=s)


@dataclass(frozen=True)
class Realization:
    """Alternative reaction directions: rows of S(t, x, v) replace phi_v.

    Valid wherever det(phi_v G^-1 S^T) != 0; with S = phi_v this reproduces
    the ideal reaction exactly.
    """

    S: SmoothMap


def reaction_with_realization(
    sys: MechanicalSystem, cs: ConstraintSet, real: Realization, s: State
) -> ReactionResult:
    t, x, v = s.t, s.x, s.v
    phi_t = cs.phi.d_t(t, x, v)
    phi_x = cs.phi.d_x(t, x, v)
    B = cs.phi.d_v(t, x, v)
    Smat = np.asarray(real.S.value(t, x, v), float).reshape(cs.n, cs.dim)
    Ginv = sys.mass.inverse
    f = sys.force(t, x, v)
    M = B @ Ginv @ Smat.T
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise RegularityError(
            f"singular realization matrix phi_v G^-1 S^T at t={t}",
            sigma_min=float(sv[-1]) if sv.size else 0.0,
            t=t,
        )
    rhs = phi_t + phi_x @ v + B @ Ginv @ f
    lam = -np.linalg.solve(M, rhs)
    return ReactionResult(Lambda=lam, N=lam @ Smat, gram=M, state=s)


@dataclass(frozen=True)
class Reparametrization:
    """Change of constraint representation psi = U(t, x, v, phi).

    ``value`` maps (t, x, v, z) to R^n with U(., 0) = 0 and U_z(., 0)
    invertible, so psi = 0 cuts out the same manifold as phi = 0.
    """

    n: int
    value: Callable[[float, Array, Array, Array], Array]
    jac_z: Callable[[float, Array, Array, Array], Array]
    jac_t: Optional[Callable] = None
    jac_x: Optional[Callable] = None
    jac_v: Optional[Callable] = None

    def __call__(self, t, x, v, z):
        return np.asarray(self.value(t, x, v, z), float).reshape(self.n)

    def d_z(self, t, x, v, z):
        return np.asarray(self.jac_z(t, x, v, z), float).reshape(self.n, self.n)

    def d_t(self, t, x, v, z):
        if self.jac_t is not None:
            return np.asarray(self.jac_t(t, x, v, z), float).reshape(self.n)
        h = _fd_step(t)
        return (self(t + h, x, v, z) - self(t - h, x, v, z)) / (2 * h)

    def _fd_slot(self, t, x, v, z, slot):
        base = x if slot == "x" else v
        cols = []
        for i in range(base.size):
            h = _fd_step(base[i])
            bh, bl = base.copy(), base.copy()
            bh[i] += h
            bl[i] -= h
            if slot == "x":
                cols.append((self(t, bh, v, z) - self(t, bl, v, z)) / (2 * h))
            else:
                cols.append((self(t, x, bh, z) - self(t, x, bl, z)) / (2 * h))
        return np.stack(cols, axis=1)

    def d_x(self, t, x, v, z):
        if self.jac_x is not None:
            return np.asarray(self.jac_x(t, x, v, z), float).reshape(self.n, x.size)
        return self._fd_slot(t, x, v, z, "x")

    def d_v(self, t, x, v, z):
        if self.jac_v is not None:
            return np.asarray(self.jac_v(t, x, v, z), float).reshape(self.n, v.size)
        return self._fd_slot(t, x, v, z, "v")

    @classmethod
    def identity(cls, n: int) -> "Reparametrization":
        return cls.componentwise(n, lambda z: z, lambda z: np.ones_like(z))

    @classmethod
    def componentwise(cls, n: int, fn, dfn) -> "Reparametrization":
        """U acting elementwise on z, independent of (t, x, v); fn(0) must be 0."""
        zero_v = lambda t, x, v, z: np.zeros(n)  # noqa: E731
        return cls(
            n=n,
            value=lambda t, x, v, z: np.asarray(fn(np.asarray(z, float)), float),
            jac_z=lambda t, x, v, z: np.diag(
                np.atleast_1d(np.asarray(dfn(np.asarray(z, float)), float))
            ),
            jac_t=zero_v,
            jac_x=lambda t, x, v, z: np.zeros((n, x.size)),
            jac_v=lambda t, x, v, z: np.zeros((n, v.size)),
        )

    @classmethod
    def linear(cls, M: Array) -> "Reparametrization":
        M = np.asarray(M, float)
        n = M.shape[0]
        if np.linalg.matrix_rank(M) < n:
            raise ValueError("linear mix matrix must be invertible")
        return cls(
            n=n,
            value=lambda t, x, v, z: M @ np.asarray(z, float),
            jac_z=lambda t, x, v, z: M,
            jac_t=lambda t, x, v, z: np.zeros(n),
            jac_x=lambda t, x, v, z: np.zeros((n, x.size)),
            jac_v=lambda t, x, v, z: np.zeros((n, v.size)),
        )


def reparametrize(cs: ConstraintSet, rep: Reparametrization) -> ConstraintSet:
    """The constraint set psi(t,x,v) = U(t,x,v, phi(t,x,v)) with chain-rule Jacobians."""
    if rep.n != cs.n:
        raise ValueError("reparametrization output count must equal constraint count")
    rng = np.random.default_rng(1)
    for _ in range(3):
        t = float(rng.uniform(-1, 1))
        x = rng.uniform(-1, 1, cs.dim)
        v = rng.uniform(-1, 1, cs.dim)
        z0 = np.zeros(cs.n)
        if np.abs(rep(t, x, v, z0)).max(initial=0.0) > 1e-10:
            raise ValueError("U(t, x, v, 0) must vanish")
        Uz = rep.d_z(t, x, v, z0)
        sv = np.linalg.svd(Uz, compute_uv=False)
        if sv.size and sv[-1] <= 1e-10 * max(1.0, sv[0]):
            raise ValueError("U_z(t, x, v, 0) must be invertible")

    phi = cs.phi

    def value(t, x, v):
        return rep(t, x, v, phi(t, x, v))

    def jac_t(t, x, v):
        z = phi(t, x, v)
        return rep.d_t(t, x, v, z) + rep.d_z(t, x, v, z) @ phi.d_t(t, x, v)

    def jac_x(t, x, v):
        z = phi(t, x, v)
        return rep.d_x(t, x, v, z) + rep.d_z(t, x, v, z) @ phi.d_x(t, x, v)

    def jac_v(t, x, v):
        z = phi(t, x, v)
        return rep.d_v(t, x, v, z) + rep.d_z(t, x, v, z) @ phi.d_v(t, x, v)

    psi = SmoothMap(dim=cs.n, value=value, jac_t=jac_t, jac_x=jac_x, jac_v=jac_v)
    return ConstraintSet(dim=cs.dim, n=cs.n, phi=psi, structure="general")


def invariance_report(
    sys: MechanicalSystem,
    cs: ConstraintSet,
    rep: Reparametrization,
    states: List[State],
    on_manifold_tol: float = 1e-10,
) -> float:
    """max ||N_phi - N_psi||_inf over on-manifold states.

    The reaction is representation-independent only on phi = 0, so states
    violating ||phi||_inf <= tol are rejected.
    """
    psi_set = reparametrize(cs, rep)
    worst = 0.0
    for s in states:
        resid = float(np.abs(cs.phi(s.t, s.x, s.v)).max(initial=0.0))
        if resid > on_manifold_tol:
            raise ValueError(
                f"state at t={s.t} is off-manifold (||phi||={resid:.3e} > {on_manifold_tol})"
            )
        N_phi = reaction(sys, cs, s).N
        N_psi = reaction(sys, psi_set, s).N
        worst = max(worst, float(np.abs(N_phi - N_psi).max(initial=0.0)))
    return worst


def virtual_work(res: ReactionResult, basis: VirtualBasis) -> float:
    """max over basis columns of |N . xi|; zero for ideal reactions."""
    s1, s2 = res.state, basis.state
    if s1.t != s2.t or not (np.array_equal(s1.x, s2.x) and np.array_equal(s1.v, s2.v)):
        raise ValueError("reaction and basis were computed at different states")
    if basis.Xi.shape[1] == 0:
        return 0.0
    return float(np.abs(res.N @ basis.Xi).max(initial=0.0))
