"""Mass matrices, force fields and the mechanical system container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .smooth import Array, State

SPD_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SpdVerdict:
    passed: bool
    symmetric: bool
    positive_definite: bool

    def __bool__(self) -> bool:
        return self.passed


def check_spd(M: Array, tol: float = SPD_SYMMETRY_TOL) -> SpdVerdict:
    """Verdict on symmetry (relative inf-norm) and positive definiteness.

    Positive definiteness is tested by attempting a Cholesky factorization
    of the symmetrized matrix.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("check_spd expects a square matrix")
    scale = np.abs(M).max()
    sym = np.abs(M - M.T).max() <= tol * max(scale, 1e-300)
    if scale == 0.0:
        sym = True
    try:
        np.linalg.cholesky(0.5 * (M + M.T))
        pd = True
    except np.linalg.LinAlgError:
        pd = False
    return SpdVerdict(passed=sym and pd, symmetric=sym, positive_definite=pd)


@dataclass(frozen=True)
class MassMatrix:
    """Constant symmetric positive definite mass matrix."""

    G: Array
    point_masses: Optional[tuple] = None

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        verdict = check_spd(G)
        if not verdict:
            raise ValueError(
                "mass matrix must be symmetric positive definite "
                f"(symmetric={verdict.symmetric}, pd={verdict.positive_definite})"
            )
        Ginv = np.linalg.inv(G)
        Ginv.setflags(write=False)
        object.__setattr__(self, "_Ginv", Ginv)

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    @property
    def inverse(self) -> Array:
        return self._Ginv

    def solve(self, rhs: Array) -> Array:
        return self._Ginv @ rhs


def build_point_mass_matrix(masses) -> MassMatrix:
    """diag(m1, m1, m1, ..., m_nu, m_nu, m_nu) for nu point masses in R^3."""
    masses = [float(m) for m in masses]
    if not masses:
        raise ValueError("need at least one mass")
    for i, m in enumerate(masses):
        if not (m > 0.0):
            raise ValueError(f"mass {i} must be positive (got {m})")
    diag = np.repeat(np.asarray(masses, dtype=float), 3)
    return MassMatrix(G=np.diag(diag), point_masses=tuple(masses))


@dataclass(frozen=True)
class ForceField:
    """Active-force covector f(t, x, v) with optional Jacobians and potential.

    ``potential`` declares the force as -grad V; the energy diagnostic then
    reports T + V instead of T alone.
    """

    dim: int
    value: Callable[[float, Array, Array], Array]
    jac_x: Optional[Callable[[float, Array, Array], Array]] = None
    jac_v: Optional[Callable[[float, Array, Array], Array]] = None
    potential: Optional[Callable[[float, Array], float]] = None

    def __call__(self, t: float, x: Array, v: Array) -> Array:
        out = np.asarray(self.value(t, x, v), dtype=float).reshape(-1)
        if out.size != self.dim:
            raise ValueError(
                f"force field declared dimension {self.dim}, got {out.size}"
            )
        return out

    @classmethod
    def zero(cls, dim: int) -> "ForceField":
        z = np.zeros(dim)
        return cls(
            dim=dim,
            value=lambda t, x, v: z,
            jac_x=lambda t, x, v: np.zeros((dim, dim)),
            jac_v=lambda t, x, v: np.zeros((dim, dim)),
            potential=lambda t, x: 0.0,
        )


@dataclass(frozen=True)
class MechanicalSystem:
    """Constant-mass system G xdd = f^T + N^T."""

    mass: MassMatrix
    force: ForceField = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.force is None:
            object.__setattr__(self, "force", ForceField.zero(self.mass.dim))
        if self.force.dim != self.mass.dim:
            raise ValueError(
                f"force dimension {self.force.dim} != mass dimension {self.mass.dim}"
            )

    @property
    def dim(self) -> int:
        return self.mass.dim


def energy(sys: MechanicalSystem, s: State):
    """Kinetic energy T = 1/2 v^T G v, plus V when the force is potential.

    Returns (T, V) with V None for non-potential forces.
    """
    T = 0.5 * float(s.v @ (sys.mass.G @ s.v))
    V = None
    if sys.force.potential is not None:
        V = float(sys.force.potential(s.t, s.x))
    return T, V
