"""Smooth-map carriers with analytic Jacobians and a finite-difference fallback.

Every map the engine consumes (constraint functions, realizations,
reparametrizations, holonomic generators) is wrapped in one of the carrier
types here so that downstream code never cares whether a derivative was
supplied analytically or approximated numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Central-difference step: h = cbrt(eps) * max(1, |coordinate|), fixed so
# fallback Jacobians are reproducible bit-for-bit on one platform.
FD_BASE_STEP = float(np.cbrt(np.finfo(float).eps))

Array = np.ndarray


def _fd_step(coord: float) -> float:
    return FD_BASE_STEP * max(1.0, abs(coord))


@dataclass(frozen=True)
class State:
    """Point (t, x, xdot) of the extended phase space."""

    t: float
    x: Array
    v: Array

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.x.ndim != 1 or self.v.ndim != 1:
            raise ValueError("x and v must be 1-d vectors")
        if self.x.size != self.v.size:
            raise ValueError(
                f"x has length {self.x.size} but v has length {self.v.size}"
            )
        if self.x.size < 1:
            raise ValueError("configuration dimension must be >= 1")
        if not (np.isfinite(self.t) and np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise ValueError("state entries must be finite")

    @property
    def dim(self) -> int:
        return self.x.size


class EvaluationError(RuntimeError):
    """Raised when an evaluator fails inside a finite-difference stencil."""


@dataclass(frozen=True)
class SmoothMap:
    """Map (t, x, v) -> R^k with optional analytic partial derivatives.

    ``jac_t`` returns a k-vector, ``jac_x`` and ``jac_v`` return k-by-m
    matrices.  Missing derivatives fall back to central differences.
    """

    dim: int
    value: Callable[[float, Array, Array], Array]
    jac_t: Optional[Callable[[float, Array, Array], Array]] = None
    jac_x: Optional[Callable[[float, Array, Array], Array]] = None
    jac_v: Optional[Callable[[float, Array, Array], Array]] = None

    def __call__(self, t: float, x: Array, v: Array) -> Array:
        out = np.asarray(self.value(t, x, v), dtype=float).reshape(-1)
        if out.size != self.dim:
            raise ValueError(
                f"declared output dimension {self.dim}, evaluator returned {out.size}"
            )
        return out

    @property
    def provenance(self) -> str:
        have_all = all(j is not None for j in (self.jac_t, self.jac_x, self.jac_v))
        return "analytic" if have_all else "finite-difference"

    def d_t(self, t: float, x: Array, v: Array) -> Array:
        if self.jac_t is not None:
            return np.asarray(self.jac_t(t, x, v), dtype=float).reshape(self.dim)
        return fd_jacobian(self, State(t, x, v), "t").reshape(self.dim)

    def d_x(self, t: float, x: Array, v: Array) -> Array:
        if self.jac_x is not None:
            return np.asarray(self.jac_x(t, x, v), dtype=float).reshape(self.dim, x.size)
        return fd_jacobian(self, State(t, x, v), "x")

    def d_v(self, t: float, x: Array, v: Array) -> Array:
        if self.jac_v is not None:
            return np.asarray(self.jac_v(t, x, v), dtype=float).reshape(self.dim, v.size)
        return fd_jacobian(self, State(t, x, v), "v")


def fd_jacobian(m: SmoothMap, state: State, slot: str) -> Array:
    """Central-difference Jacobian of ``m`` at ``state`` w.r.t. one slot.

    ``slot`` is one of ``"t"``, ``"x"``, ``"v"``.  Returns a k-vector for the
    time slot, a k-by-m matrix otherwise.
    """
    t, x, v = state.t, state.x, state.v
    if slot == "t":
        h = _fd_step(t)
        try:
            hi = m(t + h, x, v)
            lo = m(t - h, x, v)
        except Exception as exc:  # noqa: BLE001 - re-raise with stencil context
            raise EvaluationError(f"evaluation failed at t = {t} +/- {h}: {exc}") from exc
        return (hi - lo) / (2.0 * h)
    if slot not in ("x", "v"):
        raise ValueError(f"unknown slot {slot!r}")
    base = x if slot == "x" else v
    cols = []
    for i in range(base.size):
        h = _fd_step(base[i])
        bumped_hi = base.copy()
        bumped_lo = base.copy()
        bumped_hi[i] += h
        bumped_lo[i] -= h
        args_hi = (t, bumped_hi, v) if slot == "x" else (t, x, bumped_hi)
        args_lo = (t, bumped_lo, v) if slot == "x" else (t, x, bumped_lo)
        try:
            hi = m(*args_hi)
            lo = m(*args_lo)
        except Exception as exc:  # noqa: BLE001
            raise EvaluationError(
                f"evaluation failed perturbing {slot}[{i}] by {h}: {exc}"
            ) from exc
        cols.append((hi - lo) / (2.0 * h))
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class ConfigurationMap:
    """Map (t, x) -> R^n with first and (optionally) second derivatives.

    Used for holonomic generators g(t, x), whose differential lift needs
    g_tt, g_tx and g_xx to give the lifted constraint analytic Jacobians.
    Second derivatives fall back to central differences of the first ones.
    """

    dim: int
    value: Callable[[float, Array], Array]
    d_t: Callable[[float, Array], Array]
    d_x: Callable[[float, Array], Array]
    d_tt: Optional[Callable[[float, Array], Array]] = None
    d_tx: Optional[Callable[[float, Array], Array]] = None
    d_xx: Optional[Callable[[float, Array], Array]] = None

    def __call__(self, t: float, x: Array) -> Array:
        return np.asarray(self.value(t, x), dtype=float).reshape(self.dim)

    def grad_t(self, t: float, x: Array) -> Array:
        return np.asarray(self.d_t(t, x), dtype=float).reshape(self.dim)

    def grad_x(self, t: float, x: Array) -> Array:
        return np.asarray(self.d_x(t, x), dtype=float).reshape(self.dim, x.size)

    def grad_tt(self, t: float, x: Array) -> Array:
        if self.d_tt is not None:
            return np.asarray(self.d_tt(t, x), dtype=float).reshape(self.dim)
        h = _fd_step(t)
        return (self.grad_t(t + h, x) - self.grad_t(t - h, x)) / (2.0 * h)

    def grad_tx(self, t: float, x: Array) -> Array:
        # d/dx of g_t, an n-by-m matrix
        if self.d_tx is not None:
            return np.asarray(self.d_tx(t, x), dtype=float).reshape(self.dim, x.size)
        cols = []
        for i in range(x.size):
            h = _fd_step(x[i])
            xh, xl = x.copy(), x.copy()
            xh[i] += h
            xl[i] -= h
            cols.append((self.grad_t(t, xh) - self.grad_t(t, xl)) / (2.0 * h))
        return np.stack(cols, axis=1)

    def grad_xx(self, t: float, x: Array) -> Array:
        # d/dx of g_x, an n-by-m-by-m tensor; [i, j, k] = d^2 g_i / dx_j dx_k
        if self.d_xx is not None:
            return np.asarray(self.d_xx(t, x), dtype=float).reshape(
                self.dim, x.size, x.size
            )
        slabs = []
        for k in range(x.size):
            h = _fd_step(x[k])
            xh, xl = x.copy(), x.copy()
            xh[k] += h
            xl[k] -= h
            slabs.append((self.grad_x(t, xh) - self.grad_x(t, xl)) / (2.0 * h))
        return np.stack(slabs, axis=2)
