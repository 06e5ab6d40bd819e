"""Scenario catalog and the JSON scenario-document format.

Forces, constraints and embeddings are selected from small catalogs with
analytic derivatives everywhere, so desk-scale checks never lean on the
finite-difference fallback.  A scenario document is plain JSON; parsing
validates dimensions and on-manifold initial data and reports *all*
failures at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .constraints import ConstraintSet, lift_holonomic, virtual_basis
from .generalized import Embedding, GeneralizedState, pushforward_state
from .integrate import IntegratorConfig
from .smooth import ConfigurationMap, State
from .system import ForceField, MassMatrix, MechanicalSystem, build_point_mass_matrix

CATALOG_NAMES = ("pendulum", "spherical-pendulum", "rotating-wire-bead", "knife-edge")

DEFAULT_CHECKS = [
    "first-integral",
    "virtual-work",
    "gde-residual",
    "reparametrization",
    "covariance",
    "energy",
]


class ScenarioError(ValueError):
    """Scenario document failed validation; carries every failure found."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario: " + "; ".join(self.problems))


# ---------------------------------------------------------------------------
# force catalog

def _make_force(doc: Dict, mass: MassMatrix) -> ForceField:
    kind = doc.get("type", "none")
    m = mass.dim
    if kind == "none":
        return ForceField.zero(m)
    if kind == "uniform-gravity":
        g0 = float(doc["g0"])
        axis = int(doc["axis"])
        e = np.zeros(m)
        e[axis] = 1.0
        w = mass.G @ e  # per-coordinate weights m_i g0
        fvec = -g0 * w
        return ForceField(
            dim=m,
            value=lambda t, x, v: fvec,
            jac_x=lambda t, x, v: np.zeros((m, m)),
            jac_v=lambda t, x, v: np.zeros((m, m)),
            potential=lambda t, x: g0 * float(w @ x),
        )
    if kind == "linear-spring":
        k = float(doc["k"])
        anchor = np.asarray(doc.get("anchor", np.zeros(m)), float)
        return ForceField(
            dim=m,
            value=lambda t, x, v: -k * (x - anchor),
            jac_x=lambda t, x, v: -k * np.eye(m),
            jac_v=lambda t, x, v: np.zeros((m, m)),
            potential=lambda t, x: 0.5 * k * float((x - anchor) @ (x - anchor)),
        )
    raise ScenarioError([f"unknown force type {kind!r}"])


# ---------------------------------------------------------------------------
# constraint catalog

def sphere_generator(radius: float, m: int) -> ConfigurationMap:
    r2 = radius * radius
    return ConfigurationMap(
        dim=1,
        value=lambda t, x: np.array([0.5 * (x @ x - r2)]),
        d_t=lambda t, x: np.zeros(1),
        d_x=lambda t, x: x.reshape(1, m),
        d_tt=lambda t, x: np.zeros(1),
        d_tx=lambda t, x: np.zeros((1, m)),
        d_xx=lambda t, x: np.eye(m).reshape(1, m, m),
    )


def rotating_line_generator(omega: float) -> ConfigurationMap:
    w = omega

    def val(t, x):
        return np.array([-x[0] * np.sin(w * t) + x[1] * np.cos(w * t)])

    def d_t(t, x):
        return np.array([-w * (x[0] * np.cos(w * t) + x[1] * np.sin(w * t))])

    def d_x(t, x):
        return np.array([[-np.sin(w * t), np.cos(w * t)]])

    def d_tt(t, x):
        return np.array([w * w * (x[0] * np.sin(w * t) - x[1] * np.cos(w * t))])

    def d_tx(t, x):
        return np.array([[-w * np.cos(w * t), -w * np.sin(w * t)]])

    return ConfigurationMap(
        dim=1, value=val, d_t=d_t, d_x=d_x, d_tt=d_tt, d_tx=d_tx,
        d_xx=lambda t, x: np.zeros((1, 2, 2)),
    )


def knife_edge_constraints() -> ConstraintSet:
    """phi = vx sin(theta) - vy cos(theta) on (x, y, theta); nonholonomic."""

    def A(t, x):
        return np.array([[np.sin(x[2]), -np.cos(x[2]), 0.0]])

    def jac_t(t, x, v):
        return np.zeros(1)

    def jac_x(t, x, v):
        return np.array([[0.0, 0.0, v[0] * np.cos(x[2]) + v[1] * np.sin(x[2])]])

    return ConstraintSet.affine(
        dim=3, a=lambda t, x: np.zeros(1), A=A, jac_t=jac_t, jac_x=jac_x, n=1
    )


def _make_constraints(doc: Optional[Dict], m: int) -> Optional[ConstraintSet]:
    if doc is None or doc.get("type", "none") == "none":
        return None
    kind = doc["type"]
    if kind == "sphere":
        return lift_holonomic(sphere_generator(float(doc.get("radius", 1.0)), m), m)
    if kind == "rotating-line":
        if m != 2:
            raise ScenarioError(["rotating-line constraint needs m = 2"])
        return lift_holonomic(rotating_line_generator(float(doc.get("omega", 1.0))), 2)
    if kind == "knife-edge":
        if m != 3:
            raise ScenarioError(["knife-edge constraint needs m = 3 (x, y, theta)"])
        return knife_edge_constraints()
    raise ScenarioError([f"unknown constraint type {kind!r}"])


# ---------------------------------------------------------------------------
# embedding catalog

def circle_embedding(radius: float) -> Embedding:
    R = radius
    return Embedding(
        dim=2,
        r=1,
        u=lambda t, y: R * np.array([np.sin(y[0]), -np.cos(y[0])]),
        u_t=lambda t, y: np.zeros(2),
        u_y=lambda t, y: R * np.array([[np.cos(y[0])], [np.sin(y[0])]]),
        u_tt=lambda t, y: np.zeros(2),
        u_ty=lambda t, y: np.zeros((2, 1)),
        u_yy=lambda t, y: R * np.array([[[-np.sin(y[0])]], [[np.cos(y[0])]]]),
    )


def sphere_polar_embedding(radius: float, pole_margin: float = 0.02) -> Embedding:
    R = radius

    def u(t, y):
        th, ph = y
        return R * np.array(
            [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), -np.cos(th)]
        )

    def u_y(t, y):
        th, ph = y
        return R * np.array(
            [
                [np.cos(th) * np.cos(ph), -np.sin(th) * np.sin(ph)],
                [np.cos(th) * np.sin(ph), np.sin(th) * np.cos(ph)],
                [np.sin(th), 0.0],
            ]
        )

    def u_yy(t, y):
        th, ph = y
        u_thth = R * np.array([-np.sin(th) * np.cos(ph), -np.sin(th) * np.sin(ph), np.cos(th)])
        u_thph = R * np.array([-np.cos(th) * np.sin(ph), np.cos(th) * np.cos(ph), 0.0])
        u_phph = R * np.array([-np.sin(th) * np.cos(ph), -np.sin(th) * np.sin(ph), 0.0])
        out = np.empty((3, 2, 2))
        out[:, 0, 0] = u_thth
        out[:, 0, 1] = u_thph
        out[:, 1, 0] = u_thph
        out[:, 1, 1] = u_phph
        return out

    return Embedding(
        dim=3,
        r=2,
        u=u,
        u_t=lambda t, y: np.zeros(3),
        u_y=u_y,
        u_tt=lambda t, y: np.zeros(3),
        u_ty=lambda t, y: np.zeros((3, 2)),
        u_yy=u_yy,
        domain_lo=np.array([pole_margin, -np.inf]),
        domain_hi=np.array([np.pi - pole_margin, np.inf]),
    )


def rotating_line_embedding(omega: float) -> Embedding:
    w = omega

    def u(t, y):
        return y[0] * np.array([np.cos(w * t), np.sin(w * t)])

    def u_t(t, y):
        return y[0] * w * np.array([-np.sin(w * t), np.cos(w * t)])

    def u_y(t, y):
        return np.array([[np.cos(w * t)], [np.sin(w * t)]])

    def u_tt(t, y):
        return -y[0] * w * w * np.array([np.cos(w * t), np.sin(w * t)])

    def u_ty(t, y):
        return w * np.array([[-np.sin(w * t)], [np.cos(w * t)]])

    return Embedding(
        dim=2, r=1, u=u, u_t=u_t, u_y=u_y, u_tt=u_tt, u_ty=u_ty,
        u_yy=lambda t, y: np.zeros((2, 1, 1)),
    )


def _make_embedding(doc: Optional[Dict]) -> Optional[Embedding]:
    if doc is None or doc.get("type", "none") == "none":
        return None
    kind = doc["type"]
    if kind == "circle":
        return circle_embedding(float(doc.get("radius", 1.0)))
    if kind == "sphere-polar":
        return sphere_polar_embedding(float(doc.get("radius", 1.0)))
    if kind == "rotating-line":
        return rotating_line_embedding(float(doc.get("omega", 1.0)))
    raise ScenarioError([f"unknown embedding type {kind!r}"])


# ---------------------------------------------------------------------------
# the scenario object

@dataclass
class Scenario:
    name: str
    system: MechanicalSystem
    constraints: Optional[ConstraintSet]
    embedding: Optional[Embedding]
    initial: State
    initial_generalized: Optional[GeneralizedState]
    integrator: IntegratorConfig
    checks: List[str]
    document: Dict = field(default_factory=dict)
    sample_y_lo: Optional[np.ndarray] = None
    sample_y_hi: Optional[np.ndarray] = None
    sample_t_hi: float = 3.0

    @property
    def dim(self) -> int:
        return self.system.dim

    def sample_states(self, rng: np.random.Generator, count: int) -> List[State]:
        """Random on-manifold regular states for property checks."""
        out: List[State] = []
        if self.embedding is not None:
            emb = self.embedding
            lo = self.sample_y_lo if self.sample_y_lo is not None else -np.pi * np.ones(emb.r)
            hi = self.sample_y_hi if self.sample_y_hi is not None else np.pi * np.ones(emb.r)
            for _ in range(count):
                t = float(rng.uniform(0.0, self.sample_t_hi))
                y = rng.uniform(lo, hi)
                w = rng.uniform(-2.0, 2.0, emb.r)
                out.append(pushforward_state(emb, GeneralizedState(t=t, y=y, w=w)))
            return out
        if self.constraints is None:
            for _ in range(count):
                t = float(rng.uniform(0.0, self.sample_t_hi))
                out.append(
                    State(t, rng.uniform(-2, 2, self.dim), rng.uniform(-2, 2, self.dim))
                )
            return out
        cs = self.constraints
        if cs.structure not in ("affine", "holonomic"):
            raise ValueError("cannot sample on-manifold states for a general constraint set")
        for _ in range(count):
            t = float(rng.uniform(0.0, self.sample_t_hi))
            x = rng.uniform(-2, 2, self.dim)
            a = np.asarray(cs.affine_a(t, x), float).reshape(cs.n)
            A = np.asarray(cs.affine_A(t, x), float).reshape(cs.n, self.dim)
            v_part, *_ = np.linalg.lstsq(A, -a, rcond=None)
            basis = virtual_basis(cs, State(t, x, v_part))
            v = v_part + basis.Xi @ rng.uniform(-2, 2, basis.Xi.shape[1])
            out.append(State(t, x, v))
        return out


# ---------------------------------------------------------------------------
# document parsing

def _integrator_from_doc(doc: Dict) -> IntegratorConfig:
    return IntegratorConfig(
        method=doc.get("method", "rk4-fixed"),
        dt=float(doc.get("dt", 1e-3)),
        tolerance=float(doc.get("tolerance", 1e-9)),
        projection=doc.get("projection", "off"),
        projection_tol=float(doc.get("projection_tol", 1e-12)),
        projection_max_iter=int(doc.get("projection_max_iter", 20)),
    )


def scenario_from_document(doc: Dict) -> Scenario:
    problems: List[str] = []

    mass_doc = doc.get("mass")
    mass = None
    if mass_doc is None:
        problems.append("missing 'mass'")
    else:
        try:
            if "point_masses" in mass_doc:
                mass = build_point_mass_matrix(mass_doc["point_masses"])
            elif "matrix" in mass_doc:
                mass = MassMatrix(np.asarray(mass_doc["matrix"], float))
            else:
                problems.append("'mass' needs 'point_masses' or 'matrix'")
        except ValueError as exc:
            problems.append(str(exc))
    if mass is None:
        raise ScenarioError(problems)
    m = mass.dim

    try:
        force = _make_force(doc.get("force", {"type": "none"}), mass)
    except (ScenarioError, KeyError) as exc:
        problems.append(f"force: {exc}")
        force = ForceField.zero(m)
    system = MechanicalSystem(mass=mass, force=force)

    cs = None
    try:
        cs = _make_constraints(doc.get("constraint"), m)
    except ScenarioError as exc:
        problems.extend(f"constraint: {p}" for p in exc.problems)

    emb = None
    try:
        emb = _make_embedding(doc.get("embedding"))
        if emb is not None and emb.dim != m:
            problems.append(
                f"embedding ambient dimension {emb.dim} != system dimension {m}"
            )
            emb = None
    except ScenarioError as exc:
        problems.extend(f"embedding: {p}" for p in exc.problems)

    init = None
    init_gen = None
    init_doc = doc.get("initial")
    if init_doc is None:
        problems.append("missing 'initial'")
    elif "y" in init_doc:
        if emb is None:
            problems.append("generalized initial data given but no embedding declared")
        else:
            y = np.asarray(init_doc["y"], float)
            w = np.asarray(init_doc.get("w", np.zeros_like(y)), float)
            if y.size != emb.r:
                problems.append(f"initial y has length {y.size}, chart has r={emb.r}")
            elif w.size != emb.r:
                problems.append(f"initial w has length {w.size}, chart has r={emb.r}")
            else:
                init_gen = GeneralizedState(
                    t=float(init_doc.get("t", 0.0)), y=y, w=w
                )
                init = pushforward_state(emb, init_gen)
    else:
        x = np.asarray(init_doc.get("x", []), float)
        v = np.asarray(init_doc.get("v", []), float)
        if x.size != m:
            problems.append(f"initial x has length {x.size}, system has m={m}")
        if v.size != m:
            problems.append(f"initial v has length {v.size}, system has m={m}")
        if x.size == m and v.size == m:
            init = State(t=float(init_doc.get("t", 0.0)), x=x, v=v)

    if init is not None and cs is not None:
        phi0 = float(np.abs(cs.phi(init.t, init.x, init.v)).max(initial=0.0))
        if phi0 > 1e-8:
            problems.append(f"initial phi residual {phi0:.6g} exceeds 1e-08")
        if cs.is_holonomic:
            g0 = float(np.abs(cs.generator(init.t, init.x)).max(initial=0.0))
            if g0 > 1e-8:
                problems.append(f"initial g residual {g0:.6g} exceeds 1e-08")

    try:
        integ = _integrator_from_doc(doc.get("integrator", {}))
    except ValueError as exc:
        problems.append(f"integrator: {exc}")
        integ = IntegratorConfig()

    if problems:
        raise ScenarioError(problems)

    sc = Scenario(
        name=doc.get("name", "unnamed"),
        system=system,
        constraints=cs,
        embedding=emb,
        initial=init,
        initial_generalized=init_gen,
        integrator=integ,
        checks=list(doc.get("checks", DEFAULT_CHECKS)),
        document=doc,
    )
    emb_type = (doc.get("embedding") or {}).get("type")
    if emb_type == "sphere-polar":
        sc.sample_y_lo = np.array([0.3, -np.pi])
        sc.sample_y_hi = np.array([np.pi - 0.3, np.pi])
    elif emb_type == "rotating-line":
        sc.sample_y_lo = np.array([0.5])
        sc.sample_y_hi = np.array([2.0])
    return sc


def parse_scenario(path) -> Scenario:
    """Load and validate a JSON scenario document from disk."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError([f"no such file: {path}"])
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"JSON parse error at line {exc.lineno}: {exc.msg}"]) from exc
    return scenario_from_document(doc)


def write_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(
        json.dumps(sc.document, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# the built-in catalog

def _catalog_documents() -> Dict[str, Dict]:
    return {
        "pendulum": {
            "name": "pendulum",
            "mass": {"matrix": [[1.0, 0.0], [0.0, 1.0]]},
            "force": {"type": "uniform-gravity", "g0": 10.0, "axis": 1},
            "constraint": {"type": "sphere", "radius": 1.0},
            "embedding": {"type": "circle", "radius": 1.0},
            "initial": {"t": 0.0, "y": [0.0], "w": [2.0]},
            "integrator": {"method": "rk4-fixed", "dt": 1e-3},
            "checks": DEFAULT_CHECKS,
        },
        "spherical-pendulum": {
            "name": "spherical-pendulum",
            "mass": {"matrix": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]},
            "force": {"type": "uniform-gravity", "g0": 10.0, "axis": 2},
            "constraint": {"type": "sphere", "radius": 1.0},
            "embedding": {"type": "sphere-polar", "radius": 1.0},
            "initial": {"t": 0.0, "y": [1.0471975511965976, 0.0], "w": [0.0, 2.0]},
            "integrator": {"method": "rk4-fixed", "dt": 1e-3},
            "checks": DEFAULT_CHECKS,
        },
        "rotating-wire-bead": {
            "name": "rotating-wire-bead",
            "mass": {"matrix": [[1.0, 0.0], [0.0, 1.0]]},
            "force": {"type": "none"},
            "constraint": {"type": "rotating-line", "omega": 1.0},
            "embedding": {"type": "rotating-line", "omega": 1.0},
            "initial": {"t": 0.0, "y": [1.0], "w": [0.0]},
            "integrator": {"method": "rk4-fixed", "dt": 1e-3},
            "checks": DEFAULT_CHECKS,
        },
        "knife-edge": {
            "name": "knife-edge",
            "mass": {"matrix": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]]},
            "force": {"type": "none"},
            "constraint": {"type": "knife-edge"},
            "initial": {
                "t": 0.0,
                "x": [0.0, 0.0, 0.3],
                "v": [0.9553364891256061, 0.29552020666133955, 0.5],
            },
            "integrator": {"method": "rk4-fixed", "dt": 1e-3},
            "checks": DEFAULT_CHECKS,
        },
    }


def catalog_scenario(name: str) -> Scenario:
    """Fully analytic built-in scenario by name."""
    docs = _catalog_documents()
    if name not in docs:
        raise ScenarioError(
            [f"unknown scenario {name!r}; available: {', '.join(sorted(docs))}"]
        )
    return scenario_from_document(docs[name])
