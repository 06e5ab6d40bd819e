"""Property-check suite: every structural identity the engine implements, run as a
numbered pass/fail report against a scenario.

Thresholds are the documented defaults; callers may override any of them
(the CLI exposes this via --tol NAME=VALUE).
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .constraints import virtual_basis
from .generalized import (
    GeneralizedState,
    covariance_residual,
    integrate_second_kind,
    match_trajectories,
)
from .integrate import Trajectory, acceleration, integrate_first_kind
from .reactions import Reparametrization, invariance_report, reaction, virtual_work
from .scenarios import Scenario
from .smooth import State

DEFAULT_THRESHOLDS: Dict[str, float] = {
    "first-integral": 1e-6,
    "first-integral-rate": 1e-9,
    "virtual-work": 1e-10,
    "gde-residual": 1e-8,
    "reparametrization": 1e-8,
    "covariance": 1e-7,
    "energy": 1e-6,
    "energy-nonconservation": 0.1,
    "equivalence": 1e-5,
}


@dataclass(frozen=True)
class ReportEntry:
    name: str
    value: Optional[float]
    threshold: Optional[float]
    passed: bool
    comparison: str = "<="
    note: str = ""

    @property
    def skipped(self) -> bool:
        return self.note.startswith("skipped")


@dataclass
class Report:
    scenario: str
    entries: List[ReportEntry] = field(default_factory=list)
    stamp: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed or e.skipped for e in self.entries)

    def to_text(self) -> str:
        lines = [f"scenario: {self.scenario}"]
        for k, v in sorted(self.stamp.items()):
            lines.append(f"  {k}: {v}")
        for e in self.entries:
            if e.skipped:
                lines.append(f"[SKIP] {e.name}: {e.note}")
                continue
            tag = "PASS" if e.passed else "FAIL"
            lines.append(
                f"[{tag}] {e.name}: {e.value:.6e} {e.comparison} {e.threshold:.6e}"
            )
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> Dict:
        return {
            "scenario": self.scenario,
            "stamp": self.stamp,
            "passed": self.passed,
            "entries": [
                {
                    "name": e.name,
                    "value": e.value,
                    "threshold": e.threshold,
                    "comparison": e.comparison,
                    "passed": e.passed,
                    "note": e.note,
                }
                for e in self.entries
            ],
        }


def _entry(name, value, threshold, comparison="<="):
    ok = value <= threshold if comparison == "<=" else value > threshold
    return ReportEntry(
        name=name, value=float(value), threshold=float(threshold), passed=bool(ok),
        comparison=comparison,
    )


def _is_scleronomic(sc: Scenario) -> bool:
    if sc.constraints is None:
        return True
    rng = np.random.default_rng(3)
    for s in sc.sample_states(rng, 5):
        if np.abs(sc.constraints.phi.d_t(s.t, s.x, s.v)).max(initial=0.0) > 1e-12:
            return False
    return True


def reparametrization_families(n: int, rng: np.random.Generator):
    """The U families used in the invariance check: identity, e^z - 1,
    z + z^3, and a random invertible linear mix."""
    fams = [
        ("identity", Reparametrization.identity(n)),
        ("exp-minus-one", Reparametrization.componentwise(n, lambda z: np.expm1(z), np.exp)),
        ("cubic", Reparametrization.componentwise(n, lambda z: z + z**3, lambda z: 1 + 3 * z**2)),
    ]
    M = np.eye(n) + 0.3 * rng.uniform(-1, 1, (n, n))
    while abs(np.linalg.det(M)) < 0.1:
        M = np.eye(n) + 0.3 * rng.uniform(-1, 1, (n, n))
    fams.append(("linear-mix", Reparametrization.linear(M)))
    return fams


def check_first_integral(sc: Scenario, traj: Trajectory, thresholds) -> List[ReportEntry]:
    cs, sys = sc.constraints, sc.system
    if cs is None or cs.is_empty:
        return [
            ReportEntry(
                name="first-integral", value=None, threshold=None, passed=True,
                note="skipped: unconstrained system",
            )
        ]
    value = max(traj.max_diag("phi_norm"), traj.max_diag("g_norm"))
    entries = [_entry("first-integral", value, thresholds["first-integral"])]
    # chain-rule d(phi)/dt along the integrated vector field, per accepted step
    worst = 0.0
    for smp in traj.samples:
        s = smp.state
        a = acceleration(sys, cs, s)
        rate = (
            cs.phi.d_t(s.t, s.x, s.v)
            + cs.phi.d_x(s.t, s.x, s.v) @ s.v
            + cs.phi.d_v(s.t, s.x, s.v) @ a
        )
        worst = max(worst, float(np.abs(rate).max(initial=0.0)))
    entries.append(_entry("first-integral-rate", worst, thresholds["first-integral-rate"]))
    return entries


def check_virtual_work(sc: Scenario, thresholds, count=1000) -> List[ReportEntry]:
    if sc.constraints is None or sc.constraints.is_empty:
        return [
            ReportEntry(
                name="virtual-work", value=None, threshold=None, passed=True,
                note="skipped: unconstrained system",
            )
        ]
    rng = np.random.default_rng(11)
    worst = 0.0
    for s in sc.sample_states(rng, count):
        res = reaction(sc.system, sc.constraints, s)
        basis = virtual_basis(sc.constraints, s)
        w = virtual_work(res, basis)
        scale = 1.0 + float(np.abs(res.N).max(initial=0.0))
        worst = max(worst, w / scale)
    return [_entry("virtual-work", worst, thresholds["virtual-work"])]


def check_gde(sc: Scenario, traj: Trajectory, thresholds) -> List[ReportEntry]:
    worst = 0.0
    for smp in traj.samples:
        s = smp.state
        fscale = 1.0 + float(np.abs(sc.system.force(s.t, s.x, s.v)).max(initial=0.0))
        worst = max(worst, smp.diagnostics.gde_residual / fscale)
    return [_entry("gde-residual", worst, thresholds["gde-residual"])]


def check_reparametrization(sc: Scenario, thresholds, count=100) -> List[ReportEntry]:
    if sc.constraints is None or sc.constraints.is_empty:
        return [
            ReportEntry(
                name="reparametrization", value=None, threshold=None, passed=True,
                note="skipped: unconstrained system",
            )
        ]
    rng = np.random.default_rng(17)
    states = sc.sample_states(rng, count)
    worst = 0.0
    for _, rep in reparametrization_families(sc.constraints.n, rng):
        worst = max(worst, invariance_report(sc.system, sc.constraints, rep, states))
    return [_entry("reparametrization", worst, thresholds["reparametrization"])]


def check_covariance(sc: Scenario, thresholds, count=200) -> List[ReportEntry]:
    if sc.embedding is None:
        return [
            ReportEntry(
                name="covariance", value=None, threshold=None, passed=True,
                note="skipped: nonholonomic (no embedding)",
            )
        ]
    rng = np.random.default_rng(23)
    emb = sc.embedding
    lo = sc.sample_y_lo if sc.sample_y_lo is not None else -np.pi * np.ones(emb.r)
    hi = sc.sample_y_hi if sc.sample_y_hi is not None else np.pi * np.ones(emb.r)
    worst = 0.0
    for _ in range(count):
        t = float(rng.uniform(0, 3))
        y = rng.uniform(lo, hi)
        w = rng.uniform(-2, 2, emb.r)
        a = rng.uniform(-2, 2, emb.r)
        worst = max(
            worst,
            covariance_residual(emb, sc.system.mass, sc.system.force, t, y, w, a),
        )
    return [_entry("covariance", worst, thresholds["covariance"])]


def check_energy(sc: Scenario, traj: Trajectory, thresholds) -> List[ReportEntry]:
    energies = np.array([s.diagnostics.energy for s in traj.samples])
    e0 = energies[0]
    if _is_scleronomic(sc):
        if sc.system.force.potential is None:
            return [
                ReportEntry(
                    name="energy", value=None, threshold=None, passed=True,
                    note="skipped: force not declared potential",
                )
            ]
        drift = float(np.abs(energies - e0).max()) / (1.0 + abs(e0))
        return [_entry("energy", drift, thresholds["energy"])]
    # rheonomic: reactions may do work through the moving constraint; assert
    # the energy visibly changes while the constraint holds (first-integral
    # entry covers the residual bound)
    times = traj.times
    idx = int(np.argmin(np.abs(times - min(3.0, times[-1]))))
    change = abs(float(energies[idx] - e0))
    return [
        _entry("energy-nonconservation", change, thresholds["energy-nonconservation"], ">")
    ]


def check_equivalence(sc: Scenario, thresholds, t_end=10.0) -> List[ReportEntry]:
    """First-kind and second-kind runs agree through the chart, as a sup-norm bound."""
    if sc.embedding is None or sc.initial_generalized is None:
        return [
            ReportEntry(
                name="equivalence", value=None, threshold=None, passed=True,
                note="skipped: nonholonomic (no embedding)",
            )
        ]
    traj_x = integrate_first_kind(sc.system, sc.constraints, sc.initial, t_end, sc.integrator)
    traj_y = integrate_second_kind(
        sc.embedding, sc.system, None, sc.initial_generalized, t_end, sc.integrator
    )
    rep = match_trajectories(traj_x, sc.embedding, traj_y, sc.system.mass)
    value = max(rep.sup_position, rep.sup_velocity)
    entries = [_entry("equivalence", value, thresholds["equivalence"])]
    entries.append(
        _entry("chart-inversion", rep.max_inversion_residual, thresholds["equivalence"])
    )
    return entries


def check_scenario(
    sc: Scenario,
    t_end: float = 10.0,
    thresholds: Optional[Dict[str, float]] = None,
    jobs: int = 1,
) -> Report:
    """Run every check the scenario requests and assemble the report."""
    th = dict(DEFAULT_THRESHOLDS)
    if thresholds:
        th.update(thresholds)

    traj = integrate_first_kind(sc.system, sc.constraints, sc.initial, t_end, sc.integrator)

    tasks: List[Callable[[], List[ReportEntry]]] = []
    wanted = sc.checks
    if "first-integral" in wanted:
        tasks.append(lambda: check_first_integral(sc, traj, th))
    if "virtual-work" in wanted:
        tasks.append(lambda: check_virtual_work(sc, th))
    if "gde-residual" in wanted:
        tasks.append(lambda: check_gde(sc, traj, th))
    if "reparametrization" in wanted:
        tasks.append(lambda: check_reparametrization(sc, th))
    if "covariance" in wanted:
        tasks.append(lambda: check_covariance(sc, th))
    if "energy" in wanted:
        tasks.append(lambda: check_energy(sc, traj, th))

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(lambda fn: fn(), tasks))
    else:
        results = [fn() for fn in tasks]

    report = Report(
        scenario=sc.name,
        stamp={
            "version": __version__,
            "t_end": t_end,
            "method": sc.integrator.method,
            "dt": sc.integrator.dt,
            "projection": sc.integrator.projection,
        },
    )
    for group in results:
        report.entries.extend(group)
    return report


def compare_embeddings_report(
    sc: Scenario, t_end: float = 10.0, thresholds: Optional[Dict[str, float]] = None
) -> Report:
    th = dict(DEFAULT_THRESHOLDS)
    if thresholds:
        th.update(thresholds)
    report = Report(
        scenario=sc.name,
        stamp={
            "version": __version__,
            "t_end": t_end,
            "method": sc.integrator.method,
            "dt": sc.integrator.dt,
        },
    )
    report.entries.extend(check_equivalence(sc, th, t_end=t_end))
    return report
