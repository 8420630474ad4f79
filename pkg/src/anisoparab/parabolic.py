"""Rothe time discretization of the anisotropic problem and of its symmetrized radial counterpart.

State ``m`` approximates the solution at ``t_m``; it solves the elliptic step
with zero-order coefficient 1/tau_m (tau_m = t_m - t_{m-1}) and data
f^m + u^{m-1}/tau_m, where f^m is the mean of f over [t_{m-1}, t_m].
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .aniso_core import AnisotropicCoefficients
from .elliptic import DEFAULT_EPS, DEFAULT_TOL, EllipticProblem, solve_elliptic
from .profiles import DecreasingProfile, GridFunction, RadialProfile
from .radial import DEFAULT_NODES, radial_parabolic_step
from .rearrange import decreasing_rearrangement, radial_rearrangement, step_to_radial

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    """A time step's inner solve failed; ``step`` is the 1-based step index."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray

    def __post_init__(self) -> None:
        t = np.array(self.nodes, dtype=float)
        if t.ndim != 1 or len(t) < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("time nodes must start at 0 and increase strictly")
        t.setflags(write=False)
        object.__setattr__(self, "nodes", t)

    @classmethod
    def uniform(cls, T: float, M: int) -> "TimeGrid":
        if not T > 0 or M < 1:
            raise ValueError("need T > 0 and M >= 1")
        t = np.linspace(0.0, T, M + 1)
        return cls(t)

    @property
    def M(self) -> int:
        return len(self.nodes) - 1

    @property
    def delta(self) -> float:
        return float(np.max(np.diff(self.nodes)))

    def step(self, m: int) -> float:
        return float(self.nodes[m] - self.nodes[m - 1])


Sampler = Callable[[float], GridFunction]


def source_time_average(source: Sampler | None, t_lo: float, t_hi: float, quad_points: int, grid: GridFunction) -> GridFunction:
    """Cellwise mean of f(., t) over [t_lo, t_hi] by the composite midpoint rule."""
    if not t_hi > t_lo:
        raise ValueError("need t_lo < t_hi")
    if quad_points < 1:
        raise ValueError("quad_points must be >= 1")
    if source is None:
        return GridFunction.zeros(grid.nx, grid.ny, grid.hx, grid.hy)
    h = (t_hi - t_lo) / quad_points
    acc = np.zeros((grid.nx, grid.ny))
    for k in range(quad_points):
        f = source(t_lo + (k + 0.5) * h)
        if not f.same_grid(grid):
            raise ValueError("source sampled on a different grid")
        acc += f.values
    return grid.with_values(acc / quad_points)


@dataclass
class ParabolicScenario:
    coeffs: AnisotropicCoefficients
    u0: GridFunction
    time_grid: TimeGrid
    source: Sampler | None = None
    step_data: Sequence[GridFunction] | None = None
    quad_points: int = 4
    eps: float = DEFAULT_EPS
    tol: float = DEFAULT_TOL

    def __post_init__(self) -> None:
        if self.step_data is not None:
            if len(self.step_data) != self.time_grid.M:
                raise ValueError("step_data needs one field per time step")
            if not all(f.same_grid(self.u0) for f in self.step_data):
                raise ValueError("step_data lives on a different grid")

    def averaged_source(self, m: int) -> GridFunction:
        """f^m for step m = 1..M."""
        if self.step_data is not None:
            return self.step_data[m - 1]
        t = self.time_grid.nodes
        return source_time_average(self.source, t[m - 1], t[m], self.quad_points, self.u0)

    @property
    def source_is_zero(self) -> bool:
        if self.step_data is not None:
            return all(not np.any(f.values) for f in self.step_data)
        return self.source is None


@dataclass
class TrajectoryRecord:
    """States m = 0..M with per-step ledger rows; ``data[m-1]`` is the datum of step m."""

    kind: str
    times: np.ndarray
    states: list
    ledger: list[dict] = field(default_factory=list)
    data: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.states) != len(self.times):
            raise ValueError("one state per time node is required")

    def profiles(self) -> list[DecreasingProfile]:
        if self.kind == "anisotropic":
            return [decreasing_rearrangement(u) for u in self.states]
        return [v.to_decreasing() for v in self.states]


def _grad_energies(u: GridFunction, coeffs: AnisotropicCoefficients) -> list[float]:
    v = np.pad(u.values, 1)
    dx = np.diff(v[:, 1:-1], axis=0) / u.hx
    dy = np.diff(v[1:-1, :], axis=1) / u.hy
    return [
        float(a * np.sum(np.abs(d) ** p) * u.cell_measure)
        for d, a, p in zip((dx, dy), coeffs.alphas, coeffs.exponents)
    ]


def advance_anisotropic(scenario: ParabolicScenario) -> TrajectoryRecord:
    tg = scenario.time_grid
    u = scenario.u0
    states = [u]
    data = []
    for m in range(1, tg.M + 1):
        tau = tg.step(m)
        fm = scenario.averaged_source(m)
        rhs = u.with_values(fm.values + u.values / tau)
        prob = EllipticProblem(scenario.coeffs, 1.0 / tau, rhs, eps=scenario.eps)
        try:
            u, _ = solve_elliptic(prob, tol=scenario.tol, initial=u)
        except Exception as exc:
            raise StepFailure(m, exc) from exc
        states.append(u)
        data.append(fm)
    rec = TrajectoryRecord("anisotropic", tg.nodes.copy(), states, data=data)
    rec.ledger = _anisotropic_ledger(rec, scenario.coeffs)
    return rec


def _anisotropic_ledger(rec: TrajectoryRecord, coeffs: AnisotropicCoefficients) -> list[dict]:
    rows = []
    prev = None
    for m, (t, u) in enumerate(zip(rec.times, rec.states)):
        l2_sq = float(np.sum(u.values**2) * u.cell_measure)
        grads = _grad_energies(u, coeffs)
        row = {"m": m, "t": float(t), "l2": float(np.sqrt(l2_sq)), "l2_sq": l2_sq}
        for i, g in enumerate(grads):
            row[f"grad_{i}"] = g
        if prev is None:
            row.update(tau=0.0, step_lhs=0.0, step_rhs=0.0)
        else:
            tau = float(t - rec.times[m - 1])
            jump_sq = float(np.sum((u.values - prev.values) ** 2) * u.cell_measure)
            prev_sq = float(np.sum(prev.values**2) * u.cell_measure)
            fm = rec.data[m - 1]
            row["tau"] = tau
            row["step_lhs"] = 0.5 * (l2_sq - prev_sq + jump_sq) + tau * sum(grads)
            row["step_rhs"] = tau * float(np.sum(np.abs(fm.values) * np.abs(u.values)) * u.cell_measure)
        rows.append(row)
        prev = u
    return rows


@dataclass
class SymmetrizedScenario:
    lambda_const: float
    pbar: float
    dim: int
    measure: float
    v0: RadialProfile
    step_data: Sequence[DecreasingProfile]
    time_grid: TimeGrid
    tol: float = 1e-10
    n_nodes: int = DEFAULT_NODES

    def __post_init__(self) -> None:
        if len(self.step_data) != self.time_grid.M:
            raise ValueError("need one data profile per time step")


def symmetrize(
    scenario: ParabolicScenario,
    tol: float = 1e-10,
    n_nodes: int = DEFAULT_NODES,
    dominating_source: DecreasingProfile | None = None,
    dominating_u0: DecreasingProfile | None = None,
) -> SymmetrizedScenario:
    """Build the radial scenario: v0 = u0 rearranged, data (f^m)* (or the dominating profiles)."""
    c = scenario.coeffs
    v0 = radial_rearrangement(scenario.u0) if dominating_u0 is None else step_to_radial(dominating_u0)
    if dominating_source is None:
        data = [decreasing_rearrangement(scenario.averaged_source(m)) for m in range(1, scenario.time_grid.M + 1)]
    else:
        data = [dominating_source] * scenario.time_grid.M
    return SymmetrizedScenario(
        c.lambda_const, c.pbar, c.dim, scenario.u0.domain_measure, v0, data, scenario.time_grid, tol, n_nodes
    )


def advance_symmetrized(sym: SymmetrizedScenario) -> TrajectoryRecord:
    tg = sym.time_grid
    v = sym.v0
    states = [v]
    for m in range(1, tg.M + 1):
        try:
            v = radial_parabolic_step(
                v, tg.step(m), sym.step_data[m - 1], sym.lambda_const, sym.pbar, sym.dim, sym.tol, sym.n_nodes
            )
        except Exception as exc:
            raise StepFailure(m, exc) from exc
        states.append(v)
    rec = TrajectoryRecord("symmetrized", tg.nodes.copy(), states, data=list(sym.step_data))
    rows = []
    for m, (t, v) in enumerate(zip(rec.times, rec.states)):
        l2_sq = v.l2_norm_squared()
        rows.append(
            {
                "m": m,
                "t": float(t),
                "l2": float(np.sqrt(l2_sq)),
                "l2_sq": l2_sq,
                "grad": sym.lambda_const * v.gradient_energy(sym.pbar, sym.dim),
            }
        )
    rec.ledger = rows
    return rec


@dataclass(frozen=True)
class EnergyLedger:
    sup_l2_sq: float
    total_grad_energy: float
    bound: float
    step_lhs: list[float]
    step_rhs: list[float]
    max_step_excess: float

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.sup_l2_sq) and np.isfinite(self.total_grad_energy) and np.isfinite(self.bound))


def energy_monitor(traj: TrajectoryRecord) -> EnergyLedger:
    """A priori energy bookkeeping for an anisotropic trajectory.

    ``bound`` is the data term sum_m tau_m int |f^m||u^m| + ||u0||^2 that
    dominates half the final L2 norm plus the accumulated gradient energy;
    ``max_step_excess`` is the largest step_lhs - step_rhs (nonpositive up to
    solver tolerance).
    """
    if traj.kind != "anisotropic":
        raise ValueError("energy monitor applies to anisotropic trajectories")
    rows = traj.ledger
    sup_l2 = max(r["l2_sq"] for r in rows)
    grad_keys = [k for k in rows[0] if k.startswith("grad_")]
    total_grad = sum(r["tau"] * sum(r[k] for k in grad_keys) for r in rows[1:])
    lhs = [r["step_lhs"] for r in rows[1:]]
    rhs = [r["step_rhs"] for r in rows[1:]]
    bound = sum(rhs) + rows[0]["l2_sq"]
    excess = max((a - b for a, b in zip(lhs, rhs)), default=0.0)
    return EnergyLedger(sup_l2, total_grad, bound, lhs, rhs, excess)


def save_trajectory(traj: TrajectoryRecord, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for m, state in enumerate(traj.states):
        state.to_csv(d / f"step_{m:04d}.csv")
    keys = list(traj.ledger[0].keys())
    with open(d / "ledger.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in traj.ledger:
            w.writerow([repr(float(row[k])) if isinstance(row[k], (float, np.floating)) else row[k] for k in keys])


def load_trajectory(directory) -> TrajectoryRecord:
    """Read a trajectory directory; the state type is detected from the CSV header."""
    d = Path(directory)
    with open(d / "ledger.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    ledger = [{k: (int(v) if k == "m" else float(v)) for k, v in r.items()} for r in rows]
    times = np.array([r["t"] for r in ledger])
    files = sorted(d.glob("step_*.csv"))
    if len(files) != len(times):
        raise ValueError(f"{d}: {len(files)} step files for {len(times)} ledger rows")
    with open(files[0]) as fh:
        header = fh.readline().strip()
    if header == "nx,ny,hx,hy":
        states = [GridFunction.from_csv(f) for f in files]
        kind = "anisotropic"
    else:
        states = [RadialProfile.from_csv(f) for f in files]
        kind = "symmetrized"
    return TrajectoryRecord(kind, times, states, ledger)
