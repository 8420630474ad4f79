"""Verification of the comparison statements and persisted reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .profiles import DecreasingProfile, GridFunction, RadialProfile
from .radial import smallest_dirichlet_eigenvalue
from .rearrange import decreasing_rearrangement, lorentz_norm

DEFAULT_MARGIN_CONSTANT = 10.0
DEFAULT_LORENTZ = ((1.0, 1.0), (2.0, 2.0), (2.0, math.inf))


def default_margin(h: float, delta: float, eps: float, constant: float = DEFAULT_MARGIN_CONSTANT) -> float:
    """c * (h + delta + sqrt(eps)): the consistency budget of the discrete checks."""
    return constant * (h + delta + math.sqrt(eps))


def _as_profile(state) -> DecreasingProfile:
    if isinstance(state, GridFunction):
        return decreasing_rearrangement(state)
    if isinstance(state, RadialProfile):
        return state.to_decreasing()
    if isinstance(state, DecreasingProfile):
        return state
    raise TypeError(f"cannot rearrange {type(state).__name__}")


def _conc(state, s: np.ndarray) -> np.ndarray:
    # a RadialProfile's own concentration is exact (piecewise quadratic)
    if isinstance(state, RadialProfile):
        return state.concentration_at(s)
    return _as_profile(state).concentration_at(s)


def _knots(state) -> np.ndarray:
    if isinstance(state, RadialProfile):
        return state.s_grid
    return _as_profile(state).breakpoints


def concentration_excess(u_state, v_state) -> tuple[float, float]:
    """max_s [C_u(s) - C_v(s)] over the union of breakpoints, and its argmax.

    Between consecutive union points C_u is linear and C_v concave, so the
    difference is convex there and the maximum over [0, |Omega|] is attained at
    a knot: the value is exact.
    """
    su, sv = _knots(u_state), _knots(v_state)
    mu, mv = su[-1], sv[-1]
    if not math.isclose(mu, mv, rel_tol=1e-12):
        raise ValueError(f"measure mismatch: {mu} vs {mv}")
    s = np.union1d(su, np.minimum(sv, mu))
    d = _conc(u_state, s) - _conc(v_state, np.minimum(s, mv))
    k = int(np.argmax(d))
    return float(d[k]), float(s[k])


@dataclass
class ComparisonReport:
    times: list[float]
    D: list[float]
    argmax_s: list[float]
    eta: float
    lorentz: list[dict] = field(default_factory=list)
    decay: list[dict] = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def dominance_passed(self) -> bool:
        return all(d <= self.eta for d in self.D)

    @property
    def passed(self) -> bool:
        return self.dominance_passed and all(self.checks.values())

    def summary(self) -> dict:
        return {
            "steps": len(self.D),
            "eta": self.eta,
            "max_D": max(self.D) if self.D else None,
            "dominance_passed": self.dominance_passed,
            "checks": dict(self.checks),
            "passed": self.passed,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["summary"] = self.summary()
        return _jsonable(d)

    def write(self, out_dir) -> None:
        """report.json plus dominance/lorentz/decay CSVs; content is a function of the data only."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        rows = [
            {"m": m, "t": t, "D": d, "pass": int(d <= self.eta)}
            for m, (t, d) in enumerate(zip(self.times, self.D))
        ]
        _write_rows(out / "dominance.csv", ["m", "t", "D", "pass"], rows)
        if self.lorentz:
            _write_rows(out / "lorentz.csv", list(self.lorentz[0].keys()), self.lorentz)
        if self.decay:
            _write_rows(out / "decay.csv", list(self.decay[0].keys()), self.decay)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path: Path, keys: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in keys])


def _check_times(u_steps: Sequence, v_steps: Sequence, times) -> list[float]:
    if len(u_steps) != len(v_steps):
        raise ValueError(f"time-grid mismatch: {len(u_steps)} u-steps vs {len(v_steps)} v-steps")
    if times is None:
        return [float(m) for m in range(len(u_steps))]
    if len(times) != len(u_steps):
        raise ValueError("times do not match the step count")
    return [float(t) for t in times]


def verify_concentration_dominance(
    u_steps: Sequence, v_steps: Sequence, eta: float, times: Sequence[float] | None = None
) -> ComparisonReport:
    """D_m = max_s [int_0^s (u^m)* - int_0^s (v^m)*] per step; pass iff every D_m <= eta."""
    if not eta >= 0:
        raise ValueError("eta must be nonnegative")
    ts = _check_times(u_steps, v_steps, times)
    D, where = [], []
    for u, v in zip(u_steps, v_steps):
        d, s = concentration_excess(u, v)
        D.append(d)
        where.append(s)
    return ComparisonReport(ts, D, where, float(eta))


def lorentz_dominance_report(
    u_steps: Sequence, v_steps: Sequence, pq_list=DEFAULT_LORENTZ, times: Sequence[float] | None = None
) -> list[dict]:
    """Per step and (p, q): ||u^m||_{p,q}, ||v^m||_{p,q} and their difference.

    The v-side norm is taken from the interval means of the radial profile,
    which share its concentration at every node.
    """
    pairs = []
    for p, q in pq_list:
        p, q = float(p), float(q)
        if not (1.0 <= p < math.inf and q >= 1.0):
            raise ValueError(f"invalid Lorentz exponents ({p}, {q})")
        pairs.append((p, q))
    ts = _check_times(u_steps, v_steps, times)
    rows = []
    for m, (t, u, v) in enumerate(zip(ts, u_steps, v_steps)):
        pu, pv = _as_profile(u), _as_profile(v)
        for p, q in pairs:
            nu, nv = lorentz_norm(pu, p, q), lorentz_norm(pv, p, q)
            rows.append({"m": m, "t": t, "p": p, "q": q, "norm_u": nu, "norm_v": nv, "diff": nu - nv})
    return rows


def decay_report(traj, radius: float, dim: int, pbar: float) -> list[dict]:
    """Rows (m, t_m, ||u^m||_2, e^{-lambda t_m} ||u^0||_2) with lambda the first ball eigenvalue."""
    if not math.isclose(pbar, 2.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"decay bound requires pbar = 2, got {pbar}")
    if any(np.any(f.values) for f in traj.data if isinstance(f, GridFunction)):
        raise ValueError("decay bound requires a zero source")
    if any(f.total() > 0 for f in traj.data if isinstance(f, DecreasingProfile)):
        raise ValueError("decay bound requires a zero source")
    lam = float(smallest_dirichlet_eigenvalue(radius, dim))
    norms = [r["l2"] for r in traj.ledger]
    n0 = norms[0]
    return [
        {"m": m, "t": float(t), "l2": n, "bound": math.exp(-lam * float(t)) * n0, "lambda": lam}
        for m, (t, n) in enumerate(zip(traj.times, norms))
    ]


def dominance_chain_check(v_steps: Sequence, vtilde_steps: Sequence, tol: float) -> bool:
    """True when the dominating-data trajectory concentration-dominates the plain one at every step."""
    return all(concentration_excess(v, vt)[0] <= tol for v, vt in zip(v_steps, vtilde_steps))
