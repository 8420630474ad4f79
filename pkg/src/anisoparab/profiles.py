"""Discrete fields and one-dimensional profiles in the mass coordinate, with CSV I/O.

Conventions
-----------
``GridFunction.values`` has shape ``(nx, ny)``; axis 0 runs along x.  The CSV
layout is a header line ``nx,ny,hx,hy``, one line with those numbers, then
``nx`` lines of ``ny`` comma-separated values.

A ``DecreasingProfile`` is a right-continuous step function on ``[0, |Omega|]``.
Its CSV has header ``s,level`` and one row per step holding the step's right
breakpoint and level (the left end of the first step is 0).

A ``RadialProfile`` is a continuous piecewise-linear function given by nodal
values. Repeated nodes are allowed and encode jumps, so step functions are
represented exactly. CSV: header ``s,value`` and one row per node.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class GridFunction:
    nx: int
    ny: int
    hx: float
    hy: float
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be >= 1")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("cell sizes must be positive")
        vals = np.array(self.values, dtype=float).reshape(self.nx, self.ny)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, func, nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> "GridFunction":
        """Sample ``func(x, y)`` at cell centres of ``[0,lx] x [0,ly]``."""
        hx, hy = lx / nx, ly / ny
        x = (np.arange(nx) + 0.5) * hx
        y = (np.arange(ny) + 0.5) * hy
        X, Y = np.meshgrid(x, y, indexing="ij")
        return cls(nx, ny, hx, hy, np.broadcast_to(func(X, Y), (nx, ny)))

    @classmethod
    def zeros(cls, nx: int, ny: int, hx: float, hy: float) -> "GridFunction":
        return cls(nx, ny, hx, hy, np.zeros((nx, ny)))

    @property
    def cell_measure(self) -> float:
        return self.hx * self.hy

    @property
    def domain_measure(self) -> float:
        return self.nx * self.ny * self.hx * self.hy

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    def same_grid(self, other: "GridFunction") -> bool:
        return (self.nx, self.ny, self.hx, self.hy) == (other.nx, other.ny, other.hx, other.hy)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.nx, self.ny, self.hx, self.hy, values)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.cell_measure))

    def integral_abs(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.cell_measure)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["nx", "ny", "hx", "hy"])
            w.writerow([self.nx, self.ny, repr(self.hx), repr(self.hy)])
            for row in self.values:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if not rows or [c.strip() for c in rows[0]] != ["nx", "ny", "hx", "hy"]:
            raise ValueError(f"{path}: expected header 'nx,ny,hx,hy'")
        nx, ny = int(rows[1][0]), int(rows[1][1])
        hx, hy = float(rows[1][2]), float(rows[1][3])
        vals = np.array([[float(v) for v in r] for r in rows[2:]])
        if vals.shape != (nx, ny):
            raise ValueError(f"{path}: expected {nx}x{ny} values, got {vals.shape}")
        return cls(nx, ny, hx, hy, vals)


def _cumulative_steps(breakpoints: np.ndarray, levels: np.ndarray) -> np.ndarray:
    out = np.zeros(len(breakpoints))
    out[1:] = np.cumsum(levels * np.diff(breakpoints))
    return out


@dataclass(frozen=True)
class DecreasingProfile:
    """Nonincreasing, nonnegative step function; ``levels[k]`` holds on ``[s_k, s_{k+1})``."""

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self) -> None:
        s = np.array(self.breakpoints, dtype=float)
        lv = np.array(self.levels, dtype=float)
        if s.ndim != 1 or lv.ndim != 1 or len(s) != len(lv) + 1 or len(lv) == 0:
            raise ValueError("need K levels and K+1 breakpoints, K >= 1")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if np.any(lv < 0) or np.any(np.diff(lv) > 0):
            raise ValueError("levels must be nonnegative and nonincreasing")
        s.setflags(write=False)
        lv.setflags(write=False)
        object.__setattr__(self, "breakpoints", s)
        object.__setattr__(self, "levels", lv)
        cum = _cumulative_steps(s, lv)
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def constant(cls, value: float, measure: float) -> "DecreasingProfile":
        return cls(np.array([0.0, measure]), np.array([value]))

    @property
    def measure(self) -> float:
        return float(self.breakpoints[-1])

    def __call__(self, s):
        """u*(s), right-continuous; 0 beyond the measure."""
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.breakpoints, s, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.levels))
        return np.where(inside, self.levels[np.clip(idx, 0, len(self.levels) - 1)], 0.0)

    def concentration_at(self, s):
        """Vectorized integral of the profile over ``[0, s]`` (no range check)."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.measure)
        idx = np.clip(np.searchsorted(self.breakpoints, s, side="right") - 1, 0, len(self.levels) - 1)
        return self._cum[idx] + self.levels[idx] * (s - self.breakpoints[idx])

    def total(self) -> float:
        return float(self._cum[-1])

    def __add__(self, other: "DecreasingProfile") -> "DecreasingProfile":
        return profile_sum(self, other)

    def scaled(self, c: float) -> "DecreasingProfile":
        if c < 0:
            raise ValueError("scale must be nonnegative")
        return DecreasingProfile(self.breakpoints, self.levels * c)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "level"])
            for s, lv in zip(self.breakpoints[1:], self.levels):
                w.writerow([repr(float(s)), repr(float(lv))])

    @classmethod
    def from_csv(cls, path) -> "DecreasingProfile":
        s, lv = _read_two_columns(path, ("s", "level"))
        return cls(np.concatenate([[0.0], s]), lv)


def profile_sum(a: DecreasingProfile, b: DecreasingProfile) -> DecreasingProfile:
    """Pointwise sum of two step profiles on the union of their breakpoints."""
    if not np.isclose(a.measure, b.measure, rtol=1e-12, atol=0):
        raise ValueError("profiles live on different measures")
    s = np.union1d(a.breakpoints[:-1], b.breakpoints[:-1])
    s = np.append(s, a.measure)
    # merge near-duplicate breakpoints created by rounding
    keep = np.concatenate([[True], np.diff(s) > 1e-14 * a.measure])
    s = s[keep]
    if s[-1] != a.measure:
        s[-1] = a.measure
    mids = 0.5 * (s[:-1] + s[1:])
    levels = a(mids) + b(mids)
    # rounding can break monotonicity by an ulp
    levels = np.minimum.accumulate(levels)
    return DecreasingProfile(s, levels)


@dataclass(frozen=True)
class RadialProfile:
    """Piecewise-linear function of the mass coordinate s = omega_N |x|^N."""

    s_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        s = np.array(self.s_grid, dtype=float)
        v = np.array(self.values, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or len(s) < 2:
            raise ValueError("s_grid and values must be 1-d of equal length >= 2")
        if s[0] != 0.0 or np.any(np.diff(s) < 0) or s[-1] <= 0:
            raise ValueError("s_grid must start at 0 and be nondecreasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        s.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "s_grid", s)
        object.__setattr__(self, "values", v)

    @property
    def measure(self) -> float:
        return float(self.s_grid[-1])

    def __call__(self, s):
        return np.interp(s, self.s_grid, self.values)

    def is_nonincreasing(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values) <= atol))

    def node_concentration(self) -> np.ndarray:
        """Trapezoid integral from 0 to each node (exact for the linear interpolant)."""
        out = np.zeros(len(self.s_grid))
        out[1:] = np.cumsum(0.5 * (self.values[1:] + self.values[:-1]) * np.diff(self.s_grid))
        return out

    def concentration_at(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.measure)
        sg, v = self.s_grid, self.values
        cum = self.node_concentration()
        idx = np.clip(np.searchsorted(sg, s, side="right") - 1, 0, len(sg) - 2)
        ds = s - sg[idx]
        width = sg[idx + 1] - sg[idx]
        slope = np.divide(v[idx + 1] - v[idx], width, out=np.zeros_like(ds), where=width > 0)
        return cum[idx] + v[idx] * ds + 0.5 * slope * ds**2

    def to_decreasing(self) -> DecreasingProfile:
        """Step profile of interval means; concentrations agree at every node."""
        sg, v = self.s_grid, self.values
        width = np.diff(sg)
        keep = width > 0
        levels = 0.5 * (v[1:] + v[:-1])[keep]
        levels = np.minimum.accumulate(np.maximum(levels, 0.0))
        return DecreasingProfile(np.concatenate([[0.0], sg[1:][keep]]), levels)

    def l2_norm_squared(self) -> float:
        """Integral of value^2 over [0, |Omega|] for the linear interpolant."""
        a, b = self.values[:-1], self.values[1:]
        return float(np.sum((a * a + a * b + b * b) / 3.0 * np.diff(self.s_grid)))

    def gradient_energy(self, pbar: float, dim: int) -> float:
        """Integral of |grad u|^pbar over the ball, via the chain rule through s."""
        from .aniso_core import unit_ball_volume

        sg, v = self.s_grid, self.values
        width = np.diff(sg)
        keep = width > 0
        slope = np.abs(np.diff(v)[keep] / width[keep])
        e = pbar * (dim - 1) / dim + 1.0
        lo, hi = sg[:-1][keep], sg[1:][keep]
        weight = (hi**e - lo**e) / e
        c = (dim * unit_ball_volume(dim) ** (1.0 / dim)) ** pbar
        return float(c * np.sum(slope**pbar * weight))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "value"])
            for s, v in zip(self.s_grid, self.values):
                w.writerow([repr(float(s)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "RadialProfile":
        s, v = _read_two_columns(path, ("s", "value"))
        return cls(s, v)


def _read_two_columns(path, header: tuple[str, str]) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or tuple(c.strip() for c in rows[0]) != header:
        raise ValueError(f"{Path(path)}: expected header {','.join(header)}")
    data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
    if data.size == 0:
        raise ValueError(f"{Path(path)}: no data rows")
    return data[:, 0], data[:, 1]
