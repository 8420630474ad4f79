"""Scenario configuration: JSON documents, named presets and validation."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aniso_core import AnisotropicCoefficients
from .elliptic import DEFAULT_EPS, DEFAULT_TOL
from .harness import DEFAULT_LORENTZ, DEFAULT_MARGIN_CONSTANT, concentration_excess
from .parabolic import ParabolicScenario, TimeGrid
from .profiles import DecreasingProfile, GridFunction
from .radial import DEFAULT_NODES


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _bump(lx: float, ly: float, radius_frac: float = 0.4):
    r = radius_frac * min(lx, ly)

    def f(x, y):
        q = ((x - lx / 2) ** 2 + (y - ly / 2) ** 2) / r**2
        inside = q < 1.0
        out = np.zeros_like(q)
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside]))
        return out

    return f


def _trig(lx: float, ly: float):
    return lambda x, y: np.sin(np.pi * x / lx) * np.sin(np.pi * y / ly)


_U0_PRESETS = ("zero", "bump", "trig", "random")
_SOURCE_PRESETS = ("zero", "constant", "bump", "ramp")

PRESETS: dict[str, dict] = {
    "zero": {
        "coefficients": {"alphas": [1.0, 1.0], "exponents": [2.0, 2.0]},
        "domain": {"lx": 1.0, "ly": 1.0, "nx": 16, "ny": 16},
        "u0": {"preset": "zero"},
        "source": {"preset": "zero"},
        "time": {"T": 1.0, "M": 10},
    },
    "model-p2": {
        "coefficients": {"alphas": [1.0, 1.0], "exponents": [1.5, 3.0]},
        "domain": {"lx": 1.0, "ly": 1.0, "nx": 64, "ny": 64},
        "u0": {"preset": "bump"},
        "source": {"preset": "constant", "value": 1.0},
        "time": {"T": 1.0, "M": 50},
    },
    "decay-p2": {
        "coefficients": {"alphas": [1.0, 1.0], "exponents": [2.0, 2.0]},
        "domain": {"lx": 1.0, "ly": 1.0, "nx": 32, "ny": 32},
        "u0": {"preset": "random", "seed": 0},
        "source": {"preset": "zero"},
        "time": {"T": 1.0, "M": 100},
        "report": {"decay": True},
    },
}

_DEFAULTS = {
    "tolerances": {"elliptic": DEFAULT_TOL, "radial": 1e-10, "eps": DEFAULT_EPS, "margin": None,
                   "margin_constant": DEFAULT_MARGIN_CONSTANT},
    "report": {"lorentz": [[p, "inf" if math.isinf(q) else q] for p, q in DEFAULT_LORENTZ], "decay": False},
    "radial": {"n_nodes": DEFAULT_NODES},
    "quad_points": 4,
}


def preset_config(name: str, seed: int | None = None) -> dict:
    """A copy of the named preset; ``seed`` overrides the generator seed of random fields."""
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    doc = copy.deepcopy(PRESETS[name])
    doc["name"] = name
    if seed is not None and doc["u0"].get("preset") == "random":
        doc["u0"]["seed"] = int(seed)
    return doc


def _number(doc: dict, key: str, path: str, positive: bool = False, integer: bool = False):
    if key not in doc:
        raise ConfigError(f"{path}.{key}", "missing")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{path}.{key}", "expected an integer")
    if not math.isfinite(v) or (positive and v <= 0):
        raise ConfigError(f"{path}.{key}", f"must be {'positive and ' if positive else ''}finite, got {v!r}")
    return int(v) if integer else float(v)


def _section(doc: dict, key: str, required: bool = True) -> dict:
    v = doc.get(key)
    if v is None:
        if required:
            raise ConfigError(key, "missing")
        return {}
    if not isinstance(v, dict):
        raise ConfigError(key, "expected an object")
    return v


def _exponent(v, path: str) -> float:
    if v in ("inf", "Infinity"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number or 'inf', got {v!r}")
    return float(v)


@dataclass
class ScenarioConfig:
    """A validated scenario document; ``raw`` is the normalized JSON echoed into reports."""

    raw: dict
    base_dir: Path
    coeffs: AnisotropicCoefficients
    lx: float
    ly: float
    nx: int
    ny: int
    T: float
    M: int
    elliptic_tol: float
    radial_tol: float
    eps: float
    margin: float | None
    margin_constant: float
    lorentz: list[tuple[float, float]]
    decay: bool
    n_nodes: int
    quad_points: int

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "expected a JSON object")
        doc = copy.deepcopy(doc)
        for key, default in _DEFAULTS.items():
            if isinstance(default, dict):
                merged = dict(default)
                merged.update(_section(doc, key, required=False))
                doc[key] = merged
            else:
                doc.setdefault(key, default)

        co = _section(doc, "coefficients")
        for key in ("alphas", "exponents"):
            if not isinstance(co.get(key), list) or len(co[key]) != 2:
                raise ConfigError(f"coefficients.{key}", "expected a list of two numbers")
        try:
            coeffs = AnisotropicCoefficients(tuple(co["alphas"]), tuple(co["exponents"]))
        except (TypeError, ValueError) as exc:
            field_name = "coefficients.alphas" if "alpha" in str(exc) else "coefficients.exponents"
            raise ConfigError(field_name, str(exc)) from exc

        dom = _section(doc, "domain")
        lx = _number(dom, "lx", "domain", positive=True)
        ly = _number(dom, "ly", "domain", positive=True)
        nx = _number(dom, "nx", "domain", positive=True, integer=True)
        ny = _number(dom, "ny", "domain", positive=True, integer=True)

        tm = _section(doc, "time")
        T = _number(tm, "T", "time", positive=True)
        M = _number(tm, "M", "time", positive=True, integer=True)

        tol = doc["tolerances"]
        etol = _number(tol, "elliptic", "tolerances", positive=True)
        rtol = _number(tol, "radial", "tolerances", positive=True)
        eps = _number(tol, "eps", "tolerances")
        if eps < 0:
            raise ConfigError("tolerances.eps", "must be nonnegative")
        margin = None if tol.get("margin") is None else _number(tol, "margin", "tolerances")
        if margin is not None and margin < 0:
            raise ConfigError("tolerances.margin", "must be nonnegative")
        mconst = _number(tol, "margin_constant", "tolerances", positive=True)

        rep = doc["report"]
        pq = []
        for i, pair in enumerate(rep.get("lorentz") or []):
            path = f"report.lorentz[{i}]"
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(path, "expected [p, q]")
            p, q = _exponent(pair[0], path + "[0]"), _exponent(pair[1], path + "[1]")
            if not (1.0 <= p < math.inf):
                raise ConfigError(path + "[0]", "p must lie in [1, inf)")
            if not q >= 1.0:
                raise ConfigError(path + "[1]", "q must lie in [1, inf]")
            pq.append((p, q))
        decay = rep.get("decay", False)
        if not isinstance(decay, bool):
            raise ConfigError("report.decay", "expected true or false")
        if decay and (not math.isclose(coeffs.pbar, 2.0, abs_tol=1e-12)):
            raise ConfigError("report.decay", f"decay check needs pbar = 2, got {coeffs.pbar}")

        n_nodes = _number(doc["radial"], "n_nodes", "radial", positive=True, integer=True)
        qp = _number(doc, "quad_points", "<root>", positive=True, integer=True)

        cfg = cls(doc, Path(base_dir), coeffs, lx, ly, nx, ny, T, M, etol, rtol, eps, margin, mconst,
                  pq, decay, n_nodes, qp)
        cfg._validate_fields()
        if decay and cfg.raw["source"].get("preset") != "zero":
            raise ConfigError("report.decay", "decay check needs a zero source")
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        p = Path(path)
        try:
            with open(p) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"{p}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc, base_dir=p.parent)

    # -- fields ---------------------------------------------------------

    def _path(self, v) -> Path:
        p = Path(v)
        return p if p.is_absolute() else self.base_dir / p

    def _validate_fields(self) -> None:
        u0 = _section(self.raw, "u0")
        if "csv" not in u0 and u0.get("preset") not in _U0_PRESETS:
            raise ConfigError("u0.preset", f"expected one of {_U0_PRESETS} or a 'csv' path")
        src = _section(self.raw, "source")
        if "csv_stack" in src:
            if not isinstance(src["csv_stack"], list) or len(src["csv_stack"]) != self.M:
                raise ConfigError("source.csv_stack", f"expected a list of {self.M} CSV paths (one per step)")
        elif src.get("preset") not in _SOURCE_PRESETS:
            raise ConfigError("source.preset", f"expected one of {_SOURCE_PRESETS} or a 'csv_stack'")
        if src.get("preset") in ("constant", "bump", "ramp") and "value" in src:
            _number(src, "value", "source")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def seed(self) -> int | None:
        u0 = self.raw["u0"]
        return int(u0.get("seed", 0)) if u0.get("preset") == "random" else None

    def _grid_field(self, func) -> GridFunction:
        return GridFunction.from_function(func, self.nx, self.ny, self.lx, self.ly)

    def _check_grid(self, g: GridFunction, path: str) -> GridFunction:
        if (g.nx, g.ny) != (self.nx, self.ny) or not (
            math.isclose(g.hx, self.hx, rel_tol=1e-12) and math.isclose(g.hy, self.hy, rel_tol=1e-12)
        ):
            raise ConfigError(path, "CSV field does not match the configured grid")
        if not np.all(np.isfinite(g.values)):
            raise ConfigError(path, "field has non-finite values")
        return g

    def initial_field(self) -> GridFunction:
        u0 = self.raw["u0"]
        if "csv" in u0:
            try:
                g = GridFunction.from_csv(self._path(u0["csv"]))
            except (OSError, ValueError) as exc:
                raise ConfigError("u0.csv", str(exc)) from exc
            return self._check_grid(g, "u0.csv")
        name = u0["preset"]
        amp = float(u0.get("amplitude", 1.0))
        if name == "zero":
            return GridFunction.zeros(self.nx, self.ny, self.hx, self.hy)
        if name == "bump":
            g = self._grid_field(_bump(self.lx, self.ly))
        elif name == "trig":
            g = self._grid_field(_trig(self.lx, self.ly))
        else:
            rng = np.random.default_rng(self.seed)
            g = GridFunction(self.nx, self.ny, self.hx, self.hy, rng.uniform(-1.0, 1.0, (self.nx, self.ny)))
        return g.with_values(amp * g.values)

    def source(self):
        """(sampler, per-step fields): exactly one of the two is not None unless the source is zero."""
        src = self.raw["source"]
        if "csv_stack" in src:
            fields = []
            for i, p in enumerate(src["csv_stack"]):
                path = f"source.csv_stack[{i}]"
                try:
                    fields.append(self._check_grid(GridFunction.from_csv(self._path(p)), path))
                except (OSError, ValueError) as exc:
                    if isinstance(exc, ConfigError):
                        raise
                    raise ConfigError(path, str(exc)) from exc
            return None, fields
        name = src["preset"]
        value = float(src.get("value", 1.0))
        if name == "zero":
            return None, None
        if name == "constant":
            base = self._grid_field(lambda x, y: np.full_like(x, value))
            return (lambda t: base), None
        if name == "bump":
            base = self._grid_field(_bump(self.lx, self.ly))
            base = base.with_values(value * base.values)
            return (lambda t: base), None
        base = self._grid_field(lambda x, y: np.full_like(x, value))
        return (lambda t: base.with_values(t * base.values)), None

    def scenario(self) -> ParabolicScenario:
        sampler, fields = self.source()
        return ParabolicScenario(
            self.coeffs,
            self.initial_field(),
            TimeGrid.uniform(self.T, self.M),
            source=sampler,
            step_data=fields,
            quad_points=self.quad_points,
            eps=self.eps,
            tol=self.elliptic_tol,
        )

    def dominating_profiles(self, scenario: ParabolicScenario) -> tuple[DecreasingProfile | None, DecreasingProfile | None]:
        """Load the optional dominating profiles and check they dominate the actual data."""
        from .rearrange import decreasing_rearrangement

        dom = self.raw.get("dominating") or {}
        if not isinstance(dom, dict):
            raise ConfigError("dominating", "expected an object")
        measure = self.lx * self.ly
        out = []
        for key in ("source_profile", "u0_profile"):
            if dom.get(key) is None:
                out.append(None)
                continue
            path = f"dominating.{key}"
            try:
                prof = DecreasingProfile.from_csv(self._path(dom[key]))
            except (OSError, ValueError) as exc:
                raise ConfigError(path, str(exc)) from exc
            if not math.isclose(prof.measure, measure, rel_tol=1e-9):
                raise ConfigError(path, f"profile measure {prof.measure} differs from |Omega| = {measure}")
            if key == "u0_profile":
                targets = [scenario.u0]
            else:
                targets = [scenario.averaged_source(m) for m in range(1, scenario.time_grid.M + 1)]
            for g in targets:
                d, s = concentration_excess(decreasing_rearrangement(g), prof)
                if d > 1e-12 * max(1.0, prof.total()):
                    raise ConfigError(path, f"profile does not dominate the data (excess {d:.3e} at s={s:.4g})")
            out.append(prof)
        return out[0], out[1]

    def resolved_margin(self, delta: float | None = None) -> float:
        from .harness import default_margin

        if self.margin is not None:
            return self.margin
        d = self.T / self.M if delta is None else delta
        return default_margin(max(self.hx, self.hy), d, self.eps, self.margin_constant)
