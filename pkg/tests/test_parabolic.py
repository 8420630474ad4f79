import math

import numpy as np
import pytest

from anisoparab.aniso_core import AnisotropicCoefficients
from anisoparab.elliptic import EllipticProblem, solve_elliptic
from anisoparab.harness import concentration_excess
from anisoparab.parabolic import (
    ParabolicScenario,
    StepFailure,
    SymmetrizedScenario,
    TimeGrid,
    advance_anisotropic,
    advance_symmetrized,
    energy_monitor,
    load_trajectory,
    save_trajectory,
    source_time_average,
    symmetrize,
)
from anisoparab.profiles import DecreasingProfile, GridFunction, RadialProfile
from anisoparab.radial import mass_grid

from conftest import bump
from test_elliptic import dense_laplacian

P22 = AnisotropicCoefficients((1, 1), (2, 2))
P153 = AnisotropicCoefficients((1, 1), (1.5, 3))


def test_time_grid():
    tg = TimeGrid.uniform(2.0, 8)
    assert tg.M == 8 and tg.delta == pytest.approx(0.25)
    tg2 = TimeGrid(np.array([0, 0.1, 0.5, 0.6]))
    assert tg2.delta == pytest.approx(0.4) and tg2.step(2) == pytest.approx(0.4)
    for bad in ([0.1, 0.2], [0, 0.2, 0.2], [0]):
        with pytest.raises(ValueError):
            TimeGrid(np.array(bad, dtype=float))
    with pytest.raises(ValueError):
        TimeGrid.uniform(0.0, 3)


def test_source_time_average():
    base = GridFunction.from_function(lambda x, y: x + 2 * y, 4, 3)
    const = lambda t: base
    np.testing.assert_array_equal(source_time_average(const, 0.2, 0.7, 4, base).values, base.values)
    lin = lambda t: base.with_values(base.values * t)
    avg = source_time_average(lin, 0.0, 1.0, 4, base)
    np.testing.assert_allclose(avg.values, base.values / 2, rtol=1e-15)
    assert not np.any(source_time_average(None, 0, 1, 4, base).values)
    with pytest.raises(ValueError):
        source_time_average(const, 1.0, 1.0, 4, base)
    with pytest.raises(ValueError):
        source_time_average(const, 0.0, 1.0, 0, base)


def scenario(coeffs, u0, T=0.5, M=5, source=None, **kw):
    return ParabolicScenario(coeffs, u0, TimeGrid.uniform(T, M), source=source, **kw)


def test_zero_data_stays_zero():
    z = GridFunction.zeros(6, 6, 1 / 6, 1 / 6)
    rec = advance_anisotropic(scenario(P153, z))
    assert all(not np.any(u.values) for u in rec.states)
    led = energy_monitor(rec)
    assert led.sup_l2_sq == 0 and led.total_grad_energy == 0 and led.bound == 0
    assert all(v == 0 for v in led.step_lhs + led.step_rhs)
    sym = advance_symmetrized(symmetrize(scenario(P153, z)))
    assert all(not np.any(v.values) for v in sym.states)


def test_linear_step_matches_implicit_euler(rng):
    n = 8
    u0 = GridFunction(n, n, 1 / n, 1 / n, rng.normal(size=(n, n)))
    f = u0.with_values(rng.normal(size=(n, n)))
    tau = 0.03
    rec = advance_anisotropic(ParabolicScenario(P22, u0, TimeGrid(np.array([0.0, tau, 2 * tau])), source=lambda t: f))
    A = dense_laplacian(n, n, u0.hx, u0.hy) + np.eye(n * n) / tau
    u = u0.values.ravel()
    for m in (1, 2):
        u = np.linalg.solve(A, u / tau + f.values.ravel())
        assert np.max(np.abs(rec.states[m].values.ravel() - u)) <= 1e-8


def test_long_time_approaches_stationary():
    n = 12
    one = GridFunction.from_function(lambda x, y: np.ones_like(x), n, n)
    w_inf, _ = solve_elliptic(EllipticProblem(P153, 0.0, one, allow_zero_lambda=True))
    u0 = GridFunction.zeros(n, n, 1 / n, 1 / n)
    errs = []
    for T in (0.05, 0.2, 0.8):
        rec = advance_anisotropic(ParabolicScenario(P153, u0, TimeGrid.uniform(T, int(T / 0.025)), source=lambda t: one))
        errs.append(rec.states[-1].with_values(rec.states[-1].values - w_inf.values).l2_norm())
    assert errs[0] > errs[1] > errs[2]


def test_dissipation_without_source():
    u0 = GridFunction.from_function(bump(0.4, 0.55, 0.3), 16, 16)
    rec = advance_anisotropic(scenario(P153, u0, T=0.2, M=10))
    rows = rec.ledger
    for prev, cur in zip(rows, rows[1:]):
        lhs = cur["l2_sq"] + cur["tau"] * (cur["grad_0"] + cur["grad_1"])
        assert lhs <= prev["l2_sq"] + 1e-12
        assert cur["l2"] <= prev["l2"] + 1e-12
    led = energy_monitor(rec)
    assert led.finite and led.max_step_excess <= 1e-12


def test_energy_ledger_with_source():
    u0 = GridFunction.from_function(bump(), 12, 12)
    one = u0.with_values(np.ones((12, 12)))
    rec = advance_anisotropic(scenario(P153, u0, T=0.3, M=6, source=lambda t: one))
    led = energy_monitor(rec)
    assert led.finite
    assert led.max_step_excess <= 1e-10
    assert 0.5 * rec.ledger[-1]["l2_sq"] + led.total_grad_energy <= led.bound + 1e-10
    with pytest.raises(ValueError):
        energy_monitor(advance_symmetrized(symmetrize(scenario(P153, u0, T=0.3, M=2))))


def test_step_failure_carries_index(monkeypatch):
    import anisoparab.parabolic as par
    from anisoparab.elliptic import ConvergenceError

    calls = {"n": 0}
    real = par.solve_elliptic

    def flaky(prob, **kw):
        calls["n"] += 1
        if calls["n"] == 3:
            raise ConvergenceError("boom")
        return real(prob, **kw)

    monkeypatch.setattr(par, "solve_elliptic", flaky)
    u0 = GridFunction.from_function(bump(), 6, 6)
    with pytest.raises(StepFailure) as exc:
        advance_anisotropic(scenario(P22, u0))
    assert exc.value.step == 3


def test_step_data_validation():
    u0 = GridFunction.zeros(4, 4, 0.25, 0.25)
    with pytest.raises(ValueError):
        ParabolicScenario(P22, u0, TimeGrid.uniform(1, 3), step_data=[u0])
    with pytest.raises(ValueError):
        ParabolicScenario(P22, u0, TimeGrid.uniform(1, 1), step_data=[GridFunction.zeros(3, 3, 1, 1)])


def radial_heat_reference(v0, T, M, R, n_cells=2000):
    """Implicit Euler for v_t = Lap v on the disk, finite volumes in r."""
    from scipy.linalg import solve_banded

    h = R / n_cells
    rc = (np.arange(n_cells) + 0.5) * h
    rf = np.arange(n_cells + 1) * h
    tau = T / M
    ab = np.zeros((3, n_cells))
    ab[1] = rc * h / tau
    ab[1, 1:] += rf[1:-1] / h
    ab[1, :-1] += rf[1:-1] / h
    ab[1, -1] += rf[-1] / (h / 2)
    ab[0, 1:] = -rf[1:-1] / h
    ab[2, :-1] = -rf[1:-1] / h
    v = v0(rc)
    out = [v]
    for _ in range(M):
        v = solve_banded((1, 1), ab, rc * h / tau * v)
        out.append(v)
    return rc, out


def test_symmetrized_matches_radial_heat():
    measure = math.pi
    v0 = lambda r: np.cos(np.pi * r / 2) ** 2 * (1 - r / 2)
    s = mass_grid(measure, 3000)
    prof = RadialProfile(s, v0(np.sqrt(s / math.pi)))
    T, M = 0.1, 10
    zero = DecreasingProfile.constant(0.0, measure)
    sym = SymmetrizedScenario(1.0, 2.0, 2, measure, prof, [zero] * M, TimeGrid.uniform(T, M))
    rec = advance_symmetrized(sym)
    rc, ref = radial_heat_reference(v0, T, M, 1.0)
    for m in range(M + 1):
        got = rec.states[m](math.pi * rc**2)
        assert np.max(np.abs(got - ref[m])) <= 1e-3


def test_dominating_source_gives_dominating_trajectory():
    n = 10
    u0 = GridFunction.from_function(bump(0.45, 0.5, 0.3), n, n)
    f = u0.with_values(np.where(np.arange(n)[:, None] < 5, 1.0, 0.2) * np.ones((n, n)))
    sc = scenario(P153, u0, T=0.2, M=4, source=lambda t: f)
    plain = advance_symmetrized(symmetrize(sc))
    fstar = DecreasingProfile(np.array([0.0, 0.5, 1.0]), np.array([1.5, 0.2]))
    dominated = advance_symmetrized(symmetrize(sc, dominating_source=fstar))
    for v, vt in zip(plain.states, dominated.states):
        assert concentration_excess(v, vt)[0] <= 1e-12


def test_trajectory_round_trip(tmp_path):
    u0 = GridFunction.from_function(bump(), 8, 8)
    sc = scenario(P153, u0, T=0.1, M=3)
    a = advance_anisotropic(sc)
    v = advance_symmetrized(symmetrize(sc))
    save_trajectory(a, tmp_path / "a")
    save_trajectory(v, tmp_path / "v")
    a2 = load_trajectory(tmp_path / "a")
    v2 = load_trajectory(tmp_path / "v")
    assert a2.kind == "anisotropic" and v2.kind == "symmetrized"
    np.testing.assert_array_equal(a2.times, a.times)
    for x, y in zip(a.states, a2.states):
        np.testing.assert_array_equal(x.values, y.values)
    for x, y in zip(v.states, v2.states):
        np.testing.assert_array_equal(x.values, y.values)
    assert a2.ledger[2]["l2"] == a.ledger[2]["l2"]
