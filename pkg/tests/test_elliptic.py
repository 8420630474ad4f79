import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anisoparab.aniso_core import AnisotropicCoefficients
from anisoparab.elliptic import (
    ConvergenceError,
    EllipticProblem,
    discrete_energy,
    euler_lagrange_residual,
    solve_elliptic,
)
from anisoparab.profiles import GridFunction
from anisoparab.rearrange import decreasing_rearrangement

P22 = AnisotropicCoefficients((1, 1), (2, 2))
P153 = AnisotropicCoefficients((1, 1), (1.5, 3))


def dense_laplacian(nx, ny, hx, hy, ax=1.0, ay=1.0):
    """Cell-centred 5-point operator with zero ghost cells, assembled entry by entry."""
    n = nx * ny
    A = np.zeros((n, n))
    for i in range(nx):
        for j in range(ny):
            k = i * ny + j
            A[k, k] = 2 * ax / hx**2 + 2 * ay / hy**2
            if i > 0:
                A[k, k - ny] = -ax / hx**2
            if i < nx - 1:
                A[k, k + ny] = -ax / hx**2
            if j > 0:
                A[k, k - 1] = -ay / hy**2
            if j < ny - 1:
                A[k, k + 1] = -ay / hy**2
    return A


def test_energy_of_zero_and_single_cell():
    g = GridFunction(1, 1, 1.0, 1.0, np.array([[3.0]]))
    prob = EllipticProblem(P22, 1.0, g)
    assert discrete_energy(g.with_values([[0.0]]), prob) == 0.0
    u = 0.7
    assert discrete_energy(g.with_values([[u]]), prob) == pytest.approx(2 * u * u + u * u / 2 - 3 * u)
    w, rep = solve_elliptic(prob)
    assert w.values[0, 0] == pytest.approx(3.0 / 5, abs=1e-12)
    assert rep.converged


def test_energy_shift_in_rhs(rng):
    g = GridFunction(5, 4, 0.2, 0.25, rng.normal(size=(5, 4)))
    U = g.with_values(rng.normal(size=(5, 4)))
    c = 0.3
    j1 = discrete_energy(U, EllipticProblem(P153, 2.0, g))
    j2 = discrete_energy(U, EllipticProblem(P153, 2.0, g.with_values(g.values + c)))
    assert j2 - j1 == pytest.approx(-c * U.values.sum() * U.cell_measure, rel=1e-12)


def test_zero_rhs_gives_zero():
    g = GridFunction.zeros(8, 8, 1 / 8, 1 / 8)
    w, rep = solve_elliptic(EllipticProblem(P153, 1.0, g))
    assert np.all(w.values == 0) and rep.iterations <= 1


@pytest.mark.parametrize("shape", [(8, 8), (7, 5)])
def test_linear_case_matches_dense_solve(rng, shape):
    nx, ny = shape
    g = GridFunction(nx, ny, 1 / nx, 0.7 / ny, rng.normal(size=shape))
    c = AnisotropicCoefficients((1.0, 2.5), (2, 2))
    lam = 1.3
    w, _ = solve_elliptic(EllipticProblem(c, lam, g))
    A = dense_laplacian(nx, ny, g.hx, g.hy, 1.0, 2.5) + lam * np.eye(nx * ny)
    ref = np.linalg.solve(A, g.values.ravel()).reshape(shape)
    assert np.max(np.abs(w.values - ref)) <= 1e-8


def test_energy_decreases_and_residual_small():
    g = GridFunction.from_function(lambda x, y: np.ones_like(x), 24, 24)
    prob = EllipticProblem(P153, 1.0, g)
    w, rep = solve_elliptic(prob, tol=1e-10)
    assert all(b <= a + 1e-13 * abs(a) for a, b in zip(rep.energies, rep.energies[1:]))
    assert rep.energies[-1] < rep.energies[0]
    r = euler_lagrange_residual(w, prob)
    assert np.sqrt(np.sum(r.values**2) * g.cell_measure) <= 1e-10
    assert rep.residual_norm <= 1e-10


@pytest.mark.parametrize("coeffs,ops", [
    (P153, ("flipx", "flipy")),
    (AnisotropicCoefficients((1, 1), (3, 3)), ("flipx", "flipy", "transpose", "rot90")),
])
def test_rearrangement_invariant_under_grid_symmetries(coeffs, ops):
    n = 12
    g = GridFunction.from_function(lambda x, y: 1 + 0.5 * np.sin(3 * x) * np.cos(2 * y) + x, n, n)
    base, _ = solve_elliptic(EllipticProblem(coeffs, 1.0, g))
    ref = decreasing_rearrangement(base).levels
    trans = {"flipx": lambda a: a[::-1], "flipy": lambda a: a[:, ::-1], "transpose": lambda a: a.T, "rot90": np.rot90}
    for op in ops:
        w, _ = solve_elliptic(EllipticProblem(coeffs, 1.0, g.with_values(trans[op](g.values))))
        np.testing.assert_allclose(decreasing_rearrangement(w).levels, ref, atol=1e-9)


def test_constant_rhs_solution_is_symmetric():
    g = GridFunction.from_function(lambda x, y: np.ones_like(x), 10, 10)
    w, _ = solve_elliptic(EllipticProblem(P153, 1.0, g))
    np.testing.assert_allclose(w.values, w.values[::-1], atol=1e-10)
    np.testing.assert_allclose(w.values, w.values[:, ::-1], atol=1e-10)


@given(st.integers(0, 2**32 - 1))
def test_nonnegative_data_gives_nonnegative_solution(seed):
    rng = np.random.default_rng(seed)
    g = GridFunction(6, 6, 1 / 6, 1 / 6, rng.uniform(0, 5, (6, 6)))
    w, _ = solve_elliptic(EllipticProblem(P153, 1.0, g))
    assert np.all(w.values >= -1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(-4, 4).filter(lambda c: abs(c) > 1e-3))
def test_linear_scaling(seed, c):
    rng = np.random.default_rng(seed)
    g = GridFunction(5, 5, 0.2, 0.2, rng.normal(size=(5, 5)))
    w, _ = solve_elliptic(EllipticProblem(P22, 1.0, g))
    wc, _ = solve_elliptic(EllipticProblem(P22, 1.0, g.with_values(c * g.values)))
    np.testing.assert_allclose(wc.values, c * w.values, atol=1e-9 * max(1, abs(c)))


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), st.floats(1.1, 5))
def test_larger_lambda_gives_smaller_solution(seed, lam, factor):
    rng = np.random.default_rng(seed)
    g = GridFunction(6, 6, 1 / 6, 1 / 6, rng.uniform(0, 3, (6, 6)))
    w1, _ = solve_elliptic(EllipticProblem(P153, lam, g))
    w2, _ = solve_elliptic(EllipticProblem(P153, lam * factor, g))
    assert np.all(w2.values <= w1.values + 1e-10)


def test_validation_and_failure_reporting():
    g = GridFunction.from_function(lambda x, y: np.ones_like(x), 6, 6)
    with pytest.raises(ValueError):
        EllipticProblem(P22, 0.0, g)
    EllipticProblem(P22, 0.0, g, allow_zero_lambda=True)
    with pytest.raises(ValueError):
        solve_elliptic(EllipticProblem(P22, 1.0, g), tol=0)
    with pytest.raises(ConvergenceError):
        solve_elliptic(EllipticProblem(P153, 1.0, g), tol=1e-10, max_iter=1)
    _, rep = solve_elliptic(EllipticProblem(P153, 1.0, g), max_iter=1, raise_on_failure=False)
    assert not rep.converged
    with pytest.raises(ValueError):
        discrete_energy(GridFunction.zeros(3, 3, 1, 1), EllipticProblem(P22, 1.0, g))


def test_zero_lambda_torsion_is_positive_and_symmetric():
    g = GridFunction.from_function(lambda x, y: np.ones_like(x), 16, 16)
    w, _ = solve_elliptic(EllipticProblem(P22, 0.0, g, allow_zero_lambda=True))
    assert np.all(w.values > 0)
    np.testing.assert_allclose(w.values, w.values.T, atol=1e-10)


def test_near_unit_exponent_converges_to_rounding_floor():
    rng = np.random.default_rng(7)
    c = AnisotropicCoefficients((2.0, 0.5), (3.0, 1.1))
    for lam in (0.05, 1.0, 50.0):
        g = GridFunction(8, 8, 1 / 8, 1 / 8, rng.uniform(-50, 50, (8, 8)))
        w, rep = solve_elliptic(EllipticProblem(c, lam, g))
        assert rep.converged
        assert rep.residual_norm <= 1e-10 or (rep.limited_by_roundoff and rep.residual_norm <= rep.residual_floor)
