"""Anisotropic elliptic problem with zero-order term, solved by convex energy minimization.

The discrete energy on a cell-centred grid with zero ghost cells is

    J(U) = sum_i (alpha_i/p_i) sum_faces e_i(D_i U) |cell|
           + (lam/2) sum U^2 |cell| - sum g U |cell|

where D_i is the forward difference along axis i.  For p_i < 2 the face
integrand is regularized as (D^2 + eps^2)^{p_i/2} - eps^p_i so that the flux
(D^2 + eps^2)^{(p_i-2)/2} D is smooth; the energy and flux stay consistent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .aniso_core import AnisotropicCoefficients
from .profiles import GridFunction

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-8
DEFAULT_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """Raised when an iterative solve does not reach its tolerance."""


@dataclass(frozen=True)
class EllipticProblem:
    coeffs: AnisotropicCoefficients
    lambda0: float
    rhs: GridFunction
    eps: float = DEFAULT_EPS
    allow_zero_lambda: bool = False

    def __post_init__(self) -> None:
        if self.coeffs.dim != 2:
            raise ValueError("the grid solver is two-dimensional")
        if self.lambda0 < 0 or (self.lambda0 == 0 and not self.allow_zero_lambda):
            raise ValueError("lambda0 must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


@dataclass
class SolveReport:
    iterations: int
    final_energy: float
    residual_norm: float
    converged: bool
    energies: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    # set when tol lies below what double precision can certify and the floor was used instead
    residual_floor: float = 0.0
    limited_by_roundoff: bool = False


@lru_cache(maxsize=16)
def _diff_1d(n: int, h: float) -> sp.csr_matrix:
    # (n+1) faces x n cells; face k sits between cells k-1 and k
    return ((sp.eye(n + 1, n, k=0) - sp.eye(n + 1, n, k=-1)) / h).tocsr()


@lru_cache(maxsize=16)
def difference_operators(nx: int, ny: int, hx: float, hy: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Face-difference matrices for the C-ordered (nx, ny) cell vector."""
    dx = sp.kron(_diff_1d(nx, hx), sp.eye(ny), format="csr")
    dy = sp.kron(sp.eye(nx), _diff_1d(ny, hy), format="csr")
    return dx, dy


def _face_terms(d: np.ndarray, alpha: float, p: float, eps: float):
    """Energy density, flux and curvature of one axis' face integrand."""
    if p < 2.0 and eps > 0:
        r2 = d * d + eps * eps
        energy = alpha / p * (r2 ** (p / 2) - eps**p)
        flux = alpha * r2 ** ((p - 2) / 2) * d
        curv = alpha * r2 ** ((p - 4) / 2) * ((p - 1) * d * d + eps * eps)
    else:
        ad = np.abs(d)
        energy = alpha / p * ad**p
        flux = alpha * ad ** (p - 1) * np.sign(d)
        curv = alpha * (p - 1) * ad ** (p - 2) if p != 2.0 else np.full_like(d, alpha)
    return energy, flux, curv


class _Energy:
    def __init__(self, prob: EllipticProblem):
        g = prob.rhs
        self.prob = prob
        self.cell = g.cell_measure
        self.dx, self.dy = difference_operators(g.nx, g.ny, g.hx, g.hy)
        self.g = g.values.ravel()
        self.axes = list(zip((self.dx, self.dy), prob.coeffs.alphas, prob.coeffs.exponents))

    def value(self, u: np.ndarray) -> float:
        total = 0.0
        for d, a, p in self.axes:
            e, _, _ = _face_terms(d @ u, a, p, self.prob.eps)
            total += float(np.sum(e))
        total += 0.5 * self.prob.lambda0 * float(np.dot(u, u)) - float(np.dot(self.g, u))
        return total * self.cell

    def residual(self, u: np.ndarray) -> np.ndarray:
        """Energy gradient divided by the cell measure (the discrete PDE residual)."""
        r = self.prob.lambda0 * u - self.g
        for d, a, p in self.axes:
            _, flux, _ = _face_terms(d @ u, a, p, self.prob.eps)
            r = r + d.T @ flux
        return r

    def hessian(self, u: np.ndarray, lagged: bool = False) -> sp.csc_matrix:
        """Energy Hessian over the cell measure.

        With ``lagged`` the faces with p < 2 use the secant weight flux/D
        instead of the curvature.  That weight dominates the curvature there,
        so the step cannot overshoot a kink of |D|^p the way Newton does.
        """
        n = u.size
        H = sp.diags(np.full(n, self.prob.lambda0))
        for d, a, p in self.axes:
            du = d @ u
            _, flux, curv = _face_terms(du, a, p, self.prob.eps)
            if lagged and p < 2.0:
                if self.prob.eps > 0:
                    curv = a * (du * du + self.prob.eps**2) ** ((p - 2) / 2)
                else:
                    curv = np.divide(flux, du, out=curv.copy(), where=du != 0)
            H = H + d.T @ sp.diags(curv) @ d
        return sp.csc_matrix(H)

    def dual_norm(self, r: np.ndarray) -> float:
        return float(np.sqrt(np.dot(r, r) * self.cell))

    def residual_floor(self, u: np.ndarray) -> float:
        """Size of the residual that rounding alone produces near u.

        Sums the magnitudes entering each residual component, plus the effect
        of perturbing u by one ulp through the Hessian, times machine epsilon.
        Nearly singular curvature (p_i close to 1 with small eps) makes this
        exceed the usual tolerances.
        """
        acc = self.prob.lambda0 * np.abs(u) + np.abs(self.g) + abs(self.hessian(u)) @ np.abs(u)
        for d, a, p in self.axes:
            _, flux, _ = _face_terms(d @ u, a, p, self.prob.eps)
            acc = acc + abs(d).T @ np.abs(flux)
        return self.dual_norm(np.finfo(float).eps * acc)


def discrete_energy(U: GridFunction, prob: EllipticProblem) -> float:
    if not U.same_grid(prob.rhs):
        raise ValueError("grid mismatch")
    return _Energy(prob).value(U.values.ravel())


def euler_lagrange_residual(U: GridFunction, prob: EllipticProblem) -> GridFunction:
    if not U.same_grid(prob.rhs):
        raise ValueError("grid mismatch")
    r = _Energy(prob).residual(U.values.ravel())
    return U.with_values(r.reshape(U.nx, U.ny))


def _direction(E: _Energy, u: np.ndarray, r: np.ndarray, grad: np.ndarray, lagged: bool) -> np.ndarray:
    try:
        step = spla.spsolve(E.hessian(u, lagged), -r)
        if np.all(np.isfinite(step)) and np.dot(step, grad) < 0:
            return step
    except RuntimeError:
        pass
    log.debug("newton direction rejected; using gradient")
    return -r


def _search(E: _Energy, u, J: float, rn: float, direction, grad):
    """Armijo backtracking; returns (trial, energy, step length, residual norm) or None."""
    slope = float(np.dot(direction, grad))
    t = 1.0
    for _ in range(60):
        trial = u + t * direction
        Jt = E.value(trial)
        if Jt <= J + 1e-4 * t * slope:
            return trial, Jt, t, E.dual_norm(E.residual(trial))
        # below roundoff the energy cannot certify decrease; fall back on the residual
        if abs(Jt - J) <= 1e-13 * max(1.0, abs(J)):
            rt = E.dual_norm(E.residual(trial))
            if rt < rn:
                return trial, Jt, t, rt
        t *= 0.5
    return None


def _better(a, b, J: float) -> bool:
    """Lower energy wins; energies equal to roundoff are ranked by residual."""
    if abs(a[1] - b[1]) <= 1e-13 * max(1.0, abs(J)):
        return a[3] < b[3]
    return a[1] < b[1]


def solve_elliptic(
    prob: EllipticProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
    initial: GridFunction | None = None,
    raise_on_failure: bool = True,
) -> tuple[GridFunction, SolveReport]:
    """Minimize the discrete energy by damped Newton with Armijo backtracking.

    Stops when the cell-weighted l2 norm of the residual is <= ``tol``, or
    <= the rounding floor of the residual when that is larger (flagged in the
    report).  When
    a Newton step needs damping and some p_i < 2, the lagged-weight step is
    also tried and the lower energy wins.  An unusable direction (singular
    factorization, not a descent direction) is replaced by steepest descent.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    E = _Energy(prob)
    grid = prob.rhs
    u = np.zeros(grid.nx * grid.ny) if initial is None else initial.values.ravel().copy()
    J = E.value(u)
    r = E.residual(u)
    rn = E.dual_norm(r)
    report = SolveReport(0, J, rn, rn <= tol, [J], [rn])
    it = 0
    floor = 0.0
    lagged_available = any(p < 2.0 for p in prob.coeffs.exponents)
    while rn > max(tol, floor) and it < max_iter:
        it += 1
        grad = r * E.cell
        best = _search(E, u, J, rn, _direction(E, u, r, grad, False), grad)
        if lagged_available and (best is None or best[2] < 1.0 or best[3] > 0.5 * rn):
            # Newton was damped or slow: compare with the lagged-weight step
            alt = _search(E, u, J, rn, _direction(E, u, r, grad, True), grad)
            if best is None or (alt is not None and _better(alt, best, J)):
                best = alt
        if best is None:
            break
        u, J, _, rn = best
        r = E.residual(u)
        report.energies.append(J)
        report.residuals.append(rn)
        if rn <= 1e-6 and rn > tol:
            floor = E.residual_floor(u)
    report.iterations = it
    report.final_energy = E.value(u)
    report.residual_norm = rn
    report.residual_floor = floor
    report.limited_by_roundoff = tol < rn <= floor
    report.converged = rn <= max(tol, floor)
    if report.limited_by_roundoff:
        log.info("residual %.2e is at the rounding floor %.2e; tol %.1e not certifiable", rn, floor, tol)
    if not report.converged and raise_on_failure:
        raise ConvergenceError(
            f"elliptic solve stopped after {it} iterations with residual {rn:.3e} > {tol:.1e}"
        )
    return grid.with_values(u.reshape(grid.nx, grid.ny)), report
