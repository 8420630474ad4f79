"""Symmetrized isotropic problem in the mass coordinate s = omega_N |x|^N.

The radially decreasing solution z of

    -div(Lambda |grad z|^{pbar-2} grad z) + lam z = g   in the ball, z = 0 on its boundary

satisfies the fixed-point identity

    z(s) = c * int_s^{|Omega|} sigma^{-pbar'/N'} [G(sigma) - Z(sigma)]_+^{1/(pbar-1)} dsigma

with c = (N omega_N^{1/N})^{-pbar'} Lambda^{-1/(pbar-1)}, G the concentration of g*
and Z(s) = lam * int_0^s z.  The integral is evaluated by product integration:
the bracket is written sigma * q(sigma) with q bounded, q^{1/(pbar-1)} is
interpolated linearly and multiplied by the exact power sigma^e.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .aniso_core import unit_ball_volume
from .elliptic import ConvergenceError
from .profiles import DecreasingProfile, RadialProfile

log = logging.getLogger(__name__)

DEFAULT_NODES = 1000


def mass_grid(measure: float, n_nodes: int = DEFAULT_NODES, refine: int = 12, decades: int = 3) -> np.ndarray:
    """Nodes on [0, measure]: uniform, with the first cell split geometrically over ``decades``."""
    if n_nodes < refine + 3:
        raise ValueError("too few nodes")
    n_uniform = n_nodes - refine
    uni = np.linspace(0.0, measure, n_uniform)
    first = uni[1]
    geo = first * np.logspace(-decades, 0, refine, endpoint=False)
    s = np.concatenate([[0.0], geo, uni[1:]])
    s[-1] = measure
    return s


@dataclass(frozen=True)
class RadialEllipticProblem:
    lambda_const: float
    pbar: float
    lambda0: float
    dim: int
    domain_measure: float
    rhs_profile: DecreasingProfile

    def __post_init__(self) -> None:
        if not self.pbar > 1:
            raise ValueError("pbar must exceed 1")
        if not self.lambda_const > 0:
            raise ValueError("Lambda must be positive")
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be nonnegative")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not math.isclose(self.rhs_profile.measure, self.domain_measure, rel_tol=1e-12):
            raise ValueError("rhs profile measure differs from the domain measure")


@dataclass
class RadialSolveInfo:
    iterations: int
    residual: float
    damping: float
    converged: bool


class _FixedPointMap:
    def __init__(self, prob: RadialEllipticProblem, s: np.ndarray):
        N, pb = prob.dim, prob.pbar
        self.prob = prob
        self.s = s
        self.beta = 1.0 / (pb - 1.0)
        pb_conj = pb / (pb - 1.0)
        n_conj = N / (N - 1.0)
        self.e = self.beta - pb_conj / n_conj
        self.c = (N * unit_ball_volume(N) ** (1.0 / N)) ** (-pb_conj) * prob.lambda_const ** (-self.beta)
        self.G = prob.rhs_profile.concentration_at(s)
        self.g0 = float(prob.rhs_profile.levels[0])
        lo, hi = s[:-1], s[1:]
        h = hi - lo
        e = self.e
        i0 = (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)
        i1 = (hi ** (e + 2) - lo ** (e + 2)) / (e + 2)
        # weights for Q_k and Q_{k+1} of the linear interpolant times sigma^e
        self.w_lo = (hi * i0 - i1) / h
        self.w_hi = (i1 - lo * i0) / h

    def bracket_ratio(self, z: np.ndarray) -> np.ndarray:
        """q = (G - Z)/s on the nodes, with its limit g*(0+) - lam z(0) at s = 0."""
        lam = self.prob.lambda0
        s = self.s
        Z = np.zeros_like(z)
        Z[1:] = lam * np.cumsum(0.5 * (z[1:] + z[:-1]) * np.diff(s))
        q = np.empty_like(z)
        q[0] = self.g0 - lam * z[0]
        q[1:] = (self.G[1:] - Z[1:]) / s[1:]
        return q

    def __call__(self, z: np.ndarray) -> np.ndarray:
        Q = np.maximum(self.bracket_ratio(z), 0.0) ** self.beta
        pieces = self.w_lo * Q[:-1] + self.w_hi * Q[1:]
        out = np.zeros_like(z)
        out[:-1] = self.c * np.cumsum(pieces[::-1])[::-1]
        return out


def _picard(T: _FixedPointMap, z: np.ndarray, tol: float, max_iter: int):
    theta = 1.0
    Tz = T(z)
    res = float(np.max(np.abs(Tz - z)))
    it = 0
    while res > tol and it < max_iter and theta >= 1e-6:
        it += 1
        z_new = (1.0 - theta) * z + theta * Tz
        Tz_new = T(z_new)
        res_new = float(np.max(np.abs(Tz_new - z_new)))
        if res_new > res * (1.0 - 0.25 * theta):
            theta *= 0.5
            continue
        z, Tz, res = z_new, Tz_new, res_new
    return z, Tz, res, it, theta


def _newton(T: _FixedPointMap, z: np.ndarray, tol: float, max_iter: int = 100):
    """Newton on the banded system equivalent to z = T(z).

    Unknowns are nodal z_k and Z_k = lam * int_0^{s_k} z (trapezoid):
        z_k - z_{k+1} - c (w_lo_k phi(q_k) + w_hi_k phi(q_{k+1})) = 0,   z_K = 0,
        Z_0 = 0,   Z_{k+1} - Z_k - lam h_k (z_k + z_{k+1}) / 2 = 0,
    with phi(q) = max(q, 0)^beta.
    """
    s, lam, beta, c = T.s, T.prob.lambda0, T.beta, T.c
    n = len(s)
    h = np.diff(s)

    def unpack(x):
        return x[:n], x[n:]

    def qvals(zz, ZZ):
        q = np.empty(n)
        q[0] = T.g0 - lam * zz[0]
        q[1:] = (T.G[1:] - ZZ[1:]) / s[1:]
        return q

    def F(x):
        zz, ZZ = unpack(x)
        phi = np.maximum(qvals(zz, ZZ), 0.0) ** beta
        r1 = np.empty(n)
        r1[:-1] = zz[:-1] - zz[1:] - c * (T.w_lo * phi[:-1] + T.w_hi * phi[1:])
        r1[-1] = zz[-1]
        r2 = np.empty(n)
        r2[0] = ZZ[0]
        r2[1:] = ZZ[1:] - ZZ[:-1] - lam * h * (zz[:-1] + zz[1:]) / 2
        return np.concatenate([r1, r2])

    def jac(x):
        zz, ZZ = unpack(x)
        q = qvals(zz, ZZ)
        pos = q > 0
        dphi = np.zeros(n)
        # floor keeps the Jacobian finite where the bracket degenerates (beta < 1)
        dphi[pos] = beta * np.maximum(q[pos], q_floor) ** (beta - 1.0)
        # dq/dz_0 = -lam at node 0, dq_k/dZ_k = -1/s_k otherwise
        dq_dz0 = -lam
        dq_dZ = np.zeros(n)
        dq_dZ[1:] = -1.0 / s[1:]
        k = np.arange(n - 1)
        rows, cols, vals = [], [], []

        def add(r, cidx, v):
            rows.append(r)
            cols.append(cidx)
            vals.append(v)

        add(k, k, np.ones(n - 1))
        add(k, k + 1, -np.ones(n - 1))
        # dependence through phi(q_k): q_0 on z_0, q_k (k>=1) on Z_k
        add(k[1:], n + k[1:], -c * T.w_lo[1:] * dphi[1:-1] * dq_dZ[1:-1])
        add(np.array([0]), np.array([0]), np.array([-c * T.w_lo[0] * dphi[0] * dq_dz0]))
        add(k, n + k + 1, -c * T.w_hi * dphi[1:] * dq_dZ[1:])
        add(np.array([n - 1]), np.array([n - 1]), np.array([1.0]))
        add(np.array([n]), np.array([n]), np.array([1.0]))
        add(n + k + 1, n + k + 1, np.ones(n - 1))
        add(n + k + 1, n + k, -np.ones(n - 1))
        add(n + k + 1, k, -lam * h / 2)
        add(n + k + 1, k + 1, -lam * h / 2)
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * n, 2 * n)
        )

    q_floor = 1e-12 * max(abs(T.g0), 1.0)
    Z0 = np.zeros(n)
    Z0[1:] = lam * np.cumsum(h * (z[:-1] + z[1:]) / 2)
    x = np.concatenate([z, Z0])
    r = F(x)
    rn = float(np.max(np.abs(r)))
    for it in range(1, max_iter + 1):
        step = spla.spsolve(jac(x), -r)
        t = 1.0
        while t > 1e-10:
            xt = x + t * step
            rt = F(xt)
            rtn = float(np.max(np.abs(rt)))
            if rtn < (1.0 - 1e-4 * t) * rn or rtn <= 0.1 * tol:
                break
            t *= 0.5
        else:
            break
        x, r, rn = xt, rt, rtn
        zz = unpack(x)[0]
        if float(np.max(np.abs(T(zz) - zz))) <= tol:
            break
    zz = unpack(x)[0]
    Tz = T(zz)
    return zz, Tz, float(np.max(np.abs(Tz - zz))), it


def radial_elliptic_solve(
    prob: RadialEllipticProblem,
    tol: float = 1e-10,
    n_nodes: int = DEFAULT_NODES,
    s_grid: np.ndarray | None = None,
    max_iter: int = 2000,
    initial: np.ndarray | None = None,
    info: list | None = None,
    method: str = "auto",
) -> RadialProfile:
    """Solve z = T(z) on the s-grid; the returned profile is T(z) at the fixed point.

    ``method="picard"``: damped iteration z <- (1-theta) z + theta T(z) from
    ``initial`` (default 0); theta starts at 1 and is halved whenever a step
    fails to shrink the sup-norm residual |T(z) - z| by (1 - theta/4), which
    also breaks the two-cycles created by the positive-part clamp.
    ``method="newton"``: Newton on the equivalent banded system.
    ``method="auto"``: Picard, then Newton from the Picard iterate if Picard
    stalls (large lam makes T strongly antitone).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if method not in ("auto", "picard", "newton"):
        raise ValueError(f"unknown method {method!r}")
    s = mass_grid(prob.domain_measure, n_nodes) if s_grid is None else np.asarray(s_grid, dtype=float)
    T = _FixedPointMap(prob, s)
    z = np.zeros_like(s) if initial is None else np.array(initial, dtype=float)
    theta = 1.0
    it = 0
    if method in ("auto", "picard"):
        z, Tz, res, it, theta = _picard(T, z, tol, max_iter)
    if method == "newton" or (method == "auto" and res > tol):
        log.debug("radial Picard stalled at %.2e after %d iterations; switching to Newton", res if it else np.nan, it)
        z, Tz, res, n_it = _newton(T, z, tol)
        it += n_it
    if info is not None:
        info.append(RadialSolveInfo(it, res, theta, res <= tol))
    if res > tol:
        raise ConvergenceError(f"radial fixed point stalled at residual {res:.3e} after {it} iterations")
    if prob.lambda0 > 0 and prob.rhs_profile.total() > 0 and np.all(T.bracket_ratio(Tz)[1:] <= 0):
        raise RuntimeError("bracket G - Z nonpositive everywhere; inconsistent fixed point")
    # the fixed point of T, not the damped iterate
    return RadialProfile(s, Tz)


def radial_parabolic_step(
    prev: RadialProfile,
    tau: float,
    rhs_profile: DecreasingProfile,
    lambda_const: float,
    pbar: float,
    dim: int,
    tol: float = 1e-10,
    n_nodes: int = DEFAULT_NODES,
    info: list | None = None,
) -> RadialProfile:
    """One implicit-Euler step: lam = 1/tau, data f* + prev/tau (a dominating bound of (f + prev/tau)*)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    data = rhs_profile + prev.to_decreasing().scaled(1.0 / tau)
    prob = RadialEllipticProblem(lambda_const, pbar, 1.0 / tau, dim, rhs_profile.measure, data)
    s = mass_grid(rhs_profile.measure, n_nodes)
    return radial_elliptic_solve(prob, tol, s_grid=s, initial=prev(s), info=info)


def _series_start(mu: np.ndarray, dim: int, r0: float, printed: bool, terms: int = 12):
    """Even power series chi = sum a_j r^{2j}, a_0 = 1, and its derivative at r0."""
    # 2j(2j-1) a_j -+ (N-1) 2j a_j = -mu a_{j-1}
    a = np.ones_like(mu)
    chi = np.ones_like(mu)
    dchi = np.zeros_like(mu)
    for j in range(1, terms + 1):
        denom = 2 * j * (2 * j - dim) if printed else 2 * j * (2 * j + dim - 2)
        a = -mu * a / denom
        chi = chi + a * r0 ** (2 * j)
        dchi = dchi + 2 * j * a * r0 ** (2 * j - 1)
    return chi, dchi


def _shoot(mu: np.ndarray, dim: int, steps: int, printed: bool) -> np.ndarray:
    """Integrate the radial eigen-ODE on [0, 1] for each trial mu; True where chi vanished."""
    # chi'' = -(N-1)/r chi' - mu chi   (standard)  or  +(N-1)/r chi' - mu chi (printed)
    sgn = 1.0 if printed else -1.0
    k = dim - 1.0
    r0 = 0.05
    chi, dchi = _series_start(mu, dim, r0, printed)
    h = (1.0 - r0) / steps
    crossed = np.zeros(mu.shape, dtype=bool)

    def rhs(r, y0, y1):
        return y1, sgn * k / r * y1 - mu * y0

    r = r0
    for _ in range(steps):
        a1, b1 = rhs(r, chi, dchi)
        a2, b2 = rhs(r + h / 2, chi + h / 2 * a1, dchi + h / 2 * b1)
        a3, b3 = rhs(r + h / 2, chi + h / 2 * a2, dchi + h / 2 * b2)
        a4, b4 = rhs(r + h, chi + h * a3, dchi + h * b3)
        chi = chi + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        dchi = dchi + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        r += h
        crossed |= chi <= 0.0
    return crossed


def smallest_dirichlet_eigenvalue(
    radius: float,
    dim: int,
    tol: float = 1e-12,
    steps: int = 500,
    printed_drift: bool = False,
    batch: int = 256,
) -> float:
    """First eigenvalue of -chi'' - (N-1)/r chi' = lam chi, chi'(0) = chi(R) = 0.

    Shooting on the unit interval with classical RK4 started from the regular
    series at small r, then bisection on the onset of a zero of chi in (0, 1]
    (evaluated ``batch`` trial values at a time).  The unit-ball value is
    rescaled by 1/R^2.  ``printed_drift`` flips the sign of the first-order
    term; that equation admits a second solution regular at 0 (of order r^N),
    so the even power-series branch is followed, which exists only for odd N.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if printed_drift and dim % 2 == 0:
        raise ValueError("the printed drift variant has no even series branch for even N")
    lo, hi = 0.0, 1.0
    while not _shoot(np.array([hi]), dim, steps, printed_drift)[0]:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise ConvergenceError("no eigenvalue bracket found")
    for _ in range(20):
        if hi - lo <= tol * hi:
            break
        trial = np.linspace(lo, hi, batch + 2)[1:-1]
        crossed = _shoot(trial, dim, steps, printed_drift)
        first = int(np.argmax(crossed)) if crossed.any() else batch
        lo = trial[first - 1] if first > 0 else lo
        hi = trial[first] if first < batch else hi
    else:
        raise ConvergenceError("eigenvalue bisection did not reach tolerance")
    return float(0.5 * (lo + hi) / radius**2)
