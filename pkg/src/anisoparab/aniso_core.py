"""Anisotropic structural data for the model operator sum_i (alpha_i |u_i|^{p_i-2} u_i)_i.

The Young function is Phi(xi) = sum_i alpha_i |xi_i|^{p_i}; its Klimov
symmetrization is the power function Lambda |xi|^pbar, where pbar is the
harmonic mean of the exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def unit_ball_volume(dim: int) -> float:
    """Lebesgue measure of the unit ball in R^dim."""
    return math.pi ** (dim / 2) / math.gamma(1 + dim / 2)


def harmonic_mean(exponents: Sequence[float]) -> float:
    """Return pbar with 1/pbar = (1/N) sum 1/p_i."""
    ps = [float(p) for p in exponents]
    if not ps:
        raise ValueError("exponents must be nonempty")
    if any(not math.isfinite(p) or p < 1 for p in ps):
        raise ValueError(f"exponents must be finite and >= 1, got {ps}")
    return len(ps) / math.fsum(1.0 / p for p in ps)


def _conj_factor(p: float) -> float:
    # p^{1/p} (p')^{1/p'} Gamma(1 + 1/p'), with the p = 1 limit p' = inf.
    if p == 1.0:
        return 1.0
    pc = p / (p - 1.0)
    return p ** (1.0 / p) * pc ** (1.0 / pc) * math.gamma(1.0 + 1.0 / pc)


def lambda_constant(alphas: Sequence[float], exponents: Sequence[float], dim: int) -> float:
    """Klimov constant Lambda such that the symmetrization of Phi is Lambda |xi|^pbar."""
    alphas = [float(a) for a in alphas]
    if len(alphas) != len(exponents) or len(alphas) != dim:
        raise ValueError("alphas, exponents and dim must agree")
    if any(not a > 0 for a in alphas):
        raise ValueError("alphas must be positive")
    pbar = harmonic_mean(exponents)
    if pbar <= 1.0:
        raise ValueError(f"harmonic mean must exceed 1, got {pbar}")
    pbar_c = pbar / (pbar - 1.0)
    prefactor = 2.0**pbar * (pbar - 1.0) ** (pbar - 1.0) / pbar**pbar
    prod = math.prod(_conj_factor(float(p)) for p in exponents)
    bracket = prod / (unit_ball_volume(dim) * math.gamma(1.0 + dim / pbar_c))
    weights = math.prod(a ** (1.0 / float(p)) for a, p in zip(alphas, exponents))
    return prefactor * (bracket * weights) ** (pbar / dim)


@dataclass(frozen=True)
class AnisotropicCoefficients:
    """Weights alpha_i and exponents p_i; derived constants are fixed at construction."""

    alphas: tuple[float, ...]
    exponents: tuple[float, ...]
    pbar: float = field(init=False)
    pbar_conj: float = field(init=False)
    lambda_const: float = field(init=False)

    def __post_init__(self) -> None:
        alphas = tuple(float(a) for a in self.alphas)
        exps = tuple(float(p) for p in self.exponents)
        if len(alphas) != len(exps):
            raise ValueError("alphas and exponents must have the same length")
        if len(alphas) < 2:
            raise ValueError("dimension must be at least 2")
        pbar = harmonic_mean(exps)
        if pbar <= 1.0:
            raise ValueError(f"harmonic mean of exponents must exceed 1, got {pbar}")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "pbar", pbar)
        object.__setattr__(self, "pbar_conj", pbar / (pbar - 1.0))
        object.__setattr__(self, "lambda_const", lambda_constant(alphas, exps, len(alphas)))

    @property
    def dim(self) -> int:
        return len(self.alphas)

    def to_dict(self) -> dict:
        return {"alphas": list(self.alphas), "exponents": list(self.exponents)}


@dataclass(frozen=True)
class YoungFunctionPhi:
    coeffs: AnisotropicCoefficients

    def __call__(self, xi) -> float:
        return phi_eval(xi, self)


def phi_eval(xi, phi: YoungFunctionPhi) -> float:
    """Phi(xi) = sum_i alpha_i |xi_i|^{p_i}."""
    xi = np.asarray(xi, dtype=float)
    c = phi.coeffs
    if xi.shape != (c.dim,):
        raise ValueError(f"expected a vector of length {c.dim}, got shape {xi.shape}")
    return float(sum(a * abs(x) ** p for a, p, x in zip(c.alphas, c.exponents, xi)))
