"""Closed-form charged SYK and Brownian SYK scrambling rates.

All quantities depend on the chemical potential only through
``c = cosh(mu/2)``; ``nbar = 1 / (1 + e^mu)`` and ``4 nbar (1 - nbar) = 1 / c^2``.

regular   Gamma = J / (sqrt(q-1) (2c)^((q-2)/2))
          R(0)  = 2 (q-1) J^2 / ((q-2) Gamma (2c)^(q-2))
brownian  Gamma = J / (2^(q-1) c^(q-2))
          R(0)  = (q-1) J / (2c)^(q-2)

In both cases ``lambda = R(0) - 2 Gamma``.  On a lattice with hopping weight
``b`` the rate acquires ``lambda(p) = lambda(0) - b R(0) p^2`` and the
butterfly velocity is ``v_B = sqrt(4 b lambda(0) R(0))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate

__all__ = [
    "SykParams",
    "DivergenceError",
    "gamma",
    "rung_zero",
    "lyapunov",
    "butterfly",
    "lattice_structure_factor",
    "density_bounds",
    "g_product",
    "rung_time",
    "quadrature_check",
    "evaluate",
    "nbar_from_mu",
    "mu_from_nbar",
]

BROWNIAN_PREFACTOR_NOTE = (
    "lambda = R(0) - 2 Gamma = (q-2) J / (2 cosh(mu/2))^(q-2); a prefactor smaller by "
    "2^(q-2) is sometimes quoted for this quantity, the mu-dependence is the same"
)


class DivergenceError(ValueError):
    pass


def nbar_from_mu(mu: float) -> float:
    # logistic form that stays finite for large |mu|
    if mu >= 0:
        e = math.exp(-mu)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(mu))


def mu_from_nbar(nbar: float) -> float:
    if not 0.0 < nbar < 1.0:
        raise ValueError(f"nbar must lie in (0, 1), got {nbar}")
    return math.log((1.0 - nbar) / nbar)


@dataclass(frozen=True)
class SykParams:
    variant: str
    q: int
    J: float = 1.0
    mu: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.variant not in ("regular", "brownian"):
            raise ValueError("variant must be 'regular' or 'brownian'")
        if self.q % 2 or self.q < 4:
            raise ValueError(f"q must be even and >= 4, got {self.q}")
        if not self.J > 0:
            raise ValueError("J must be positive")
        if not 0.0 <= self.b <= 0.5:
            raise ValueError("hopping weight b must lie in [0, 1/2]")

    @property
    def nbar(self) -> float:
        return nbar_from_mu(self.mu)

    @property
    def cosh_half(self) -> float:
        try:
            return math.cosh(self.mu / 2)
        except OverflowError:
            return math.inf


def gamma(p: SykParams) -> float:
    c, q = p.cosh_half, p.q
    if p.variant == "regular":
        return p.J / (math.sqrt(q - 1) * (2 * c) ** ((q - 2) / 2))
    return p.J / (2 ** (q - 1) * c ** (q - 2))


def rung_zero(p: SykParams) -> float:
    c, q = p.cosh_half, p.q
    if p.variant == "brownian":
        return (q - 1) * p.J / (2 * c) ** (q - 2)
    g = gamma(p)
    if not g > 0:
        raise DivergenceError("R(0) diverges for vanishing Gamma")
    return 2 * (q - 1) * p.J ** 2 / ((q - 2) * g * (2 * c) ** (q - 2))


def lyapunov(p: SykParams) -> float:
    return rung_zero(p) - 2 * gamma(p)


def lattice_structure_factor(p: SykParams, momentum: float) -> float:
    """Full ``S(p) = 1 - 2b(1 - cos p)``; only its small-``p`` form enters ``v_B``."""
    return 1.0 - 2.0 * p.b * (1.0 - math.cos(momentum))


def butterfly(p: SykParams):
    """``(lambda(p) callable, v_B)``."""
    lam0 = lyapunov(p)
    r0 = rung_zero(p)

    def lam(momentum: float) -> float:
        return lam0 - p.b * r0 * momentum ** 2

    if p.b == 0:
        return lam, 0.0
    if lam0 <= 0:
        raise ValueError("butterfly velocity undefined for non-positive lambda(0)")
    return lam, math.sqrt(4 * p.b * lam0 * r0)


def density_bounds(nbar: float, q: int, lambda_star: float) -> dict:
    if not 0.0 < nbar < 1.0:
        raise ValueError(f"nbar must lie in (0, 1), got {nbar}")
    if not lambda_star > 0:
        raise ValueError("lambda_star must be positive")
    if q % 2 or q < 4:
        raise ValueError(f"q must be even and >= 4, got {q}")
    x = 4 * nbar * (1 - nbar)
    return {
        "universal": math.sqrt(x) * lambda_star,
        "q_body": x ** ((q - 2) / 4) * lambda_star,
        "exponents": {"quantum": (q - 2) / 4, "classical": (q - 2) / 2},
    }


def g_product(p: SykParams, t: float) -> float:
    """Quasiparticle product ``G(t) G(-t) ~ e^{-2 Gamma |t|} / (4 cosh^2(mu/2))``."""
    return math.exp(-2 * gamma(p) * abs(t)) / (4 * p.cosh_half ** 2)


def rung_time(p: SykParams, t: float) -> float:
    g = gamma(p)
    return (p.q - 1) * p.J ** 2 * math.exp(-(p.q - 2) * g * abs(t)) / (2 * p.cosh_half) ** (p.q - 2)


def quadrature_check(p: SykParams) -> dict:
    """Integrate the time-domain rung over the real line and compare with ``R(0)``."""
    if p.variant != "regular":
        raise ValueError("quadrature check applies to the regular variant")
    g = gamma(p)
    if not g > 0:
        raise DivergenceError("Gamma vanishes; the rung integral diverges")
    cut = 50.0 / ((p.q - 2) * g)
    half, err = integrate.quad(lambda t: rung_time(p, t), 0.0, cut, epsabs=1e-12, epsrel=1e-12, limit=200)
    numeric = 2 * half
    analytic = rung_zero(p)
    return {
        "numeric": numeric,
        "analytic": analytic,
        "rel_error": abs(numeric - analytic) / analytic,
        "quad_error_estimate": 2 * err,
        "cutoff": cut,
        "g_product_t0": g_product(p, 0.0),
    }


def evaluate(p: SykParams) -> dict:
    """JSON-ready summary of the closed-form results for ``p``."""
    g = gamma(p)
    r0 = rung_zero(p)
    lam = r0 - 2 * g
    flags = {"prefactor_trusted": p.variant == "brownian", "ratios_trusted": True,
             "negative_lambda": lam < 0}
    if p.variant == "brownian":
        flags["brownian_prefactor_note"] = BROWNIAN_PREFACTOR_NOTE
    vb = None
    if p.b == 0:
        vb = 0.0
    elif lam > 0:
        vb = butterfly(p)[1]
    exponent = (p.q - 2) / 2 if p.variant == "brownian" else (p.q - 2) / 4
    return {
        "variant": p.variant, "q": p.q, "J": p.J, "mu": p.mu, "nbar": p.nbar, "b": p.b,
        "Gamma": g, "R0": r0, "lambda": lam, "v_B": vb,
        "density_exponent": exponent, "flags": flags,
    }
