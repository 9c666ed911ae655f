"""Special-function kernels for the closed-form spectral efficiency.

The interference functional of a Poisson cellular downlink under Rayleigh
fading reduces to the Gauss hypergeometric special case

    2F1(-2/beta, 1; 1 - 2/beta; -gamma),    beta > 2, gamma >= 0,

whose value minus one equals the classic coverage integral

    rho(gamma, beta) = gamma^(2/beta) * int_{gamma^(-2/beta)}^inf
                       (1 + u^(beta/2))^(-1) du.

This module evaluates the hypergeometric family by direct series for small
arguments and by a Pfaff transformation for large ones, and provides an
independent quadrature oracle used by the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.integrate import quad


class SeriesConvergenceError(ArithmeticError):
    """Series did not converge within the term budget.

    Carries the partial sum accumulated so far in ``partial``.
    """

    def __init__(self, message: str, partial: float):
        super().__init__(message)
        self.partial = partial


class QuadratureError(ArithmeticError):
    """Numerical quadrature failed to reach the requested accuracy."""


@dataclass(frozen=True)
class SpecFunConfig:
    """Tolerances and budgets for the special-function kernels.

    series_tol   relative truncation tolerance of the power series
    max_terms    hard cap on summed terms before giving up
    quad_points  subdivision budget of the quadrature oracle
    """

    series_tol: float = 1e-14
    max_terms: int = 200_000
    quad_points: int = 20_000

    def __post_init__(self):
        if not 0.0 < self.series_tol < 1e-3:
            raise ValueError(f"series_tol must lie in (0, 1e-3), got {self.series_tol}")
        if self.max_terms < 100:
            raise ValueError(f"max_terms must be >= 100, got {self.max_terms}")
        if self.quad_points <= 0:
            raise ValueError(f"quad_points must be positive, got {self.quad_points}")


DEFAULT_CONFIG = SpecFunConfig()

# Direct series diverges as |gamma| -> 1; switch to the Pfaff branch early.
_SERIES_SWITCH = 0.9


def _check_domain(gamma: float, beta: float) -> None:
    if beta <= 2.0:
        raise ValueError(f"path-loss exponent must exceed 2, got beta={beta}")
    if gamma < 0.0:
        raise ValueError(f"threshold must be nonnegative, got gamma={gamma}")


def _upsilon_series(gamma: float, delta: float, cfg: SpecFunConfig) -> float:
    # 2F1(-d,1;1-d;-g) - 1 = d * sum_{k>=1} (-1)^(k+1) g^k / (k - d),
    # from the Pochhammer ratio (-d)_k (1)_k / ((1-d)_k k!) = -d/(k-d).
    total = 0.0
    power = 1.0
    for k in range(1, cfg.max_terms + 1):
        power *= -gamma
        term = -delta * power / (k - delta)
        total += term
        if abs(term) <= cfg.series_tol * max(abs(total), 1e-300):
            return total
    raise SeriesConvergenceError(
        f"series for gamma={gamma} did not converge in {cfg.max_terms} terms",
        partial=total,
    )


def _upsilon_pfaff(gamma: float, delta: float, cfg: SpecFunConfig) -> float:
    # Pfaff: 2F1(-d,1;1-d;-g) = (1+g)^(-1) 2F1(1,1;1-d; g/(1+g)).
    # The transformed series has all-positive terms c_k = k!/(1-d)_k w^k.
    w = gamma / (1.0 + gamma)
    term = 1.0
    total = 1.0
    for k in range(1, cfg.max_terms + 1):
        term *= w * k / (k - delta)
        total += term
        if term <= cfg.series_tol * total:
            return (total - (1.0 + gamma)) / (1.0 + gamma)
    raise SeriesConvergenceError(
        f"Pfaff series for gamma={gamma} did not converge in {cfg.max_terms} terms",
        partial=(total - (1.0 + gamma)) / (1.0 + gamma),
    )


def upsilon(gamma_i: float, beta: float, cfg: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """Interference functional 2F1(-2/beta, 1; 1-2/beta; -gamma_i) - 1 >= 0.

    Evaluated without cancellation for small thresholds (direct series) and
    through the Pfaff transformation for gamma_i >= 0.9 where the direct
    series diverges.
    """
    _check_domain(gamma_i, beta)
    delta = 2.0 / beta
    if gamma_i == 0.0:
        return 0.0
    if gamma_i < _SERIES_SWITCH:
        return _upsilon_series(gamma_i, delta, cfg)
    return _upsilon_pfaff(gamma_i, delta, cfg)


def gauss_2f1_slice(beta: float, gamma: float, cfg: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """2F1(-2/beta, 1; 1-2/beta; -gamma) for beta > 2, gamma >= 0 (linear scale)."""
    return 1.0 + upsilon(gamma, beta, cfg)


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if x <= 0.0:
        raise ValueError(f"ln_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def upsilon_oracle(gamma_i: float, beta: float, cfg: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """Quadrature evaluation of the coverage integral rho(gamma_i, beta).

    The substitution v = u^(-beta/2) maps the semi-infinite integral onto

        rho = delta * gamma^delta * int_0^gamma v^(-delta) / (1+v) dv,

    whose endpoint singularity an algebraic-weight rule integrates to near
    machine precision. Independent of the series implementation; intended
    for tests.
    """
    if gamma_i <= 0.0:
        raise ValueError(f"oracle requires gamma_i > 0, got {gamma_i}")
    if beta <= 2.0:
        raise ValueError(f"path-loss exponent must exceed 2, got beta={beta}")
    delta = 2.0 / beta
    limit = max(10, cfg.quad_points // 100)
    value, abserr = quad(
        lambda v: 1.0 / (1.0 + v),
        0.0,
        gamma_i,
        weight="alg",
        wvar=(-delta, 0.0),
        epsabs=0.0,
        epsrel=1e-13,
        limit=limit,
    )
    result = delta * gamma_i**delta * value
    if abserr > 1e-9 * max(abs(value), 1e-300):
        raise QuadratureError(
            f"quadrature error {abserr:.3e} too large for gamma={gamma_i}, beta={beta}"
        )
    return result


def upsilon_oracle_raw(gamma_i: float, beta: float, cfg: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """Coverage integral in its raw semi-infinite form, for cross-checking.

    gamma^delta * int_{gamma^(-delta)}^inf (1 + u^(beta/2))^(-1) du with
    delta = 2/beta. Less robust than ``upsilon_oracle`` for tiny gamma,
    where the lower limit explodes; used to cross-validate the substituted
    form at moderate arguments.
    """
    if gamma_i <= 0.0:
        raise ValueError(f"oracle requires gamma_i > 0, got {gamma_i}")
    if beta <= 2.0:
        raise ValueError(f"path-loss exponent must exceed 2, got beta={beta}")
    delta = 2.0 / beta
    limit = max(10, cfg.quad_points // 100)
    lower = gamma_i ** (-delta)
    value, abserr = quad(
        lambda u: 1.0 / (1.0 + u ** (beta / 2.0)),
        lower,
        math.inf,
        epsabs=0.0,
        epsrel=1e-12,
        limit=limit,
    )
    result = gamma_i**delta * value
    if abserr > 1e-8 * max(abs(value), 1e-300):
        raise QuadratureError(
            f"quadrature error {abserr:.3e} too large for gamma={gamma_i}, beta={beta}"
        )
    return result
