"""Network domain types and the closed-form potential spectral efficiency.

The potential spectral efficiency (PSE, bit/s/m^2) of a Poisson cellular
downlink whose receivers need a minimum detection SNR is

    PSE(P, B, lam_t) = B log2(1+gamma_i) * lam_bs L / (1 + L Y)
                       * [1 - exp(-pi lam_bs (tau_a P / B)^(2/beta) (1 + L Y))]

with L the BS activity factor of the MT/BS density ratio, Y the
interference functional ``upsilon(gamma_i, beta)`` and
tau_a = (kappa gamma_a n0)^(-1) the detection constant. All quantities are
linear SI units; dB/dBm conversions belong to the CLI/config layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .specfun import DEFAULT_CONFIG, SpecFunConfig, ln_gamma, upsilon

__all__ = [
    "NetworkParams",
    "SliceRequest",
    "Allocation",
    "load_factor",
    "cell_load_pmf",
    "cell_load_truncation",
    "pse",
    "pse_grad",
    "pse_no_slicing",
]


@dataclass(frozen=True)
class NetworkParams:
    """Physical and stochastic-geometry constants, all strictly positive.

    lambda_bs  BS density (1/m^2)
    beta       path-loss exponent (> 2)
    kappa      path-loss constant (4 pi / wavelength)^2
    n0         noise power spectral density (W/Hz)
    gamma_i    decoding SIR threshold (linear)
    gamma_a    detection SNR threshold (linear)
    b_tot      total bandwidth budget (Hz)
    p_tot      total transmit power budget (W)
    """

    lambda_bs: float
    beta: float
    kappa: float
    n0: float
    gamma_i: float
    gamma_a: float
    b_tot: float
    p_tot: float

    def __post_init__(self):
        for name in ("lambda_bs", "beta", "kappa", "n0", "gamma_i", "gamma_a", "b_tot", "p_tot"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive and finite, got {value}")
        if self.beta <= 2.0:
            raise ValueError(f"beta must exceed 2, got {self.beta}")
        if not (math.isfinite(self.tau_a) and self.tau_a > 0.0):
            raise ValueError("derived tau_a = 1/(kappa*gamma_a*n0) is not finite and positive")

    @property
    def tau_a(self) -> float:
        """Detection constant (kappa * gamma_a * n0)^(-1)."""
        return 1.0 / (self.kappa * self.gamma_a * self.n0)


@dataclass(frozen=True)
class SliceRequest:
    """One tenant's demand: its MT density and the SLA fraction alpha."""

    tenant_id: str
    lambda_t: float
    alpha: float

    def __post_init__(self):
        if not self.lambda_t > 0.0:
            raise ValueError(f"lambda_t must be positive, got {self.lambda_t}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")


@dataclass(frozen=True)
class Allocation:
    """Per-tenant resource assignment and its resulting spectral efficiency."""

    tenant_id: str
    bandwidth: float
    power: float
    admitted: bool
    achieved_pse: float

    def __post_init__(self):
        if self.bandwidth < 0.0 or self.power < 0.0:
            raise ValueError("bandwidth and power must be nonnegative")
        if self.admitted and not (self.bandwidth > 0.0 and self.power > 0.0):
            raise ValueError("admitted allocation must carry positive bandwidth and power")


def load_factor(ratio):
    """BS activity factor 1 - (1 + ratio/3.5)^(-3.5) in [0, 1)."""
    arr = np.asarray(ratio, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("density ratio must be nonnegative")
    out = -np.expm1(-3.5 * np.log1p(arr / 3.5))
    return float(out) if np.isscalar(ratio) or arr.ndim == 0 else out


def cell_load_pmf(n, ratio: float):
    """Probability that a typical MT shares its cell with n other MTs.

    3.5^3.5 * G(n+4.5) * r^n / (G(3.5) * G(n+1) * (3.5+r)^(n+4.5)),
    computed in log space to stay finite for large n.
    """
    if ratio <= 0.0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    n_arr = np.asarray(n)
    if np.any(n_arr < 0) or not np.issubdtype(n_arr.dtype, np.integer):
        raise ValueError("n must be a nonnegative integer")
    nf = n_arr.astype(float)
    log_p = (
        3.5 * math.log(3.5)
        + _ln_gamma_vec(nf + 4.5)
        - ln_gamma(3.5)
        - _ln_gamma_vec(nf + 1.0)
        + nf * math.log(ratio)
        - (nf + 4.5) * math.log(3.5 + ratio)
    )
    out = np.exp(log_p)
    return float(out) if np.isscalar(n) or n_arr.ndim == 0 else out


def _ln_gamma_vec(x):
    return np.vectorize(ln_gamma, otypes=[float])(x)


def cell_load_truncation(ratio: float, tol: float) -> int:
    """Smallest N with a certified pmf tail bound sum_{n>N} pmf < tol.

    Successive-term ratios pmf(n+1)/pmf(n) = q (n+4.5)/(n+1), q = r/(3.5+r),
    decrease in n; once below 1 the tail is bounded by a geometric series.
    """
    if ratio <= 0.0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    q = ratio / (3.5 + ratio)
    n = 0
    p = cell_load_pmf(0, ratio)
    while True:
        r_next = q * (n + 4.5) / (n + 1.0)
        if r_next < 1.0:
            # tail after n is bounded by p * r_next / (1 - r_next)
            if p * r_next / (1.0 - r_next) < tol:
                return n
        n += 1
        p *= q * (n + 3.5) / n
        if n > 10_000_000:
            raise RuntimeError("tail bound did not certify; tol too small?")


@lru_cache(maxsize=1024)
def _pse_coeffs(params: NetworkParams, lambda_t: float, cfg: SpecFunConfig) -> tuple[float, float, float]:
    """Per-density constants of the PSE: amplitude, exponent coefficient, 2/beta.

    PSE(P, B) = amp * B * (1 - exp(-expo * (P/B)^(2/beta))).
    """
    q = 2.0 / params.beta
    load = load_factor(lambda_t / params.lambda_bs)
    y = upsilon(params.gamma_i, params.beta, cfg)
    denom = 1.0 + load * y
    amp = math.log2(1.0 + params.gamma_i) * params.lambda_bs * load / denom
    expo = math.pi * params.lambda_bs * params.tau_a**q * denom
    return amp, expo, q


def _pse_kernel(amp, expo, q, power, bandwidth):
    power = np.asarray(power, dtype=float)
    bandwidth = np.asarray(bandwidth, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.where(bandwidth > 0.0, power / np.where(bandwidth > 0.0, bandwidth, 1.0), np.inf)
        bracket = np.where(
            power > 0.0,
            -np.expm1(-expo * np.where(power > 0.0, ratio, 1.0) ** q),
            0.0,
        )
    return amp * bandwidth * np.where(bandwidth > 0.0, bracket, 0.0)


def pse(power, bandwidth, lambda_t: float, params: NetworkParams,
        cfg: SpecFunConfig = DEFAULT_CONFIG):
    """Potential spectral efficiency in bit/s/m^2.

    Accepts scalars or broadcastable arrays for power (W) and bandwidth (Hz).
    Zero bandwidth (or zero power) returns 0 by continuity, which keeps the
    optimizer safe on the budget boundary.
    """
    if np.any(np.asarray(power) < 0.0) or np.any(np.asarray(bandwidth) < 0.0):
        raise ValueError("power and bandwidth must be nonnegative")
    if lambda_t < 0.0:
        raise ValueError(f"lambda_t must be nonnegative, got {lambda_t}")
    if lambda_t == 0.0:
        out = np.zeros(np.broadcast(np.asarray(power), np.asarray(bandwidth)).shape)
        return float(out) if out.ndim == 0 else out
    amp, expo, q = _pse_coeffs(params, lambda_t, cfg)
    out = _pse_kernel(amp, expo, q, power, bandwidth)
    return float(out) if out.ndim == 0 else out


def pse_grad(power, bandwidth, lambda_t: float, params: NetworkParams,
             cfg: SpecFunConfig = DEFAULT_CONFIG):
    """Analytic partials (d PSE / d power, d PSE / d bandwidth).

    With X = expo * (P/B)^q and E = exp(-X):
        d/dP = amp * B * E * q * X / P
        d/dB = amp * [(1 - E) - q X E]
    The power partial diverges as P -> 0+ (X ~ P^q with q < 1); the exact
    boundary values returned are +inf at P=0, B>0 and the finite limit amp
    for d/dB at B=0, P>0.
    """
    if lambda_t <= 0.0:
        zero = np.zeros(np.broadcast(np.asarray(power), np.asarray(bandwidth)).shape)
        return (zero + 0.0, zero + 0.0) if zero.ndim else (0.0, 0.0)
    amp, expo, q = _pse_coeffs(params, lambda_t, cfg)
    p = np.asarray(power, dtype=float)
    b = np.asarray(bandwidth, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ratio = np.where(b > 0.0, p / np.where(b > 0.0, b, 1.0), np.inf)
        x = expo * ratio**q
        e = np.exp(-x)
        d_p = np.where(
            b > 0.0,
            np.where(p > 0.0, amp * b * e * q * x / np.where(p > 0.0, p, 1.0), np.inf),
            0.0,
        )
        d_b = np.where(
            b > 0.0,
            amp * ((1.0 - e) - q * x * e),
            np.where(p > 0.0, amp, 0.0),
        )
    if d_p.ndim == 0:
        return float(d_p), float(d_b)
    return d_p, d_b


def pse_no_slicing(params: NetworkParams, requests: Sequence[SliceRequest] | Iterable[SliceRequest],
                   cfg: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """Baseline PSE of the pooled network: full budgets, summed MT densities."""
    requests = list(requests)
    if not requests:
        raise ValueError("pse_no_slicing needs at least one request")
    lambda_tot = sum(r.lambda_t for r in requests)
    return pse(params.p_tot, params.b_tot, lambda_tot, params, cfg)
