"""Poisson point process network simulator.

Validates the closed-form spectral efficiency from first principles: BSs
and MTs are dropped as independent homogeneous PPPs, every MT associates
with its lowest-path-loss BS, and the per-MT throughput indicator is the
joint decoding/detection event

    SIR(n+1) >= gamma_i   and   mean-SNR(n+1) >= gamma_a

evaluated with i.i.d. Exp(1) fading per MT-BS pair. A BS transmits only
when at least one MT lies in its cell, so empty cells neither carry
traffic nor interfere. Realizations draw from independent, deterministic
RNG streams so parallel execution cannot change results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import NetworkParams

__all__ = [
    "SimConfig",
    "PseEstimate",
    "sample_ppp",
    "associate",
    "mt_indicator",
    "estimate_pse",
    "estimate_cell_load",
]


@dataclass(frozen=True)
class SimConfig:
    """Simulation window and replication control.

    window_half_width  half side of the square window [-w, w]^2 (m)
    n_realizations     number of independent network snapshots
    seed               base seed; realization i uses the derived stream
                       SeedSequence(seed, spawn_key=(i,))
    edge_mode          "torus" (wrap-around metric) or "guard" (Euclidean
                       metric, MTs scored only inside the margin-shrunk
                       interior)
    guard_margin       margin in metres, used by edge_mode="guard"
    """

    window_half_width: float
    n_realizations: int
    seed: int
    edge_mode: str = "torus"
    guard_margin: float = 0.0

    def __post_init__(self):
        if self.window_half_width <= 0.0:
            raise ValueError("window_half_width must be positive")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.edge_mode not in ("torus", "guard"):
            raise ValueError(f"edge_mode must be 'torus' or 'guard', got {self.edge_mode!r}")
        if self.guard_margin < 0.0 or self.guard_margin >= self.window_half_width:
            raise ValueError("guard_margin must lie in [0, window_half_width)")

    def validate_for(self, params: NetworkParams) -> None:
        """Window must span at least 5 mean inter-site distances per half side."""
        min_half_width = 5.0 / math.sqrt(math.pi * params.lambda_bs)
        if self.window_half_width < min_half_width:
            raise ValueError(
                f"window_half_width {self.window_half_width:.1f} m below the "
                f"minimum {min_half_width:.1f} m for lambda_bs={params.lambda_bs:.3e}"
            )


@dataclass(frozen=True)
class PseEstimate:
    """Monte Carlo spectral-efficiency estimate with a 95% confidence interval."""

    mean: float
    ci95_half_width: float
    n_realizations: int

    def __post_init__(self):
        if self.mean < 0.0 or self.ci95_half_width < 0.0:
            raise ValueError("mean and ci95_half_width must be nonnegative")


def sample_ppp(density: float, window_half_width: float, rng: np.random.Generator) -> np.ndarray:
    """Draw a homogeneous PPP on [-w, w]^2: Poisson count, uniform positions."""
    if density < 0.0:
        raise ValueError(f"density must be nonnegative, got {density}")
    area = (2.0 * window_half_width) ** 2
    count = rng.poisson(density * area)
    return rng.uniform(-window_half_width, window_half_width, size=(count, 2))


def _pairwise_sq_dist(mts: np.ndarray, bss: np.ndarray, torus: bool,
                      window_half_width: float) -> np.ndarray:
    diff = np.abs(mts[:, None, :] - bss[None, :, :])
    if torus:
        span = 2.0 * window_half_width
        diff = np.minimum(diff, span - diff)
    return np.einsum("ijk,ijk->ij", diff, diff)


def associate(mt: np.ndarray, bss: np.ndarray, params: NetworkParams, *,
              torus: bool = False, window_half_width: float = 0.0) -> tuple[int, float]:
    """Serving BS of one MT: the argmin of path loss kappa*r^beta.

    Ties break toward the lowest BS index. Returns (index, path loss).
    """
    bss = np.asarray(bss, dtype=float)
    if bss.size == 0:
        raise ValueError("cannot associate against an empty BS set")
    sq = _pairwise_sq_dist(np.asarray(mt, dtype=float)[None, :], bss, torus, window_half_width)[0]
    idx = int(np.argmin(sq))
    l0 = params.kappa * sq[idx] ** (params.beta / 2.0)
    return idx, l0


def mt_indicator(mt: np.ndarray, serving: int, n_in_cell: int, bandwidth: float,
                 power: float, bss: np.ndarray, fading_draws: np.ndarray,
                 params: NetworkParams, *, active: np.ndarray | None = None,
                 torus: bool = False, window_half_width: float = 0.0) -> int:
    """Joint decoding/detection indicator for one MT, literal per-user form.

    Both the SIR and the mean SNR carry the per-user power split
    power/n_in_cell (and the SNR the bandwidth split bandwidth/n_in_cell);
    the splits cancel algebraically, so the result does not depend on
    n_in_cell. ``active`` masks which BSs transmit (all, if omitted).
    """
    if n_in_cell < 1:
        raise ValueError("n_in_cell counts the MT itself and must be >= 1")
    bss = np.asarray(bss, dtype=float)
    sq = _pairwise_sq_dist(np.asarray(mt, dtype=float)[None, :], bss, torus, window_half_width)[0]
    losses = params.kappa * sq ** (params.beta / 2.0)
    l0 = losses[serving]
    per_user_power = power / n_in_cell
    per_user_bandwidth = bandwidth / n_in_cell

    if per_user_bandwidth <= 0.0:
        return 0
    snr = (per_user_power / l0) / (params.n0 * per_user_bandwidth)
    if snr < params.gamma_a:
        return 0

    mask = losses > l0
    if active is not None:
        mask &= np.asarray(active, dtype=bool)
    interference = np.sum(per_user_power * fading_draws[mask] / losses[mask])
    signal = per_user_power * fading_draws[serving] / l0
    if interference == 0.0:
        return 1
    return int(signal / interference >= params.gamma_i)


def _realization_pse(power: float, bandwidth: float, lambda_t: float,
                     params: NetworkParams, sim: SimConfig,
                     rng: np.random.Generator) -> float:
    w = sim.window_half_width
    torus = sim.edge_mode == "torus"
    bss = sample_ppp(params.lambda_bs, w, rng)
    mts = sample_ppp(lambda_t, w, rng)
    n_mt, n_bs = len(mts), len(bss)
    if torus:
        area = (2.0 * w) ** 2
    else:
        inner = w - sim.guard_margin
        area = (2.0 * inner) ** 2
    if n_mt == 0 or n_bs == 0 or bandwidth <= 0.0 or power <= 0.0:
        return 0.0

    sq = _pairwise_sq_dist(mts, bss, torus, w)
    losses = params.kappa * sq ** (params.beta / 2.0)
    serving = np.argmin(sq, axis=1)
    rows = np.arange(n_mt)
    l0 = losses[rows, serving]

    counts = np.bincount(serving, minlength=n_bs)
    n_share = counts[serving].astype(float)  # n+1 for each MT, from the snapshot
    active = counts > 0

    # Per-user shares written out: they cancel in the SIR and in the SNR.
    per_user_power = power / n_share
    per_user_bandwidth = bandwidth / n_share
    snr_ok = (per_user_power / l0) / (params.n0 * per_user_bandwidth) >= params.gamma_a

    fading = rng.exponential(1.0, size=(n_mt, n_bs))
    interferer = (losses > l0[:, None]) & active[None, :]
    interference = np.sum(
        np.where(interferer, (per_user_power[:, None] * fading) / losses, 0.0), axis=1
    )
    signal = per_user_power * fading[rows, serving] / l0
    with np.errstate(divide="ignore"):
        sir_ok = np.where(interference > 0.0, signal / np.where(interference > 0.0, interference, 1.0),
                          np.inf) >= params.gamma_i
    indicator = snr_ok & sir_ok

    throughput = (bandwidth / n_share) * math.log2(1.0 + params.gamma_i) * indicator
    if not torus:
        inner = w - sim.guard_margin
        in_core = np.all(np.abs(mts) <= inner, axis=1)
        throughput = throughput[in_core]
    return float(np.sum(throughput) / area)


def _rng_for(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _pse_block(args) -> list[tuple[int, float]]:
    power, bandwidth, lambda_t, params, sim, indices = args
    out = []
    for i in indices:
        out.append((i, _realization_pse(power, bandwidth, lambda_t, params, sim,
                                        _rng_for(sim.seed, i))))
    return out


def estimate_pse(power: float, bandwidth: float, lambda_t: float,
                 params: NetworkParams, sim: SimConfig,
                 n_workers: int = 1) -> PseEstimate:
    """Monte Carlo spectral efficiency: mean over realizations with 95% CI.

    Each realization sums per-MT throughput (bandwidth share within the
    serving cell times the joint indicator) and normalizes by window area.
    Results are independent of n_workers because every realization owns a
    derived RNG stream and the reduction runs in realization order.
    """
    sim.validate_for(params)
    if power < 0.0 or bandwidth < 0.0 or lambda_t < 0.0:
        raise ValueError("power, bandwidth and lambda_t must be nonnegative")

    n = sim.n_realizations
    values = np.empty(n, dtype=float)
    if n_workers <= 1:
        for i in range(n):
            values[i] = _realization_pse(power, bandwidth, lambda_t, params, sim,
                                         _rng_for(sim.seed, i))
    else:
        chunks = [list(range(start, n, n_workers)) for start in range(n_workers)]
        work = [(power, bandwidth, lambda_t, params, sim, c) for c in chunks if c]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for block in pool.map(_pse_block, work):
                for i, value in block:
                    values[i] = value

    mean = float(np.mean(values))
    if n > 1:
        stderr = float(np.std(values, ddof=1)) / math.sqrt(n)
    else:
        stderr = 0.0
    return PseEstimate(mean=mean, ci95_half_width=1.96 * stderr, n_realizations=n)


def estimate_cell_load(lambda_t: float, params: NetworkParams, sim: SimConfig,
                       n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Empirical MT-weighted cell-occupancy distribution.

    Returns (probabilities, 95% CI half widths) for the event that an MT
    shares its cell with n other MTs, n = 0..n_max, estimated as the mean
    of per-realization fractions.
    """
    sim.validate_for(params)
    fractions = []
    for i in range(sim.n_realizations):
        rng = _rng_for(sim.seed, i)
        bss = sample_ppp(params.lambda_bs, sim.window_half_width, rng)
        mts = sample_ppp(lambda_t, sim.window_half_width, rng)
        if len(mts) == 0 or len(bss) == 0:
            continue
        sq = _pairwise_sq_dist(mts, bss, sim.edge_mode == "torus", sim.window_half_width)
        serving = np.argmin(sq, axis=1)
        counts = np.bincount(serving, minlength=len(bss))
        others = counts[serving] - 1
        hist = np.bincount(np.minimum(others, n_max + 1), minlength=n_max + 2)[: n_max + 1]
        fractions.append(hist / len(mts))
    if not fractions:
        raise RuntimeError("no realization produced both BSs and MTs")
    stack = np.asarray(fractions)
    mean = stack.mean(axis=0)
    if len(fractions) > 1:
        ci = 1.96 * stack.std(axis=0, ddof=1) / math.sqrt(len(fractions))
    else:
        ci = np.zeros_like(mean)
    return mean, ci
