"""Slice allocation by Lagrangian dual decomposition, plus a grid baseline.

The slicing problem is a feasibility program: find per-tenant bandwidth
and power vectors (b, p) inside the shared budgets with

    pse(p_i, b_i, lambda_i) >= alpha_i * PSE_no_slicing      for all i.

The dual ascent iterates projected multiplier updates

    mu <- [mu + zeta * (alpha_i * PSE_ns - pse_i)]+ ,
    zeta^(k) = ||mu^(k) - mu^(k-1)||_2 / ||violations||_2 ,

against an inner solver that minimizes the Lagrangian (equivalently,
maximizes the multiplier-weighted sum-PSE) over the budget box by
projected gradient ascent. ``brute_force_opt`` provides the exhaustive
baseline: the exact optimum over all integer-quantum budget compositions,
computed by dynamic programming over tenants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .model import Allocation, NetworkParams, SliceRequest, _pse_coeffs, pse, pse_no_slicing
from .specfun import DEFAULT_CONFIG

__all__ = [
    "SolverConfig",
    "DualState",
    "SolveReport",
    "DualStallError",
    "lagrangian",
    "dual_step",
    "solve_inner",
    "solve_multitenant",
    "brute_force_opt",
]

MAX_BRUTE_FORCE_TENANTS = 6


class DualStallError(RuntimeError):
    """Multiplier steps collapsed to the floor while violations persist."""


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration budgets of the dual/inner solvers.

    feasibility_tol_rel and eps_alloc_rel are relative to the no-slicing
    PSE and to the total budgets, respectively. deferred_order selects how
    the admission layer ranks deferred requests ("alpha" or "arrival").
    """

    mu_tol: float = 1e-6
    zeta_min: float = 1e-12
    nu_init: float = 1.0
    max_iters: int = 150
    patience: int = 10
    probe_iters: int = 15
    inner_iters: int = 80
    inner_tol: float = 1e-10
    feasibility_tol_rel: float = 1e-6
    eps_alloc_rel: float = 1e-4
    grid_levels: int = 24
    deferred_order: str = "alpha"

    def __post_init__(self):
        if self.mu_tol <= 0.0 or self.zeta_min <= 0.0 or self.inner_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if min(self.max_iters, self.inner_iters, self.patience, self.probe_iters) < 1:
            raise ValueError("iteration budgets must be positive")
        if self.grid_levels < 4:
            raise ValueError("grid_levels must be >= 4")
        if self.deferred_order not in ("alpha", "arrival"):
            raise ValueError(f"deferred_order must be 'alpha' or 'arrival', got {self.deferred_order!r}")


DEFAULT_SOLVER = SolverConfig()


@dataclass(frozen=True)
class DualState:
    """Multiplier vector with the step-size recursion bookkeeping."""

    mu: np.ndarray
    zeta: float
    nu: float
    k: int
    converged: bool
    stalled_steps: int = 0

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "mu", mu)
        if np.any(mu < 0.0):
            raise ValueError("multipliers must be nonnegative")
        if self.zeta <= 0.0:
            raise ValueError("step size must be positive")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one multi-tenant solve."""

    allocations: tuple[Allocation, ...]
    iterations: int
    converged: bool
    sum_pse: float
    per_tenant_pse: np.ndarray
    mu: np.ndarray | None = None
    dual_values: tuple[float, ...] = field(default=())

    @property
    def feasible_tenants(self) -> int:
        return sum(1 for a in self.allocations if a.admitted)


def _targets(requests: Sequence[SliceRequest], params: NetworkParams) -> tuple[float, np.ndarray]:
    baseline = pse_no_slicing(params, requests)
    alphas = np.array([r.alpha for r in requests], dtype=float)
    return baseline, alphas * baseline


def lagrangian(mu, b, p, requests: Sequence[SliceRequest], params: NetworkParams) -> float:
    """1 + sum_i mu_i (alpha_i PSE_ns - pse_i): multipliers price violations."""
    mu = np.asarray(mu, dtype=float)
    b = np.asarray(b, dtype=float)
    p = np.asarray(p, dtype=float)
    if not (len(mu) == len(b) == len(p) == len(requests)):
        raise ValueError(
            f"dimension mismatch: mu={len(mu)}, b={len(b)}, p={len(p)}, requests={len(requests)}"
        )
    _, targets = _targets(requests, params)
    achieved = np.array(
        [pse(p[i], b[i], r.lambda_t, params) for i, r in enumerate(requests)]
    )
    return 1.0 + float(mu @ (targets - achieved))


def dual_step(state: DualState, violations, cfg: SolverConfig = DEFAULT_SOLVER) -> DualState:
    """One projected subgradient update of the multipliers.

    violations_i = alpha_i PSE_ns - pse_i (positive means the SLA is
    violated). Convergence is declared on a relative infinity-norm test of
    the multiplier movement; a floored step size with persisting positive
    violations counts toward the stall budget and eventually raises
    DualStallError.
    """
    v = np.asarray(violations, dtype=float)
    if v.shape != state.mu.shape:
        raise ValueError(f"violations shape {v.shape} does not match mu shape {state.mu.shape}")
    norm_v = float(np.linalg.norm(v))
    if norm_v == 0.0:
        return replace(state, nu=0.0, k=state.k + 1, converged=True, stalled_steps=0)

    zeta = max(state.nu / norm_v, cfg.zeta_min)
    floored = state.nu <= 2.0 * cfg.zeta_min * norm_v and float(np.max(v)) > 0.0
    mu_new = np.maximum(0.0, state.mu + zeta * v)
    delta = mu_new - state.mu
    nu_new = float(np.linalg.norm(delta))
    moved = float(np.max(np.abs(delta)))
    converged = (not floored) and moved <= cfg.mu_tol * (1.0 + float(np.max(np.abs(state.mu))))
    stalled = state.stalled_steps + 1 if floored else 0
    if stalled > cfg.patience:
        raise DualStallError(
            f"multiplier updates stalled for {stalled} iterations with positive violations"
        )
    return DualState(mu=mu_new, zeta=zeta, nu=nu_new, k=state.k + 1,
                     converged=converged, stalled_steps=stalled)


def _project_capped_simplex(v: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) <= cap}."""
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= cap:
        return clipped
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - cap
    idx = np.arange(1, len(v) + 1)
    rho = idx[u - css / idx > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _proportional_split(alphas: np.ndarray) -> np.ndarray:
    total = alphas.sum()
    if total > 0.0:
        return alphas / total
    return np.full(len(alphas), 1.0 / len(alphas))


class _Kernel:
    """Vectorized per-tenant PSE and gradients in budget-fraction coordinates."""

    def __init__(self, requests: Sequence[SliceRequest], params: NetworkParams):
        coeffs = [_pse_coeffs(params, r.lambda_t, DEFAULT_CONFIG) for r in requests]
        self.amp = np.array([c[0] for c in coeffs])
        self.expo = np.array([c[1] for c in coeffs])
        self.q = coeffs[0][2] if coeffs else 0.0
        self.b_tot = params.b_tot
        self.p_tot = params.p_tot

    def value(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        b = x * self.b_tot
        p = y * self.p_tot
        with np.errstate(divide="ignore", over="ignore"):
            ratio = np.where(b > 0.0, p / np.where(b > 0.0, b, 1.0), np.inf)
            bracket = np.where(p > 0.0, -np.expm1(-self.expo * np.where(p > 0.0, ratio, 1.0) ** self.q), 0.0)
        return self.amp * b * np.where(b > 0.0, bracket, 0.0)

    def grad(self, x: np.ndarray, y: np.ndarray, floor: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        # Evaluated at floored coordinates: the (0,0) corner has zero
        # coordinatewise gradient but a positive directional derivative.
        b = np.maximum(x, floor) * self.b_tot
        p = np.maximum(y, floor) * self.p_tot
        ratio = p / b
        ex = self.expo * ratio**self.q
        e = np.exp(-ex)
        d_b = self.amp * ((1.0 - e) - self.q * ex * e)
        d_p = self.amp * b * e * self.q * ex / p
        return d_b * self.b_tot, d_p * self.p_tot


def solve_inner(mu, requests: Sequence[SliceRequest], params: NetworkParams,
                cfg: SolverConfig = DEFAULT_SOLVER) -> tuple[np.ndarray, np.ndarray]:
    """Minimize the Lagrangian over the budget box at fixed multipliers.

    Equivalent to maximizing sum_i mu_i pse_i. Deterministic: starts from
    the SLA-proportional split and runs projected gradient ascent with
    backtracking until the step stalls or the iteration budget runs out.
    Returns (bandwidths, powers) in physical units.
    """
    mu = np.asarray(mu, dtype=float)
    if len(mu) != len(requests):
        raise ValueError(f"mu has {len(mu)} entries for {len(requests)} requests")
    if np.any(mu < 0.0):
        raise ValueError("multipliers must be nonnegative")
    alphas = np.array([r.alpha for r in requests], dtype=float)
    x = _proportional_split(alphas).copy()
    y = x.copy()
    if not np.any(mu > 0.0):
        return x * params.b_tot, y * params.p_tot

    kernel = _Kernel(requests, params)

    def objective(xv, yv):
        return float(mu @ kernel.value(xv, yv))

    current = objective(x, y)
    step = 0.25
    for _ in range(cfg.inner_iters):
        g_x, g_y = kernel.grad(x, y)
        g_x = np.nan_to_num(mu * g_x, posinf=1e300)
        g_y = np.nan_to_num(mu * g_y, posinf=1e300)
        if not (np.all(np.isfinite(g_x)) and np.all(np.isfinite(g_y))):
            bad = int(np.argmax(~np.isfinite(g_x) | ~np.isfinite(g_y)))
            raise ArithmeticError(
                f"non-finite inner gradient for tenant {requests[bad].tenant_id!r}"
            )
        scale = max(float(np.max(np.abs(g_x))), float(np.max(np.abs(g_y))), 1e-300)
        d_x, d_y = g_x / scale, g_y / scale

        accepted = False
        trial = step
        for _ in range(24):
            x_new = _project_capped_simplex(x + trial * d_x, 1.0)
            y_new = _project_capped_simplex(y + trial * d_y, 1.0)
            value = objective(x_new, y_new)
            # Armijo on the projected step; the reference gain is nonnegative
            # because the direction is a positive multiple of the gradient.
            gain_ref = float(g_x @ (x_new - x) + g_y @ (y_new - y))
            if value >= current + 1e-4 * gain_ref:
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            break
        moved = max(float(np.max(np.abs(x_new - x))), float(np.max(np.abs(y_new - y))))
        x, y, current = x_new, y_new, value
        step = min(trial * 1.5, 0.5)
        if moved <= cfg.inner_tol:
            break
    return x * params.b_tot, y * params.p_tot


def _evaluate(b: np.ndarray, p: np.ndarray, requests: Sequence[SliceRequest],
              params: NetworkParams) -> np.ndarray:
    return np.array([pse(p[i], b[i], r.lambda_t, params) for i, r in enumerate(requests)])


def _report(requests, b, p, pse_vec, targets, feas_tol, iterations, converged,
            mu=None, dual_values=()) -> SolveReport:
    feasible = pse_vec >= targets - feas_tol
    allocations = tuple(
        Allocation(
            tenant_id=r.tenant_id,
            bandwidth=float(b[i]),
            power=float(p[i]),
            admitted=bool(feasible[i] and b[i] > 0.0 and p[i] > 0.0),
            achieved_pse=float(pse_vec[i]),
        )
        for i, r in enumerate(requests)
    )
    return SolveReport(
        allocations=allocations,
        iterations=iterations,
        converged=converged,
        sum_pse=float(np.sum(pse_vec)),
        per_tenant_pse=pse_vec,
        mu=mu,
        dual_values=tuple(dual_values),
    )


def solve_multitenant(requests: Sequence[SliceRequest], params: NetworkParams,
                      cfg: SolverConfig = DEFAULT_SOLVER,
                      max_iters: int | None = None) -> SolveReport:
    """Full dual loop: alternate inner solves and multiplier updates.

    Multipliers start at zero, so the first inner solve returns the
    SLA-proportional split; violated tenants then bid their multipliers
    up. After the multipliers converge, one final inner solve at mu*
    produces the candidate allocation; the report carries the best
    feasibility-first configuration among all inner solutions evaluated.
    Infeasible instances exhaust the iteration budget and report
    converged=False rather than raising; a dual value that stops improving
    for ``patience`` iterations ends the loop early for the same verdict.
    """
    requests = list(requests)
    if not requests:
        raise ValueError("solve_multitenant needs at least one request")
    budget = cfg.max_iters if max_iters is None else max_iters
    baseline, targets = _targets(requests, params)
    feas_tol = cfg.feasibility_tol_rel * baseline
    state = DualState(mu=np.zeros(len(requests)), zeta=cfg.zeta_min, nu=cfg.nu_init,
                      k=0, converged=False)

    best: tuple[bool, float, np.ndarray, np.ndarray, np.ndarray] | None = None
    dual_values: list[float] = []

    def consider(b, p, pse_vec):
        nonlocal best
        feasible = bool(np.all(pse_vec >= targets - feas_tol))
        total = float(np.sum(pse_vec))
        if best is None or (feasible, total) > (best[0], best[1]):
            best = (feasible, total, b, p, pse_vec)

    stalled = False
    g_best = -math.inf
    since_improved = 0
    while state.k < budget:
        b, p = solve_inner(state.mu, requests, params, cfg)
        pse_vec = _evaluate(b, p, requests, params)
        violations = targets - pse_vec
        g_value = 1.0 + float(state.mu @ violations)
        dual_values.append(g_value)
        consider(b, p, pse_vec)
        if not math.isfinite(g_best) or g_value > g_best + 1e-9 * (1.0 + abs(g_best)):
            g_best = g_value
            since_improved = 0
        else:
            since_improved += 1
            if since_improved > cfg.patience:
                break
        try:
            state = dual_step(state, violations, cfg)
        except DualStallError:
            stalled = True
            break
        if state.converged:
            break

    b, p = solve_inner(state.mu, requests, params, cfg)
    pse_vec = _evaluate(b, p, requests, params)
    consider(b, p, pse_vec)

    feasible_best, _, b_best, p_best, pse_best = best
    converged = state.converged and not stalled and feasible_best
    return _report(requests, b_best, p_best, pse_best, targets, feas_tol,
                   iterations=state.k, converged=converged, mu=state.mu,
                   dual_values=dual_values)


def brute_force_opt(requests: Sequence[SliceRequest], params: NetworkParams,
                    grid_levels: int = DEFAULT_SOLVER.grid_levels,
                    cfg: SolverConfig = DEFAULT_SOLVER) -> SolveReport:
    """Exhaustive search over integer budget compositions, exact at the grid.

    Both budgets are cut into grid_levels quanta; every assignment of
    quanta to tenants is covered through a dynamic program over tenants
    whose state is the remaining (bandwidth, power) quanta, so the optimum
    equals the full enumeration at a fraction of the cost. Feasibility
    first: if any grid assignment meets every SLA, the best such
    assignment is returned with converged=True; otherwise the
    unconstrained maximum with converged=False. Near-equal sums resolve
    toward SLA-proportional shares, then first-found in ascending quantum
    order.
    """
    requests = list(requests)
    m = len(requests)
    if m == 0:
        raise ValueError("brute_force_opt needs at least one request")
    if m > MAX_BRUTE_FORCE_TENANTS:
        raise ValueError(
            f"brute-force search refuses {m} tenants (cap {MAX_BRUTE_FORCE_TENANTS})"
        )
    if grid_levels < 4:
        raise ValueError(f"grid_levels must be >= 4, got {grid_levels}")

    baseline, targets = _targets(requests, params)
    feas_tol = cfg.feasibility_tol_rel * baseline
    g = grid_levels
    b_axis = np.arange(g + 1) * (params.b_tot / g)
    p_axis = np.arange(g + 1) * (params.p_tot / g)
    shares = _proportional_split(np.array([r.alpha for r in requests], dtype=float))
    tie_eps = 1e-9 * max(baseline, 1e-300)

    values = []
    penalized = []
    masks = []
    gb_frac = np.arange(g + 1)[:, None] / g
    gp_frac = np.arange(g + 1)[None, :] / g
    for i, r in enumerate(requests):
        v = pse(p_axis[None, :], b_axis[:, None], r.lambda_t, params)
        values.append(v)
        penalized.append(v - tie_eps * ((gb_frac - shares[i]) ** 2 + (gp_frac - shares[i]) ** 2))
        masks.append(v >= targets[i] - feas_tol)

    def run_dp(restrict: bool):
        neg = -math.inf
        dp = np.zeros((g + 1, g + 1))
        choices = []
        for i in range(m - 1, -1, -1):
            new = np.full((g + 1, g + 1), neg)
            pick = np.zeros((g + 1, g + 1, 2), dtype=np.int32)
            for gb in range(g + 1):
                for gp in range(g + 1):
                    if restrict and not masks[i][gb, gp]:
                        continue
                    cand = penalized[i][gb, gp] + dp[: g + 1 - gb, : g + 1 - gp]
                    window = new[gb:, gp:]
                    better = cand > window
                    window[better] = cand[better]
                    pick[gb:, gp:][better] = (gb, gp)
            dp = new
            choices.append(pick)
            if not np.isfinite(dp[g, g]):
                return None
        choices.reverse()
        alloc = np.zeros((m, 2), dtype=int)
        rb, rp = g, g
        for i in range(m):
            gb, gp = choices[i][rb, rp]
            alloc[i] = (gb, gp)
            rb -= gb
            rp -= gp
        return alloc

    alloc = run_dp(restrict=True)
    feasible = alloc is not None
    if alloc is None:
        alloc = run_dp(restrict=False)

    b = b_axis[alloc[:, 0]]
    p = p_axis[alloc[:, 1]]
    pse_vec = np.array([values[i][alloc[i, 0], alloc[i, 1]] for i in range(m)])
    return _report(requests, b, p, pse_vec, targets, feas_tol,
                   iterations=0, converged=feasible)
