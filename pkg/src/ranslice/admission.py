"""Admission control for slice requests.

Requests asking for at most half of the no-slicing spectral efficiency are
processed for allocation; the rest are deferred. The solver then drives
the admitted set: tenants whose allocation collapses to (near) zero are
discarded, an infeasible set is cut back to its longest feasible prefix
in ascending-SLA order, and deferred requests are re-considered only while
they strictly improve the feasible sum. The whole procedure is a
deterministic function of (requests, params, cfg).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Allocation, NetworkParams, SliceRequest, pse_no_slicing
from .optimizer import DEFAULT_SOLVER, SolveReport, SolverConfig, solve_multitenant

__all__ = [
    "RejectedRequest",
    "AdmissionResult",
    "prefilter",
    "admit",
]

PREFILTER_ALPHA = 0.5

REASON_PREFILTERED = "prefiltered"
REASON_NEAR_ZERO = "near_zero_allocation"
REASON_WORSENS = "worsens_sum_pse"
REASON_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class RejectedRequest:
    """A rejected tenant with the reason; detail carries the inferior
    sum-PSE for worsens_sum_pse rejections."""

    tenant_id: str
    reason: str
    detail: float | None = None


@dataclass(frozen=True)
class AdmissionResult:
    """Admitted allocations, the rejections, and the slicing gain."""

    admitted: tuple[Allocation, ...]
    rejected: tuple[RejectedRequest, ...]
    sum_pse: float
    baseline_pse: float
    gain: float
    solves: int = 0

    def __post_init__(self):
        expected = self.sum_pse / self.baseline_pse if self.baseline_pse > 0.0 else 0.0
        if abs(self.gain - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ValueError("gain must equal sum_pse / baseline_pse")


def _order_key(request: SliceRequest):
    return (request.alpha, request.tenant_id)


def prefilter(requests: Sequence[SliceRequest]) -> tuple[list[SliceRequest], list[SliceRequest]]:
    """Split requests at alpha <= 0.5 (inclusive) into candidates/deferred.

    Both lists come back sorted by ascending alpha, ties by tenant_id.
    """
    candidates = sorted((r for r in requests if r.alpha <= PREFILTER_ALPHA), key=_order_key)
    deferred = sorted((r for r in requests if r.alpha > PREFILTER_ALPHA), key=_order_key)
    return candidates, deferred


def _feasible(report: SolveReport) -> bool:
    return all(a.admitted for a in report.allocations)


def admit(requests: Sequence[SliceRequest], params: NetworkParams,
          cfg: SolverConfig = DEFAULT_SOLVER) -> AdmissionResult:
    """Run admission control over a set of slice requests.

    Baseline is the pooled no-slicing PSE over all requesting tenants.
    Candidate sets are re-solved from scratch after every accept/reject
    decision; intermediate solves run on a reduced iteration budget
    (cfg.probe_iters), the accepted set gets the full budget. The result
    is the best feasible configuration encountered.
    """
    requests = list(requests)
    if not requests:
        raise ValueError("admit needs at least one request")
    baseline = pse_no_slicing(params, requests)
    candidates, deferred = prefilter(requests)

    eps_b = cfg.eps_alloc_rel * params.b_tot
    eps_p = cfg.eps_alloc_rel * params.p_tot
    rejected: dict[str, RejectedRequest] = {}
    n_solves = 0
    cache: dict[tuple[str, ...], SolveReport] = {}

    def solve_set(active: Sequence[SliceRequest], full: bool = False) -> SolveReport:
        nonlocal n_solves
        key = tuple(r.tenant_id for r in active) + (("full",) if full else ())
        if key not in cache:
            n_solves += 1
            cache[key] = solve_multitenant(
                active, params, cfg, max_iters=None if full else cfg.probe_iters
            )
        return cache[key]

    best: tuple[float, tuple[SliceRequest, ...], SolveReport] | None = None

    def consider(active: Sequence[SliceRequest], report: SolveReport):
        nonlocal best
        if _feasible(report) and (best is None or report.sum_pse > best[0]):
            best = (report.sum_pse, tuple(active), report)

    def longest_feasible_prefix(active: list[SliceRequest]) -> int:
        """Largest L with a feasible solve of active[:L]; 0 if none."""
        known_infeasible = len(active)
        length = len(active) - 1
        step = 1
        feasible_len = 0
        while length > 0:
            report = solve_set(active[:length])
            if _feasible(report):
                feasible_len = length
                break
            known_infeasible = length
            step *= 2
            length = max(length - step, 0)
        lo, hi = feasible_len, known_infeasible
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _feasible(solve_set(active[:mid])):
                lo = mid
            else:
                hi = mid
        return lo

    active = list(candidates)
    while active:
        report = solve_set(active)
        consider(active, report)
        near_zero = [
            a.tenant_id
            for a in report.allocations
            if a.bandwidth < eps_b or a.power < eps_p
        ]
        if near_zero:
            for tenant_id in near_zero:
                rejected[tenant_id] = RejectedRequest(tenant_id, REASON_NEAR_ZERO)
            active = [r for r in active if r.tenant_id not in rejected]
            continue
        if _feasible(report):
            break
        keep = longest_feasible_prefix(active)
        for r in active[keep:]:
            rejected[r.tenant_id] = RejectedRequest(r.tenant_id, REASON_INFEASIBLE)
        active = active[:keep]

    current_sum = best[0] if best is not None else 0.0
    if current_sum < baseline and deferred:
        if cfg.deferred_order == "alpha":
            order = deferred
        else:
            order = [r for r in requests if r.alpha > PREFILTER_ALPHA]
        for request in order:
            trial = active + [request]
            report = solve_set(trial)
            if _feasible(report) and report.sum_pse > current_sum:
                active = trial
                current_sum = report.sum_pse
                consider(active, report)
            elif not _feasible(report):
                rejected[request.tenant_id] = RejectedRequest(request.tenant_id, REASON_INFEASIBLE)
            else:
                rejected[request.tenant_id] = RejectedRequest(
                    request.tenant_id, REASON_WORSENS, detail=report.sum_pse
                )

    if best is not None:
        final_active = list(best[1])
        final = solve_set(final_active, full=True)
        if not _feasible(final):
            final = best[2]
        admitted = final.allocations
        sum_pse = final.sum_pse
    else:
        final_active = []
        admitted = ()
        sum_pse = 0.0

    admitted_ids = {a.tenant_id for a in admitted}
    for r in requests:
        if r.tenant_id in admitted_ids or r.tenant_id in rejected:
            continue
        reason = REASON_PREFILTERED if r.alpha > PREFILTER_ALPHA else REASON_INFEASIBLE
        rejected[r.tenant_id] = RejectedRequest(r.tenant_id, reason)

    rejected_list = tuple(rejected[r.tenant_id] for r in requests if r.tenant_id in rejected
                          and r.tenant_id not in admitted_ids)
    gain = sum_pse / baseline if baseline > 0.0 else 0.0
    return AdmissionResult(
        admitted=admitted,
        rejected=rejected_list,
        sum_pse=sum_pse,
        baseline_pse=baseline,
        gain=gain,
        solves=n_solves,
    )
