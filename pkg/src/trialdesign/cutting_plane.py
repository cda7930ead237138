"""Cutting-plane search for the min-max surrogate design.

The master problem keeps a finite set Z_m of covariate vectors and
minimizes theta = max_k (z_k'(H'H)^-1 z_k + x'Upsilon(z_k,H)x) over
balanced sign vectors.  The separation step maximizes the surrogate
quadratic at the master solution over the full hypercube; the loop stops
once theta_m >= delta_m - epsilon.  Each new cut is a hypercube vertex,
so with exact masters the loop terminates within 2^(p-1) iterations.
"""

from __future__ import annotations

import sys
import time
from dataclasses import replace

import numpy as np

from .bqp import BqpResult, CutSet, minimize_max_quadratic
from .errors import ConfoundedDesign, DuplicateCut
from .inner_max import InnerMaxProblem, solve_inner_max
from .limits import SolveLimits
from .objective import (
    CovariateSpace,
    original_value,
    spectral_cache,
    surrogate_matrix,
    upsilon,
)
from .covariates import as_matrix, matrix_hash
from .report import DesignReport

# widest master still solved exactly when the mode is "auto"
MASTER_EXACT_MAX_N = 40

MASTER_MODES = ("auto", "exact", "heuristic")


def _seed_vectors(p: int) -> list[np.ndarray]:
    ones = np.ones(p)
    alternating = np.array([(-1.0) ** i for i in range(p)])
    seeds = [ones]
    if not np.array_equal(alternating, ones):
        seeds.append(alternating)
    return seeds


def solve_exact(
    H,
    limits: SolveLimits | None = None,
    master_mode: str = "auto",
    report_space: CovariateSpace | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> DesignReport:
    """Run the cutting-plane loop and report the best allocation seen.

    Status is "optimal" only when the final master solve carried an
    optimality certificate and the separation solve was exact; hitting a
    time or node budget downgrades it to "incumbent" with the best
    subproblem value found so far.
    """
    if master_mode not in MASTER_MODES:
        raise ValueError(f"master_mode must be one of {MASTER_MODES}")
    if limits is None:
        limits = SolveLimits()
    t0 = time.monotonic()
    deadline = t0 + limits.time_limit
    A = as_matrix(H)
    cache = spectral_cache(A)
    n, p = cache.n, cache.p
    if report_space is None:
        report_space = CovariateSpace.hypercube()

    if master_mode == "auto":
        mode_now = "exact" if n <= MASTER_EXACT_MAX_N else "heuristic"
    else:
        mode_now = master_mode
    verification_allowed = master_mode == "auto" and mode_now == "heuristic"

    Z = [np.asarray(z, dtype=float) for z in _seed_vectors(p)]
    cut_pairs = [(float(z @ cache.gram_inverse @ z), upsilon(A, z, cache)) for z in Z]

    history: list[tuple[float, float, float]] = []
    best_delta = np.inf
    best_x = None
    theta_lb = -np.inf  # best certified master bound
    master_nodes = 0
    prev_x = None
    status = "incumbent"
    converged = False
    iteration = 0
    iteration_cap = (1 << (p - 1)) + 2 if p <= 31 else None
    sub_method = None

    while True:
        remaining = deadline - time.monotonic()
        if remaining <= 0.01:
            break
        iteration += 1
        if iteration_cap is not None and iteration > iteration_cap:
            raise DuplicateCut(
                "cutting plane exceeded the hypercube size without converging"
            )
        master_limits = replace(limits, time_limit=max(remaining, 0.05), mode=mode_now)
        master: BqpResult = minimize_max_quadratic(
            CutSet.from_pairs(cut_pairs), master_limits, warm_start=prev_x, threads=threads
        )
        theta = master.value
        x_m = master.x_star
        prev_x = x_m
        master_nodes += master.nodes
        if mode_now == "exact" and master.status == "optimal":
            theta_lb = max(theta_lb, theta)

        remaining = max(deadline - time.monotonic(), 0.05)
        sub_limits = replace(limits, time_limit=remaining)
        sub = solve_inner_max(
            InnerMaxProblem(surrogate_matrix(A, x_m, cache)), limits=sub_limits
        )
        delta = sub.value
        sub_method = sub.method
        history.append((float(theta), float(delta), time.monotonic() - t0))
        if verbose:
            print(
                f"iter {iteration}: theta={theta:.8f} delta={delta:.8f} "
                f"cuts={len(Z)} master={mode_now}/{master.status}",
                file=sys.stderr,
            )
        if delta < best_delta or best_x is None:
            best_delta = delta
            best_x = x_m

        if theta >= delta - limits.epsilon:
            if mode_now == "heuristic" and verification_allowed:
                # heuristic masters prove nothing: re-run the loop with
                # exact masters while budget remains
                if deadline - time.monotonic() > 0.05:
                    mode_now = "exact"
                    continue
                break
            converged = (
                mode_now == "exact" and master.status == "optimal" and sub.optimal
            )
            break
        z_new = sub.z_star
        if any(np.array_equal(z_new, z) for z in Z):
            raise DuplicateCut(
                "separation returned an existing cut before the stopping test fired"
            )
        Z.append(z_new)
        cut_pairs.append((float(z_new @ cache.gram_inverse @ z_new), upsilon(A, z_new, cache)))

    if converged:
        status = "optimal"
    wall = time.monotonic() - t0
    assert best_x is not None, "no master solve completed within the budget"

    try:
        orig, _ = original_value(A, best_x, report_space, cache)
        confounded = False
    except ConfoundedDesign:
        orig = None
        confounded = True

    gap = float(best_delta - theta_lb) if np.isfinite(theta_lb) else None
    diagnostics = {
        "iterations": iteration,
        "cuts": len(Z),
        "master_nodes": master_nodes,
        "master_mode_final": mode_now,
        "subproblem_method": sub_method,
        "history": [[t, d, s] for t, d, s in history],
        "lower_bound": float(theta_lb) if np.isfinite(theta_lb) else None,
        "gap": gap,
        "confounded": confounded,
    }
    parameters = {
        "epsilon": limits.epsilon,
        "time_limit": limits.time_limit,
        "node_limit": limits.node_limit,
        "master_mode": master_mode,
        "space": report_space.kind,
    }
    return DesignReport(
        method="EXACT",
        allocation=best_x,
        surrogate_value=float(best_delta),
        original_value=orig,
        status=status,
        wall_time=wall,
        seed=limits.seed,
        n=n,
        p=p,
        matrix_sha256=matrix_hash(A),
        diagnostics=diagnostics,
        parameters=parameters,
    )
