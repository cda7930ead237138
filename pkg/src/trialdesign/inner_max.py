"""Exact maximization of z'Mz over {1} x {-1,+1}^(p-1).

Small problems (p-1 <= 22) are enumerated: a Gray-code walk over prefix
coordinates updates the running objective in O(p) per flip, and every
suffix completion of the current prefix is evaluated in one vectorized
block.  Larger problems run best-first branch-and-bound with an interval
bound that relaxes each pairwise product to [-1, 1].  Ties are broken
toward the lexicographically smallest z in both paths.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np

from .limits import SolveLimits

# free-coordinate count at or below which enumeration is used
ENUM_MAX_FREE = 22

# suffix bits evaluated as one vectorized block during enumeration
SUFFIX_BITS = 12

METHODS = ("auto", "enumeration", "branch_and_bound")


@dataclass(frozen=True, eq=False)
class InnerMaxProblem:
    """Symmetric p x p matrix M; the leading coordinate of z is pinned."""

    M: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.M, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError("M must be a square matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("M has non-finite entries")
        if np.max(np.abs(arr - arr.T)) > 1e-12:
            raise ValueError("M must be symmetric to 1e-12")
        arr = (arr + arr.T) / 2.0
        arr.flags.writeable = False
        object.__setattr__(self, "M", arr)

    @property
    def p(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True, eq=False)
class InnerMaxResult:
    """Argmax z (first entry +1), its value, and search diagnostics."""

    z_star: np.ndarray
    value: float
    nodes_explored: int
    method: str
    optimal: bool
    gap: float


def _suffix_table(m: int) -> np.ndarray:
    # rows are lexicographically ordered +/-1 vectors (bit 0 -> -1)
    idx = np.arange(1 << m, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(m - 1, -1, -1)) & 1
    return (bits * 2 - 1).astype(float)


def _reduce(M: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    # fold the pinned leading coordinate into a constant and linear term
    return float(M[0, 0]), 2.0 * M[0, 1:].copy(), M[1:, 1:].copy()


def _enumerate(w: np.ndarray, N: np.ndarray) -> tuple[np.ndarray, int]:
    """Return the maximizing y over {-1,+1}^q (constant term omitted)."""
    q = w.size
    m = min(q, SUFFIX_BITS)
    k = q - m
    B = _suffix_table(m)
    w_pre, w_suf = w[:k], w[k:]
    N_pp, N_ps, N_ss = N[:k, :k], N[:k, k:], N[k:, k:]
    v = B @ w_suf + np.einsum("ij,ij->i", B @ N_ss, B)

    a = np.full(k, -1.0)
    u = float(w_pre @ a + a @ N_pp @ a) if k else 0.0
    r = N_pp @ a if k else None
    c = a @ N_ps if k else np.zeros(m)

    best_val = -np.inf
    best_prefix = a.copy()
    best_suffix = 0
    steps = 1 << k
    for step in range(steps):
        vals = u + v + 2.0 * (B @ c)
        j = int(np.argmax(vals))
        val = float(vals[j])
        if val > best_val or (
            val == best_val
            and tuple(a) + tuple(B[j]) < tuple(best_prefix) + tuple(B[best_suffix])
        ):
            best_val = val
            best_prefix = a.copy()
            best_suffix = j
        if step + 1 < steps:
            nxt = step + 1
            flip = (nxt & -nxt).bit_length() - 1
            u += -2.0 * w_pre[flip] * a[flip] - 4.0 * a[flip] * r[flip] + 4.0 * N_pp[flip, flip]
            r -= 2.0 * a[flip] * N_pp[:, flip]
            c -= 2.0 * a[flip] * N_ps[flip, :]
            a[flip] = -a[flip]
    return np.concatenate([best_prefix, B[best_suffix]]), 1 << q


def _polish(y: np.ndarray, w: np.ndarray, N: np.ndarray) -> np.ndarray:
    # single-flip ascent until no strict improvement
    y = y.copy()
    val = float(w @ y + y @ N @ y)
    while True:
        grad = w + 2.0 * N @ y
        deltas = -2.0 * y * grad + 4.0 * np.diag(N)
        i = int(np.argmax(deltas))
        if deltas[i] <= 1e-12 * (1.0 + abs(val)):
            return y
        y[i] = -y[i]
        val += float(deltas[i])


def _branch_and_bound(
    w: np.ndarray,
    N: np.ndarray,
    limits: SolveLimits,
    deadline: float,
) -> tuple[np.ndarray, int, bool, float]:
    """Best-first search over partial sign fixings (constant term omitted)."""
    q = w.size
    absN = np.abs(N).copy()
    np.fill_diagonal(absN, 0.0)
    diagN = np.diag(N).copy()
    absw = np.abs(w)
    # static branch order: heaviest total pairwise mass first
    order = np.argsort(-(absw / 2.0 + absN.sum(axis=1)), kind="stable")

    def exact_value(y: np.ndarray) -> float:
        return float(w @ y + y @ N @ y)

    def interval_bound(fixed: np.ndarray) -> float:
        # every pair touching a free coordinate relaxed to |.|
        free = fixed == 0
        yf = fixed.astype(float)
        val_fixed = float(w @ yf + yf @ N @ yf)
        return (
            val_fixed
            + float(diagN[free].sum())
            + float(absw[free].sum())
            + 2.0 * float(absN[np.ix_(~free, free)].sum())
            + float(absN[np.ix_(free, free)].sum())
        )

    def greedy_completion(fixed: np.ndarray) -> np.ndarray:
        free = fixed == 0
        yf = fixed.astype(float)
        lin = w + 2.0 * N @ yf
        return np.where(free, np.where(lin >= 0.0, 1.0, -1.0), yf)

    best_y = _polish(np.where(w >= 0.0, 1.0, -1.0), w, N)
    best_val = exact_value(best_y)

    def offer(y: np.ndarray) -> None:
        nonlocal best_y, best_val
        val = exact_value(y)
        if val > best_val or (val == best_val and tuple(y) < tuple(best_y)):
            best_y, best_val = y.copy(), val

    root = np.zeros(q, dtype=np.int8)
    heap: list[tuple[float, int, np.ndarray]] = [(-interval_bound(root), 0, root)]
    counter = 1
    nodes = 0
    optimal = True
    gap = 0.0
    while heap:
        if nodes >= limits.node_limit or time.monotonic() > deadline:
            optimal = False
            gap = max(0.0, -heap[0][0] - best_val)
            break
        neg_bound, _, fixed = heapq.heappop(heap)
        nodes += 1
        if -neg_bound < best_val:
            break  # every open node is dominated by the incumbent
        branch = next((int(i) for i in order if fixed[i] == 0), None)
        if branch is None:
            offer(fixed.astype(float))
            continue
        for sign in (-1, 1):
            child = fixed.copy()
            child[branch] = sign
            if not np.any(child == 0):
                offer(child.astype(float))
                continue
            offer(greedy_completion(child))
            child_bound = interval_bound(child)
            if child_bound >= best_val:
                heapq.heappush(heap, (-child_bound, counter, child))
                counter += 1
    return best_y, nodes, optimal, gap


def solve_inner_max(
    problem: InnerMaxProblem,
    limits: SolveLimits | None = None,
    method: str = "auto",
) -> InnerMaxResult:
    """Maximize z'Mz with z[0] = +1; exact unless a limit interrupts."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if limits is None:
        limits = SolveLimits()
    M = problem.M
    p = problem.p
    q = p - 1
    if q == 0:
        z = np.array([1.0])
        return InnerMaxResult(
            z_star=z, value=float(M[0, 0]), nodes_explored=1,
            method="enumeration", optimal=True, gap=0.0,
        )
    const, w, N = _reduce(M)
    if method == "auto":
        method = "enumeration" if q <= ENUM_MAX_FREE else "branch_and_bound"
    if method == "enumeration":
        y, nodes = _enumerate(w, N)
        optimal, gap = True, 0.0
    else:
        deadline = time.monotonic() + limits.time_limit
        y, nodes, optimal, gap = _branch_and_bound(w, N, limits, deadline)
    z = np.concatenate([[1.0], y])
    z.flags.writeable = False
    value = float(z @ M @ z)
    return InnerMaxResult(
        z_star=z, value=value, nodes_explored=nodes,
        method=method, optimal=optimal, gap=gap,
    )
