import time

import numpy as np
import pytest

from conftest import balanced_corners, brute_min_max_cuts, oracle_lb_matrix
from trialdesign.bqp import (
    BqpResult,
    CutSet,
    _batched_pg,
    _corner_bounds,
    minimize_max_quadratic,
)
from trialdesign.limits import SolveLimits
from trialdesign.objective import Allocation


def random_cuts(n: int, k: int, rng: np.random.Generator) -> CutSet:
    mats = []
    for _ in range(k):
        B = rng.normal(size=(n, n))
        mats.append(B @ B.T / n)
    return CutSet(constants=rng.uniform(0.0, 0.5, size=k), matrices=np.stack(mats))


def brute_value(cuts: CutSet) -> float:
    return brute_min_max_cuts(cuts.constants, cuts.matrices, balanced_corners(cuts.n))


class TestCutSet:
    def test_properties_and_read_only(self):
        cuts = CutSet(constants=np.array([0.5]), matrices=np.eye(3)[None])
        assert cuts.n == 3
        assert cuts.k == 1
        with pytest.raises(ValueError):
            cuts.matrices[0, 0, 0] = 2.0

    def test_from_pairs(self):
        cuts = CutSet.from_pairs([(0.5, np.eye(2)), (1.0, 2.0 * np.eye(2))])
        assert cuts.k == 2
        assert cuts.constants.tolist() == [0.5, 1.0]

    def test_from_pairs_rejects_empty(self):
        with pytest.raises(ValueError, match="at least one"):
            CutSet.from_pairs([])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError, match="matching"):
            CutSet(constants=np.array([0.0, 1.0]), matrices=np.eye(2)[None])

    def test_rejects_asymmetric(self):
        A = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            CutSet(constants=np.zeros(1), matrices=A[None])

    def test_rejects_indefinite(self):
        A = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(ValueError, match="not PSD"):
            CutSet(constants=np.zeros(1), matrices=A[None])

    def test_rejects_non_finite(self):
        A = np.full((2, 2), np.inf)
        with pytest.raises(ValueError, match="finite"):
            CutSet(constants=np.zeros(1), matrices=A[None])

    def test_symmetrizes_within_tolerance(self):
        A = np.array([[1.0, 0.5 + 1e-10], [0.5, 1.0]])
        cuts = CutSet(constants=np.zeros(1), matrices=A[None])
        assert cuts.matrices[0, 0, 1] == cuts.matrices[0, 1, 0]


class TestResult:
    def test_rejects_value_below_bound(self):
        alloc = Allocation(np.array([1, -1]))
        with pytest.raises(ValueError, match="below"):
            BqpResult(
                x_star=alloc, value=0.0, lower_bound=1.0,
                status="optimal", nodes=0, restarts=0, gap=0.0,
            )

    def test_rejects_unknown_status(self):
        alloc = Allocation(np.array([1, -1]))
        with pytest.raises(ValueError, match="status"):
            BqpResult(
                x_star=alloc, value=1.0, lower_bound=0.0,
                status="done", nodes=0, restarts=0, gap=1.0,
            )


class TestKnownInstances:
    def test_two_subject_off_diagonal_cancellation(self):
        cuts = CutSet(
            constants=np.zeros(1),
            matrices=np.array([[[0.25, 0.25], [0.25, 0.25]]]),
        )
        for mode in ("exact", "heuristic"):
            res = minimize_max_quadratic(cuts, SolveLimits(mode=mode))
            assert res.x_star.x.tolist() == [1, -1]
            assert res.value == pytest.approx(0.0, abs=1e-12)

    def test_alternating_design_reaches_zero(self, toy_design):
        cuts = CutSet(constants=np.zeros(1), matrices=oracle_lb_matrix(toy_design)[None])
        res = minimize_max_quadratic(cuts, SolveLimits(mode="exact"))
        assert res.value == pytest.approx(0.0, abs=1e-12)
        assert res.status == "optimal"
        assert res.x_star.x.tolist() in ([1, -1, -1, 1], [1, 1, -1, -1])

    def test_rejects_single_subject(self):
        cuts = CutSet(constants=np.zeros(1), matrices=np.ones((1, 1, 1)))
        with pytest.raises(ValueError, match="two subjects"):
            minimize_max_quadratic(cuts)


class TestExact:
    def test_three_cut_instance_matches_enumeration(self):
        rng = np.random.default_rng(5)
        cuts = random_cuts(12, 3, rng)
        res = minimize_max_quadratic(cuts, SolveLimits(mode="exact"))
        assert res.status == "optimal"
        assert res.value == pytest.approx(brute_value(cuts), abs=1e-8)

    def test_matches_enumeration_across_sizes(self):
        rng = np.random.default_rng(17)
        for n, k in [(6, 1), (7, 2), (9, 3), (10, 1), (11, 4), (12, 2)]:
            cuts = random_cuts(n, k, rng)
            res = minimize_max_quadratic(cuts, SolveLimits(mode="exact", seed=3))
            x = res.x_star.x
            assert res.status == "optimal"
            assert res.value == pytest.approx(brute_value(cuts), abs=1e-8)
            assert x[0] == 1
            assert abs(int(x.sum())) <= 1
            recomputed = cuts.constants + np.einsum(
                "kij,i,j->k", cuts.matrices, x, x
            )
            assert res.value == pytest.approx(float(recomputed.max()), abs=1e-10)
            assert res.lower_bound <= res.value + 1e-8
            assert res.gap <= SolveLimits().epsilon + 1e-12

    def test_constant_shift_moves_value_only(self):
        rng = np.random.default_rng(29)
        cuts = random_cuts(8, 2, rng)
        shifted = CutSet(constants=cuts.constants + 5.0, matrices=cuts.matrices)
        a = minimize_max_quadratic(cuts, SolveLimits(mode="exact"))
        b = minimize_max_quadratic(shifted, SolveLimits(mode="exact"))
        assert b.value == pytest.approx(a.value + 5.0, abs=1e-9)
        assert b.x_star.x.tolist() == a.x_star.x.tolist()

    def test_node_limit_returns_feasible_incumbent(self):
        rng = np.random.default_rng(37)
        v = rng.normal(size=12)
        cuts = CutSet(constants=np.zeros(1), matrices=np.outer(v, v)[None])
        res = minimize_max_quadratic(cuts, SolveLimits(mode="exact", node_limit=1))
        ref = brute_value(cuts)
        assert res.status == "incumbent"
        assert res.gap > 0.0
        assert res.value >= ref - 1e-10
        assert res.lower_bound <= ref + 1e-8
        assert abs(int(res.x_star.x.sum())) <= 1

    def test_time_limit_returns_feasible_incumbent(self):
        rng = np.random.default_rng(41)
        cuts = random_cuts(40, 3, rng)
        res = minimize_max_quadratic(cuts, SolveLimits(mode="exact", time_limit=0.3))
        assert res.status == "incumbent"
        assert res.gap >= 0.0
        assert res.value >= res.lower_bound - 1e-8
        assert abs(int(res.x_star.x.sum())) <= 1


class TestHeuristic:
    def test_never_beats_exact_and_stays_feasible(self):
        rng = np.random.default_rng(53)
        for n, k in [(6, 1), (8, 2), (9, 2), (12, 3)]:
            cuts = random_cuts(n, k, rng)
            heur = minimize_max_quadratic(cuts, SolveLimits(mode="heuristic"))
            assert heur.value >= brute_value(cuts) - 1e-9
            assert heur.x_star.x[0] == 1
            assert abs(int(heur.x_star.x.sum())) <= 1
            assert heur.status in ("optimal", "incumbent")

    def test_seed_determinism(self):
        rng = np.random.default_rng(61)
        cuts = random_cuts(14, 2, rng)
        a = minimize_max_quadratic(cuts, SolveLimits(mode="heuristic", seed=9))
        b = minimize_max_quadratic(cuts, SolveLimits(mode="heuristic", seed=9))
        assert a.value == b.value
        assert a.x_star.x.tolist() == b.x_star.x.tolist()
        assert a.restarts >= 32

    def test_warm_start_accepted(self):
        rng = np.random.default_rng(67)
        cuts = random_cuts(8, 1, rng)
        warm = Allocation(np.array([1, -1, 1, -1, 1, -1, 1, -1]))
        res = minimize_max_quadratic(
            cuts, SolveLimits(mode="heuristic"), warm_start=warm
        )
        assert res.restarts == 33

    def test_warm_start_length_checked(self):
        rng = np.random.default_rng(71)
        cuts = random_cuts(8, 1, rng)
        with pytest.raises(ValueError, match="length"):
            minimize_max_quadratic(
                cuts, SolveLimits(mode="heuristic"), warm_start=[1.0, -1.0]
            )

    def test_warm_start_balance_checked(self):
        rng = np.random.default_rng(73)
        cuts = random_cuts(4, 1, rng)
        with pytest.raises(ValueError, match="balanced"):
            minimize_max_quadratic(
                cuts, SolveLimits(mode="heuristic"), warm_start=[1.0, 1.0, 1.0, -1.0]
            )


class TestNodeBounds:
    def test_relaxation_bounds_stay_below_subcube_minimum(self):
        # both node bounds must under-estimate the best balanced completion
        rng = np.random.default_rng(83)
        deadline = time.monotonic() + 30.0
        for _ in range(20):
            n, k = 10, int(rng.integers(1, 4))
            cuts = random_cuts(n, k, rng)
            c, A = cuts.constants, cuts.matrices
            diag = np.einsum("kii->ki", A).copy()

            source = rng.permutation(np.repeat([1.0, -1.0], n // 2))
            fixed = np.zeros(n, dtype=np.int8)
            nfix = int(rng.integers(2, 6))
            fixed[:nfix] = source[:nfix].astype(np.int8)

            corners = balanced_corners(n)
            mask = np.all(corners[:, :nfix] == source[:nfix], axis=1)
            true_min = brute_min_max_cuts(c, A, corners[mask])

            xf = fixed.astype(float)
            free = fixed == 0
            L = np.tile(np.where(free, -1.0, xf), (k, 1))
            U = np.tile(np.where(free, 1.0, xf), (k, 1))
            step = 1.0 / (2.0 * max(np.linalg.eigvalsh(A[j])[-1] for j in range(k)))
            _, pg = _batched_pg(
                c, A, np.tile(source, (k, 1)), L, U, 0, 0, step, deadline
            )
            assert float(pg.max()) <= true_min + 1e-8

            corner = _corner_bounds(c, A, diag, fixed)
            assert float(corner.max()) <= true_min + 1e-8
