"""Compare the exact, lower-bound, and randomized allocations on one trial.

Generates a synthetic covariate matrix, runs the exact cutting-plane
solver and the single-level lower-bound approximation, and benchmarks
both against the quantiles of randomly balanced allocations.  At the
default size the exact solver certifies optimality in a few seconds.
"""

import argparse

from trialdesign import (
    SolveLimits,
    SyntheticSpec,
    generate_synthetic,
    rand_benchmark,
    solve_exact,
    solve_lb,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=14, help="number of subjects")
    parser.add_argument("--p", type=int, default=4, help="encoded covariate columns")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--replicates", type=int, default=200)
    args = parser.parse_args()

    H = generate_synthetic(SyntheticSpec(n=args.n, p=args.p, seed=args.seed))
    print(f"synthetic trial: n={H.n} subjects, p={H.p} columns, seed={args.seed}")

    limits = SolveLimits(time_limit=60.0, seed=args.seed)
    exact = solve_exact(H, limits)
    lb = solve_lb(H, limits)
    bench_s = rand_benchmark(
        H, objective="surrogate", replicates=args.replicates, seed=args.seed
    )
    bench_o = rand_benchmark(
        H, objective="original", replicates=args.replicates, seed=args.seed
    )

    def fmt(value) -> str:
        return "confounded" if value is None else f"{value:10.4f}"

    print()
    print(f"{'allocation':<34}{'surrogate':>12}{'original':>12}")
    print(
        f"{'EXACT (' + exact.status + ')':<34}"
        f"{fmt(exact.surrogate_value):>12}{fmt(exact.original_value):>12}"
    )
    print(
        f"{'LB approximation (' + lb.status + ')':<34}"
        f"{fmt(lb.surrogate_value):>12}{fmt(lb.original_value):>12}"
    )
    for q in (0.01, 0.05, 0.5):
        label = f"random, {q:.0%} quantile of {args.replicates}"
        print(
            f"{label:<34}"
            f"{fmt(bench_s.quantiles[q]):>12}{fmt(bench_o.quantiles[q]):>12}"
        )

    print()
    gap = exact.diagnostics["gap"]
    gap_text = "n/a" if gap is None else f"{gap:.2e}"
    print(
        f"exact solver: {exact.diagnostics['iterations']} iterations, "
        f"certified gap {gap_text}, {exact.wall_time:.2f}s"
    )
    print(
        "the lower-bound design needs one quadratic solve and lands within "
        f"{100 * (lb.surrogate_value / exact.surrogate_value - 1):.2f}% "
        "of the exact worst-case variance here"
    )
    print(
        "at a trial this small the surrogate and original columns can "
        "disagree; demos/03_surrogate_gap.py shows the gap closing as n grows"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
