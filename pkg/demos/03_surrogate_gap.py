"""Show the surrogate objective tightening as the trial grows.

For each trial size the script scans random balanced allocations,
comparing the exact worst-case variance with its single-level
surrogate, and prints the mean relative gap.  The per-allocation pairs
land in plot-ready CSV files (columns: original,surrogate), one file
per size.
"""

import argparse
from pathlib import Path

import numpy as np

from trialdesign import (
    SyntheticSpec,
    generate_synthetic,
    random_balanced_allocations,
    surrogate_gap_scan,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[60, 120, 240])
    parser.add_argument("--p", type=int, default=4)
    parser.add_argument("--samples", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default=".", help="where the CSV files go")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    print(f"{'n':>6}{'mean gap':>12}{'worst gap':>12}  pairs file")
    for n in args.sizes:
        H = generate_synthetic(SyntheticSpec(n=n, p=args.p, seed=args.seed))
        allocations = random_balanced_allocations(n, args.samples, args.seed + 1)
        pairs = surrogate_gap_scan(H, allocations)
        gaps = [
            abs(pair.surrogate - pair.original) / pair.original
            for pair in pairs
            if pair.original is not None and pair.original > 0
        ]
        path = out_dir / f"gap_pairs_n{n}.csv"
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write("original,surrogate\n")
            for pair in pairs:
                left = "" if pair.original is None else repr(pair.original)
                handle.write(f"{left},{pair.surrogate!r}\n")
        print(
            f"{n:>6}{np.mean(gaps):>12.4f}{np.max(gaps):>12.4f}  {path}"
        )

    print()
    print(
        "the surrogate replaces the inverse in the worst-case variance with "
        "its two-term expansion, so the relative gap shrinks as covariate "
        "imbalance concentrates with growing n"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
