"""Command line interface.

Subcommands: synth (synthetic covariates), encode (CSV + schema to a
design matrix), design (exact / lower-bound / randomized allocation),
evaluate (objectives, benchmark quantiles, variance reduction for a
stored allocation), scan (original-vs-surrogate pairs for plotting).
Results print as JSON on stdout; failures print one JSON error object
on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from ._parallel import ENV_THREADS, default_threads
from .baselines import rand_benchmark, random_balanced_allocations
from .covariates import (
    CovariateSchema,
    SyntheticSpec,
    encode_csv,
    generate_synthetic,
    matrix_hash,
    validate,
)
from .cutting_plane import solve_exact
from .errors import ConfoundedDesign, TrialDesignError
from .evaluation import surrogate_gap_scan, variance_reduction
from .limits import SolveLimits
from .lower_bound import solve_lb
from .objective import CovariateSpace, lb_value, original_value, spectral_cache, surrogate_value
from .report import (
    DesignReport,
    read_allocation_csv,
    read_matrix_csv,
    write_allocation_csv,
    write_matrix_csv,
)

METHOD_CHOICES = ("exact", "lb", "rand")
SPACE_CHOICES = ("hypercube", "rows")
MODE_CHOICES = ("auto", "exact", "heuristic")


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _emit(doc: dict) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _space(name: str) -> CovariateSpace:
    return CovariateSpace.hypercube() if name == "hypercube" else CovariateSpace.rows()


def _load_matrix(path) -> np.ndarray:
    return validate(read_matrix_csv(path)).data


def _limits(args) -> SolveLimits:
    return SolveLimits(
        epsilon=args.epsilon,
        time_limit=args.time_limit,
        node_limit=args.node_limit,
        seed=args.seed,
    )


def cmd_synth(args) -> int:
    matrix = generate_synthetic(SyntheticSpec(n=args.n, p=args.p, seed=args.seed))
    columns = tuple(["intercept"] + [f"x{i}" for i in range(1, args.p)])
    write_matrix_csv(args.out, matrix.data, columns)
    _emit(
        {
            "command": "synth",
            "n": matrix.n,
            "p": matrix.p,
            "seed": args.seed,
            "retries": matrix.retries,
            "condition_number": matrix.condition_number,
            "matrix_sha256": matrix.content_hash(),
            "out": str(args.out),
        }
    )
    return 0


def cmd_encode(args) -> int:
    schema = CovariateSchema.from_file(args.schema)
    matrix = encode_csv(args.csv, schema)
    write_matrix_csv(args.out, matrix.data, matrix.columns)
    _emit(
        {
            "command": "encode",
            "csv": str(args.csv),
            "csv_sha256": _file_hash(args.csv),
            "schema": str(args.schema),
            "n": matrix.n,
            "p": matrix.p,
            "excluded_rows": matrix.excluded_rows,
            "columns": list(matrix.columns or ()),
            "condition_number": matrix.condition_number,
            "matrix_sha256": matrix.content_hash(),
            "out": str(args.out),
        }
    )
    return 0


def _rand_design_report(A, args, space, threads) -> DesignReport:
    t0 = time.monotonic()
    cache = spectral_cache(A)
    allocations = random_balanced_allocations(A.shape[0], args.replicates, args.seed)
    benches = {
        name: rand_benchmark(
            A, objective=name, space=space, allocations=allocations,
            cache=cache, threads=threads,
        )
        for name in ("surrogate", "original")
    }
    first = allocations[0]
    surr = float(surrogate_value(A, first, space, cache)[0])
    try:
        orig = float(original_value(A, first, space, cache)[0])
    except ConfoundedDesign:
        orig = None
    diagnostics = {
        "replicates": args.replicates,
        "quantiles": {name: b.to_dict()["quantiles"] for name, b in benches.items()},
        "confounded": {name: b.confounded for name, b in benches.items()},
        "note": "allocation is the first replicate; quantiles summarize all of them",
    }
    return DesignReport(
        method="RAND",
        allocation=first,
        surrogate_value=surr,
        original_value=orig,
        status="sampled",
        wall_time=time.monotonic() - t0,
        seed=args.seed,
        n=A.shape[0],
        p=A.shape[1],
        matrix_sha256=matrix_hash(A),
        diagnostics=diagnostics,
        parameters={},
    )


def cmd_design(args) -> int:
    threads = args.threads if args.threads is not None else default_threads()
    A = _load_matrix(args.matrix)
    space = _space(args.space)
    limits = _limits(args)
    if args.method == "exact":
        report = solve_exact(
            A, limits, master_mode=args.mode, report_space=space,
            threads=threads, verbose=args.verbose,
        )
    elif args.method == "lb":
        report = solve_lb(A, limits, mode=args.mode, report_space=space, threads=threads)
    else:
        report = _rand_design_report(A, args, space, threads)
    report.parameters.update(
        {
            "matrix": str(args.matrix),
            "matrix_file_sha256": _file_hash(args.matrix),
            "method": args.method,
            "epsilon": args.epsilon,
            "time_limit": args.time_limit,
            "node_limit": args.node_limit,
            "seed": args.seed,
            "mode": args.mode,
            "space": args.space,
            "replicates": args.replicates,
            "threads": threads,
        }
    )
    if args.out:
        report.save(args.out)
    if args.allocation_out:
        write_allocation_csv(args.allocation_out, report.allocation)
    _emit(report.to_dict())
    return 0


def cmd_evaluate(args) -> int:
    threads = args.threads if args.threads is not None else default_threads()
    A = _load_matrix(args.matrix)
    allocation = read_allocation_csv(args.allocation)
    if allocation.n != A.shape[0]:
        raise ValueError(
            f"allocation length {allocation.n} != matrix rows {A.shape[0]}"
        )
    space = _space(args.space)
    cache = spectral_cache(A)
    surr, surr_z = surrogate_value(A, allocation, space, cache)
    try:
        orig, orig_z = original_value(A, allocation, space, cache)
    except ConfoundedDesign:
        orig, orig_z = None, None
    doc = {
        "command": "evaluate",
        "matrix": str(args.matrix),
        "matrix_file_sha256": _file_hash(args.matrix),
        "matrix_sha256": matrix_hash(A),
        "allocation": str(args.allocation),
        "allocation_file_sha256": _file_hash(args.allocation),
        "n": A.shape[0],
        "p": A.shape[1],
        "space": args.space,
        "seed": args.seed,
        "surrogate_value": float(surr),
        "surrogate_worst_z": [float(v) for v in surr_z],
        "original_value": None if orig is None else float(orig),
        "original_worst_z": None if orig_z is None else [float(v) for v in orig_z],
        "lb_value": float(lb_value(A, allocation, cache)),
    }
    benches = {
        name: rand_benchmark(
            A, objective=name, space=space, replicates=args.replicates,
            seed=args.seed, cache=cache, threads=threads,
        )
        for name in ("surrogate", "original")
    }
    doc["rand"] = {
        name: {"quantiles": b.to_dict()["quantiles"], "confounded": b.confounded}
        for name, b in benches.items()
    }
    if not args.skip_variance:
        vr = variance_reduction(
            A, allocation, z0_count=args.z0_count,
            rand_designs=args.rand_designs, seed=args.seed, cache=cache,
        )
        doc["variance_reduction"] = vr.summary()
        if args.variance_out:
            rows = vr.to_rows()
            with open(args.variance_out, "w", encoding="utf-8", newline="") as handle:
                import csv as _csv

                writer = _csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
                writer.writeheader()
                writer.writerows(rows)
            doc["variance_out"] = str(args.variance_out)
    if args.out:
        Path(args.out).write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    _emit(doc)
    return 0


def cmd_scan(args) -> int:
    threads = args.threads if args.threads is not None else default_threads()
    A = _load_matrix(args.matrix)
    space = _space(args.space)
    allocations = random_balanced_allocations(A.shape[0], args.samples, args.seed)
    pairs = surrogate_gap_scan(A, allocations, space=space, threads=threads)
    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        handle.write("original,surrogate\n")
        for pair in pairs:
            left = "" if pair.original is None else repr(pair.original)
            handle.write(f"{left},{pair.surrogate!r}\n")
    gaps = [
        abs(pair.surrogate - pair.original) / pair.original
        for pair in pairs
        if pair.original is not None and pair.original > 0
    ]
    _emit(
        {
            "command": "scan",
            "matrix": str(args.matrix),
            "matrix_file_sha256": _file_hash(args.matrix),
            "matrix_sha256": matrix_hash(A),
            "samples": args.samples,
            "seed": args.seed,
            "space": args.space,
            "confounded": sum(1 for pair in pairs if pair.original is None),
            "mean_relative_gap": (float(np.mean(gaps)) if gaps else None),
            "out": str(args.out),
        }
    )
    return 0


def _add_common_solver_args(sub) -> None:
    sub.add_argument("--epsilon", type=float, default=1e-6)
    sub.add_argument("--time-limit", type=float, default=300.0)
    sub.add_argument("--node-limit", type=int, default=2_000_000)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument(
        "--threads", type=int, default=None,
        help=f"worker threads (default: ${ENV_THREADS} or 1)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trialdesign",
        description="Covariate-aware treatment allocation for two-arm trials.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic covariate matrix")
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--p", type=int, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    synth.set_defaults(fn=cmd_synth)

    encode = commands.add_parser("encode", help="encode a categorical CSV to +/-1 columns")
    encode.add_argument("--csv", required=True)
    encode.add_argument("--schema", required=True, help="YAML or JSON schema file")
    encode.add_argument("--out", required=True)
    encode.set_defaults(fn=cmd_encode)

    design = commands.add_parser("design", help="compute a treatment allocation")
    design.add_argument("--matrix", required=True)
    design.add_argument("--method", choices=METHOD_CHOICES, required=True)
    design.add_argument("--mode", choices=MODE_CHOICES, default="auto")
    design.add_argument("--space", choices=SPACE_CHOICES, default="hypercube")
    design.add_argument("--replicates", type=int, default=100, help="rand method only")
    design.add_argument("--out", default=None, help="write the report JSON here too")
    design.add_argument("--allocation-out", default=None, help="write the allocation CSV")
    design.add_argument("--verbose", action="store_true")
    _add_common_solver_args(design)
    design.set_defaults(fn=cmd_design)

    evaluate = commands.add_parser("evaluate", help="evaluate a stored allocation")
    evaluate.add_argument("--matrix", required=True)
    evaluate.add_argument("--allocation", required=True)
    evaluate.add_argument("--space", choices=SPACE_CHOICES, default="hypercube")
    evaluate.add_argument("--replicates", type=int, default=100)
    evaluate.add_argument("--z0-count", type=int, default=1000)
    evaluate.add_argument("--rand-designs", type=int, default=1000)
    evaluate.add_argument("--skip-variance", action="store_true")
    evaluate.add_argument("--variance-out", default=None)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--threads", type=int, default=None)
    evaluate.add_argument("--out", default=None)
    evaluate.set_defaults(fn=cmd_evaluate)

    scan = commands.add_parser("scan", help="original-vs-surrogate pairs on random allocations")
    scan.add_argument("--matrix", required=True)
    scan.add_argument("--samples", type=int, default=50)
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--space", choices=SPACE_CHOICES, default="hypercube")
    scan.add_argument("--threads", type=int, default=None)
    scan.add_argument("--out", required=True)
    scan.set_defaults(fn=cmd_scan)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (TrialDesignError, ValueError, OSError) as err:
        doc = {"error": {"type": type(err).__name__, "message": str(err)}}
        print(json.dumps(doc, indent=2, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
