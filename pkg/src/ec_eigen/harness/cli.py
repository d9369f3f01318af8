"""``ec-eigen`` command line: run, encode, compare, oracle.

Exit codes: 0 success, 2 configuration error, 3 solver failure (including
non-convergence), 4 fault capacity exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from ..coding import build_staggered_coding_matrix, default_p
from ..errors import ECEigenError
from ..redundancy import compute_redundancy, save_blocks
from .config import load_config_file
from .experiment import compare_runs, load_result, run_many, write_comparison
from .matrices import load_matrix, oracle_eigenvalues

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CAPACITY = 0, 2, 3, 4


def _matrix_arg(text):
    """A Matrix Market path, or an inline JSON generator spec."""
    text = text.strip()
    return json.loads(text) if text.startswith("{") else text


def cmd_run(args):
    cfgs = load_config_file(args.config)
    for c in cfgs:
        if args.explicit:
            c.explicit_check = True
        if args.output and len(cfgs) == 1:
            c.output = args.output
    outcomes = run_many(cfgs, jobs=args.jobs)
    code = EXIT_OK
    for output, status, exit_code, message in outcomes:
        print(f"{output}: {status}")
        if message:
            print(f"error: {output}: {message}", file=sys.stderr)
        if exit_code is not None:
            code = max(code, exit_code)
        elif status != "ok":
            code = max(code, EXIT_SOLVER)
    return code


def cmd_encode(args):
    A = load_matrix(_matrix_arg(args.matrix))
    p = default_p(args.k) if args.p == "auto" else int(args.p)
    t0 = time.perf_counter()
    E = build_staggered_coding_matrix(A.shape[0], args.k, p, args.seed)
    blocks = compute_redundancy(A, E)
    elapsed = time.perf_counter() - t0
    save_blocks(args.out, E, blocks, {"encode_time": elapsed, "matrix": args.matrix})
    print(json.dumps({"out": str(args.out), "n": E.n, "k": E.k, "p": E.p, "nnz_E": E.nnz, "encode_time": elapsed}))
    return EXIT_OK


def cmd_compare(args):
    results = [load_result(d) for d in args.inputs]
    rows = compare_runs(results)
    write_comparison(rows, args.out)
    for r in rows:
        print(",".join(str(v) for v in r.values()))
    return EXIT_OK


def cmd_oracle(args):
    A = load_matrix(_matrix_arg(args.matrix))
    if args.largest:
        lam = oracle_eigenvalues(A, args.largest, "largest")
    else:
        lam = oracle_eigenvalues(A, args.smallest or 1, "smallest")
    print(json.dumps({"n": A.shape[0], "eigenvalues": [float(x) for x in lam]}))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ec-eigen", description="Erasure-coded fault-tolerant symmetric eigensolvers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment (or grid) from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--jobs", type=int, default=1, help="grid cells run concurrently")
    run.add_argument("--output", help="override the output directory (single config only)")
    run.add_argument("--explicit", action="store_true", help="cross-check implicit operators against explicit A', B'")
    run.set_defaults(func=cmd_run)

    enc = sub.add_parser("encode", help="build E and the redundancy blocks R, S, T")
    enc.add_argument("--matrix", required=True)
    enc.add_argument("--k", type=int, required=True)
    enc.add_argument("--p", default="auto")
    enc.add_argument("--seed", type=int, default=0)
    enc.add_argument("--out", required=True)
    enc.set_defaults(func=cmd_encode)

    cmp_ = sub.add_parser("compare", help="tabulate overheads and oracle errors of finished runs")
    cmp_.add_argument("--inputs", nargs="+", required=True)
    cmp_.add_argument("--out", required=True)
    cmp_.set_defaults(func=cmd_compare)

    orc = sub.add_parser("oracle", help="dense reference eigenvalues")
    orc.add_argument("--matrix", required=True)
    g = orc.add_mutually_exclusive_group()
    g.add_argument("--smallest", type=int)
    g.add_argument("--largest", type=int)
    orc.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ECEigenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
