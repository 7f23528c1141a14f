"""Command-line surface: solve, check, gap, experiment.

Exit codes are a stable contract: 0 success, 1 file/schema/validation
errors, 2 no applicable rounding algorithm, 3 SDP solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import statistics
import sys

from .core import PcspError, parse_instance
from .gaps import build_gamma5_gap, gamma5_auto_L, gamma5_subset_count, verify_gap
from .generate import planted_instance
from .poly import (
    MajWitness,
    SeparatingWeight,
    contains_family,
    separating_hyperplane,
)
from .rounding import (
    NoApplicableAlgorithmError,
    prepare_pipeline,
    robust_solve,
    trial_fractions,
)
from .sdp import SdpSolveError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_ALGORITHM = 2
EXIT_SDP = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are input errors, not crashes
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write_out(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def cmd_solve(args) -> int:
    inst = parse_instance(_read(args.instance))
    report = robust_solve(
        inst, algo=args.algorithm, trials=args.trials, seed=args.seed, tol=args.sdp_tol
    )
    _write_out(report.to_json(), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    inst = parse_instance(_read(args.template))
    results = []
    for idx, pair in enumerate(inst.template.pairs):
        entry: dict = {"pair": idx + 1, "arity": pair.arity}
        check = contains_family(pair, args.family, args.max_arity)
        entry["family"] = args.family
        entry["max_arity"] = args.max_arity
        entry["polymorphism"] = check.ok
        if not check.ok:
            entry["failing_arity"] = check.family.arity
            entry["witness_rows"] = [list(r) for r in check.witness]
            entry["witness_image"] = list(check.image)
        sep = separating_hyperplane(pair.strong)
        if isinstance(sep, SeparatingWeight):
            entry["separating_weight"] = [str(v) for v in sep.w]
            entry["separating_eta"] = str(sep.eta)
        else:
            entry["majority_witness"] = {
                "arity": sep.arity,
                "extra": list(sep.extra),
                "multiplicities": [[list(t), mult] for t, mult in sep.multiplicities],
            }
        results.append(entry)
    _write_out(json.dumps({"format": "pcsp-check-report v1", "pairs": results}, indent=1), args.out)
    return EXIT_OK


def cmd_gap(args) -> int:
    if args.construction != "gamma5":
        raise PcspError(f"unknown gap construction {args.construction!r}")
    if args.L == "auto":
        L = gamma5_auto_L(args.k)
    else:
        L = int(args.L)
    inst = build_gamma5_gap(args.k, args.b, L, max_vars=args.max_vars)
    used = gamma5_subset_count(args.k, L, args.max_vars)
    total = gamma5_subset_count(args.k, L, None)
    notes = f"L={L}; window chains for {used} of {total} base-variable subsets"
    if used < total:
        notes += f" (restricted to keep at most {args.max_vars} variables)"
    cert = verify_gap(inst, tol=args.sdp_tol, notes=notes)
    _write_out(cert.to_json(), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    spec = json.loads(_read(args.spec))
    required = {"template", "n", "m", "eps", "trials", "seed"}
    missing = sorted(required - set(spec))
    if missing:
        raise PcspError(f"experiment spec is missing fields {missing}")
    trials = int(spec["trials"])
    if trials < 1:
        raise PcspError("trials must be >= 1")
    eps_grid = [float(e) for e in spec["eps"]]
    if any(not 0 < e < 0.5 for e in eps_grid):
        raise PcspError("eps grid values must lie in (0, 0.5)")
    template = parse_instance(_read(spec["template"])).template
    algo = spec.get("algorithm", "auto")
    seed = int(spec["seed"])
    max_neg = spec.get("max_negations")
    rows = []
    for eps in eps_grid:
        inst, _ = planted_instance(
            template, int(spec["n"]), int(spec["m"]), eps, seed=seed, max_negations=max_neg
        )
        state = prepare_pipeline(inst, algo=algo, seed=seed)
        fracs = [1.0 - float(f) for f in trial_fractions(state, trials, seed)]
        rows.append(
            (
                eps,
                statistics.fmean(fracs),
                statistics.pstdev(fracs) if len(fracs) > 1 else 0.0,
                trials,
                state.algorithm,
            )
        )
    rows.sort(key=lambda r: r[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eps", "mean_violated_fraction", "stddev", "trials", "algorithm"])
    for eps, mean, std, t, a in rows:
        writer.writerow([format(eps, ".17g"), format(mean, ".17g"), format(std, ".17g"), t, a])
    _write_out(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pcsp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="robust-solve an instance document")
    s.add_argument("--instance", required=True)
    s.add_argument("--algorithm", choices=("auto", "cmm", "at", "threshold"), default="auto")
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sdp-tol", type=float, default=1e-6)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="polymorphism and hyperplane report for a template")
    c.add_argument("--template", required=True)
    c.add_argument("--family", choices=("maj", "at", "or", "parity"), required=True)
    c.add_argument("--max-arity", type=int, default=7)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_check)

    g = sub.add_parser("gap", help="build and verify an integrality-gap instance")
    g.add_argument("construction", choices=("gamma5",))
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--b", type=int, required=True)
    g.add_argument("--L", default="auto")
    g.add_argument("--max-vars", type=int, default=24)
    g.add_argument("--sdp-tol", type=float, default=1e-6)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gap)

    e = sub.add_parser("experiment", help="planted-instance sweep, CSV output")
    e.add_argument("--spec", required=True)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        return int(e.code or 0)
    except NoApplicableAlgorithmError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_ALGORITHM
    except SdpSolveError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SDP
    except (PcspError, OSError, json.JSONDecodeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
