"""Command-line front end: tables, simulations, power studies, self-checks.

Every file-writing command also writes ``<output>.manifest.json`` recording
the command, its full parameter set, the seed, the package version, and the
output paths. Manifests contain no timestamps, so re-running a command
reproduces its outputs byte for byte.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .designs import (
    DESIGN_KINDS,
    DesignConfig,
    DissonanceShiftModel,
    MemoryModel,
    NullModel,
    SubjectModel,
    TwoParamModel,
    iter_experiment,
)
from .exact import expected_spread_table
from .noise import as_exact_weight
from .stats import (
    DegenerateComparisonError,
    SpreadSummary,
    bootstrap_se,
    compare,
    power_report,
    summarize,
)
from .verify import LEVELS, run_checks

__all__ = ["main"]

MODEL_KINDS = ("null", "two-param", "memory", "dissonance-shift")


def _parse_pair(text: str) -> Tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated integers, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freechoice",
        description="Expected-spread tables, experiment simulations, and power studies "
        "for rank-choose-rank protocols.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    table = commands.add_parser(
        "table", help="expected spread for every comparison pair under the null model"
    )
    table.add_argument("--n", type=int, required=True, help="number of objects (2..20)")
    table.add_argument("--p", required=True, help="noise weight, 0 <= p < 1")
    table.add_argument("--format", choices=("csv", "json"), default="csv")
    table.add_argument(
        "--exact-rational",
        action="store_true",
        help="compute in exact rational arithmetic (p is read as a decimal or fraction)",
    )
    table.add_argument("--output", default=None, help="output path (default: table_n<N>.<fmt>)")
    table.set_defaults(func=_cmd_table)

    simulate = commands.add_parser("simulate", help="run one experiment and record every trial")
    _add_experiment_arguments(simulate)
    simulate.add_argument("--format", choices=("csv", "json"), default="csv",
                          help="trial records as CSV or JSON lines")
    simulate.add_argument("--truth-mode", choices=("identity", "random"), default="identity")
    simulate.add_argument("--output", default=None, help="output path (default: trials.<fmt>)")
    simulate.set_defaults(func=_cmd_simulate)

    power = commands.add_parser(
        "power", help="estimate how often a design detects an effect over many replications"
    )
    _add_experiment_arguments(power)
    power.add_argument("--replications", type=int, required=True)
    power.add_argument("--alpha", type=float, default=0.05)
    power.add_argument("--output", default=None, help="output path (default: power.json)")
    power.set_defaults(func=_cmd_power)

    verify = commands.add_parser("verify", help="run the self-verification suite")
    verify.add_argument("--level", choices=LEVELS, default="quick")
    verify.set_defaults(func=_cmd_verify)
    return parser


def _add_experiment_arguments(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--design", choices=DESIGN_KINDS, required=True)
    sub.add_argument("--model", choices=MODEL_KINDS, required=True)
    sub.add_argument("--n", type=int, required=True, help="number of objects")
    sub.add_argument("--subjects", type=int, required=True)
    sub.add_argument("--pair", type=_parse_pair, default=None,
                     help="comparison positions i,j (classic and e0)")
    sub.add_argument("--object-pair", type=_parse_pair, default=None,
                     help="compared objects a,b (e1)")
    sub.add_argument("--p", type=float, required=True, help="noise weight, 0 <= p < 1")
    sub.add_argument("--P", type=float, default=None,
                     help="pre-choice noise weight (two-param model)")
    sub.add_argument("--shift", type=int, default=1,
                     help="positions moved after a close choice (dissonance-shift model)")
    sub.add_argument("--threshold", type=int, default=3,
                     help="largest first-ranking gap that still triggers the shift")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=1)


def _build_model(args: argparse.Namespace) -> SubjectModel:
    if args.model == "null":
        return NullModel(p=args.p)
    if args.model == "two-param":
        if args.P is None:
            raise ValueError("the two-param model needs --P")
        return TwoParamModel(p=args.p, P=args.P)
    if args.model == "memory":
        return MemoryModel(p=args.p)
    return DissonanceShiftModel(p=args.p, shift=args.shift, threshold=args.threshold)


def _build_design(args: argparse.Namespace) -> DesignConfig:
    return DesignConfig(
        kind=args.design,
        n=args.n,
        subjects=args.subjects,
        pair=args.pair,
        object_pair=args.object_pair,
    )


def _write_manifest(command: str, parameters: Dict[str, object], seed: Optional[int],
                    outputs: List[str]) -> str:
    path = outputs[0] + ".manifest.json"
    manifest = {
        "command": command,
        "parameters": parameters,
        "seed": seed,
        "version": __version__,
        "outputs": outputs,
    }
    with open(path, "w", newline="") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def _summary_dict(summary: SpreadSummary) -> Dict[str, object]:
    return {"count": summary.count, "mean": summary.mean, "sd": summary.sd, "se": summary.se}


def _cmd_table(args: argparse.Namespace) -> int:
    if not 2 <= args.n <= 20:
        raise ValueError(f"--n must lie in 2..20, got {args.n}")
    p = as_exact_weight(args.p) if args.exact_rational else float(args.p)
    table = expected_spread_table(args.n, p, exact=args.exact_rational)
    output = args.output or f"table_n{args.n}.{args.format}"
    if args.format == "csv":
        table.write_csv(output)
    else:
        table.write_json(output)
    manifest = _write_manifest(
        "table",
        {
            "n": args.n,
            "p": str(args.p),
            "format": args.format,
            "exact_rational": args.exact_rational,
            "output": output,
        },
        None,
        [output],
    )
    _print_rounded_triangle(table)
    print(f"wrote {len(table.values)} pairs to {output} (manifest {manifest})")
    return 0


def _print_rounded_triangle(table) -> None:
    rounded = table.rounded()
    n = table.n
    width = max(len(text) for text in rounded.values()) + 2
    header = "".join(f"{f'i={i}' if i == 1 else i:>{width}}" for i in range(1, n))
    print(f"{'':>5}{header}")
    for j in range(2, n + 1):
        cells = "".join(
            f"{rounded[pair]:>{width}}"
            for pair in sorted(rounded, key=lambda q: (q.i, q.j))
            if pair.j == j
        )
        print(f"{f'j={j}':>5}{cells}")


def _cmd_simulate(args: argparse.Namespace) -> int:
    design = _build_design(args)
    model = _build_model(args)
    output = args.output or ("trials.csv" if args.format == "csv" else "trials.jsonl")
    summary_path = output + ".summary.json"

    spreads: List[int] = []
    arm_spreads: Dict[str, List[int]] = {"experimental": [], "control": []}
    consistent_spreads: List[int] = []
    reversal_spreads: List[int] = []
    records = iter_experiment(
        design, model, args.seed, truth_mode=args.truth_mode, threads=args.threads
    )
    with open(output, "w", newline="") as handle:
        writer = None
        if args.format == "csv":
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["subject", "arm", "i", "j", "consistent", "spread"])
        for record in records:
            if writer is not None:
                writer.writerow(
                    [
                        record.subject,
                        record.arm,
                        record.i,
                        record.j,
                        "true" if record.consistent else "false",
                        record.spread,
                    ]
                )
            else:
                json.dump(
                    {
                        "subject": record.subject,
                        "arm": record.arm,
                        "i": record.i,
                        "j": record.j,
                        "consistent": record.consistent,
                        "spread": record.spread,
                    },
                    handle,
                    sort_keys=True,
                )
                handle.write("\n")
            spreads.append(record.spread)
            if record.arm != "none":
                arm_spreads[record.arm].append(record.spread)
            (consistent_spreads if record.consistent else reversal_spreads).append(record.spread)

    summary: Dict[str, object] = {
        "design": design.kind,
        "model": model.kind,
        "n": design.n,
        "subjects": design.subjects,
        "seed": args.seed,
        "spread": _summary_dict(summarize(spreads)),
        "consistent_fraction": len(consistent_spreads) / len(spreads),
    }
    by_choice: Dict[str, object] = {}
    for label, values in (("consistent", consistent_spreads), ("reversal", reversal_spreads)):
        by_choice[label] = _summary_dict(summarize(values)) if values else None
    summary["spread_by_choice"] = by_choice
    if design.kind == "e0":
        experimental = summarize(arm_spreads["experimental"])
        control = summarize(arm_spreads["control"])
        summary["experimental"] = _summary_dict(experimental)
        summary["control"] = _summary_dict(control)
        try:
            comparison = compare(experimental, control)
            summary["comparison"] = {
                "difference": comparison.difference,
                "se": comparison.se,
                "z": comparison.z,
            }
        except DegenerateComparisonError:
            summary["comparison"] = None
            summary["note"] = "both arms have zero variance; no comparison scale"
    if design.kind == "e3":
        summary["se_bootstrap"] = bootstrap_se(spreads, seed=args.seed)
    with open(summary_path, "w", newline="") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")

    manifest = _write_manifest(
        "simulate",
        {
            "design": design.kind,
            "model": model.kind,
            "n": design.n,
            "subjects": design.subjects,
            "pair": list(args.pair) if args.pair else None,
            "object_pair": list(args.object_pair) if args.object_pair else None,
            "p": args.p,
            "P": args.P,
            "shift": args.shift if args.model == "dissonance-shift" else None,
            "threshold": args.threshold if args.model == "dissonance-shift" else None,
            "truth_mode": args.truth_mode,
            "format": args.format,
            "threads": args.threads,
            "output": output,
        },
        args.seed,
        [output, summary_path],
    )
    mean = summary["spread"]["mean"]
    print(f"simulated {design.subjects} subjects: mean spread {mean:.6f}")
    print(f"wrote {output}, {summary_path} (manifest {manifest})")
    return 0


def _cmd_power(args: argparse.Namespace) -> int:
    design = _build_design(args)
    model = _build_model(args)
    report = power_report(
        design,
        model,
        replications=args.replications,
        alpha=args.alpha,
        seed=args.seed,
        threads=args.threads,
    )
    output = args.output or "power.json"
    with open(output, "w", newline="") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")
    manifest = _write_manifest(
        "power",
        {
            "design": design.kind,
            "model": model.kind,
            "n": design.n,
            "subjects": design.subjects,
            "pair": list(args.pair) if args.pair else None,
            "object_pair": list(args.object_pair) if args.object_pair else None,
            "p": args.p,
            "P": args.P,
            "shift": args.shift if args.model == "dissonance-shift" else None,
            "threshold": args.threshold if args.model == "dissonance-shift" else None,
            "replications": args.replications,
            "alpha": args.alpha,
            "threads": args.threads,
            "output": output,
        },
        args.seed,
        [output],
    )
    print(f"rejection rate {report['rejection_rate']:.4f} over {args.replications} replications")
    print(f"wrote {output} (manifest {manifest})")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    results = run_checks(args.level)
    failures = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        failures += not result.passed
        print(f"{status} {result.name}: {result.detail}")
    if failures:
        print(f"{failures} of {len(results)} checks failed at level {args.level!r}")
        return 1
    print(f"all {len(results)} checks passed at level {args.level!r}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
