"""Command-line front end.

Three subcommands: ``analyze`` runs the full pipeline on a CSV dataset,
``reproduce`` runs pinned configurations against the vendored fixtures and
prints computed-versus-expected tables with per-cell pass/fail, ``simulate``
runs the Monte-Carlo experiments and writes CSV or JSON.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error,
4 reproduction (golden) failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import resources

import numpy as np

from .data import DataError, load_csv
from .evaluation import EcGate, evaluate_partition
from .matops import MatopsError
from .pipeline import SplaConfig, SplaReport, run_spla
from .blocks import Block, BlockPartition
from .data import sample_cov
from .simulate import (
    BlockDesign,
    ec_distribution,
    gen_spiked_sample,
    identification_rate,
    random_wishart_demo,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
EXIT_GOLDEN = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises instead of calling ``sys.exit``."""

    def error(self, message):
        raise _UsageError(message)


def _parse_grid(spec: str) -> tuple:
    """Parse ``--grid``: ``lo:hi:steps`` or a comma list of penalties.

    A comma-list item may itself be a slash-separated per-loading penalty
    vector, e.g. ``2,5/5/5/2/2``.
    """
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise _UsageError(f"grid {spec!r} is not lo:hi:steps")
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
        if steps < 1:
            raise _UsageError("grid steps must be >= 1")
        return tuple(np.linspace(lo, hi, steps))
    out = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        if "/" in item:
            out.append(tuple(float(v) for v in item.split("/")))
        else:
            out.append(float(item))
    if not out:
        raise _UsageError(f"grid {spec!r} is empty")
    return tuple(out)


def _parse_order(spec: str, names: tuple[str, ...]) -> tuple[tuple[int, ...], ...]:
    """Parse ``--order``: semicolon-separated blocks of comma-separated names."""
    index = {n: i for i, n in enumerate(names)}
    blocks = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        vars_ = []
        for name in part.split(","):
            name = name.strip()
            if name not in index:
                raise _UsageError(f"unknown variable {name!r} in --order")
            vars_.append(index[name])
        blocks.append(tuple(vars_))
    if not blocks:
        raise _UsageError("--order is empty")
    return tuple(blocks)


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report_table(report: SplaReport) -> str:
    """Human-readable rendering derived from the JSON value."""
    d = report.to_json_dict()
    lines = []
    lines.append("Blocks (evaluation order):")
    header = f"  {'block':<24}{'EC':>8}{'SV %':>10}{'CV %':>10}{'partial %':>11}"
    lines.append(header)
    for i, vars_ in enumerate(d["partition"]):
        ec = d["ec"][i]
        ec_s = "-" if ec is None else f"{ec:.2f}"
        lines.append(
            f"  {{{','.join(vars_)}}}".ljust(26)
            + f"{ec_s:>8}"
            + f"{d['shares']['block_sv'][i]:>10.2f}"
            + f"{d['shares']['block_cv'][i]:>10.2f}"
            + f"{d['partial_shares'][i]:>11.2f}"
        )
    if d["recommendations"]:
        lines.append("Discard recommendations:")
        for r in d["recommendations"]:
            verdict = "discard" if r["discard"] else "keep"
            lines.append(
                f"  {{{','.join(r['block'])}}}: SV {r['block_sv']:.2f}, "
                f"partial {r['partial_share']:.2f} -> {verdict}"
            )
    else:
        lines.append("Discard recommendations: none")
    lines.append("Penalty trace:")
    for g in d["penalty_trace"]:
        pen = g["penalty"]
        pen_s = (
            "/".join(f"{v:g}" for v in pen) if isinstance(pen, list) else f"{pen:g}"
        )
        blocks = "-" if g["n_blocks"] is None else str(g["n_blocks"])
        ec_s = "-" if g["min_ec"] is None else f"{g['min_ec']:.2f}"
        status = "pass" if g["passed"] else "fail"
        note = f"  ({g['note']})" if g["note"] else ""
        lines.append(f"  c={pen_s}: blocks={blocks} min_ec={ec_s} {status}{note}")
    return "\n".join(lines) + "\n"


def cmd_analyze(args) -> int:
    try:
        data = load_csv(args.csv)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    grid = _parse_grid(args.grid) if args.grid else ()
    order = _parse_order(args.order, data.variable_names) if args.order else None
    cfg = SplaConfig(
        method=args.method,
        grid=grid,
        gate=EcGate(args.c_ec),
        block_order=order,
        standardize=args.standardize,
    )
    try:
        report = run_spla(data, cfg)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MatopsError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.format == "json":
        _emit(json.dumps(report.to_json_dict(), indent=2) + "\n", args.out)
    else:
        _emit(_report_table(report), args.out)
    return EXIT_OK


def _fixture(name: str):
    path = resources.files("spla") / "fixtures" / f"{name}.csv"
    with resources.as_file(path) as p:
        return load_csv(p)


def _check(lines: list[str], failed: list[bool], label: str,
           computed: float, expected: float, tol: float) -> None:
    ok = abs(computed - expected) <= tol
    failed.append(not ok)
    lines.append(
        f"  {label:<28} computed {computed:>9.4f}  expected {expected:>7.2f} "
        f"+/- {tol:<5g} {'PASS' if ok else 'FAIL'}"
    )


def _check_flag(lines: list[str], failed: list[bool], label: str, ok: bool) -> None:
    failed.append(not ok)
    lines.append(f"  {label:<28} {'PASS' if ok else 'FAIL'}")


def _reproduce_oecd(lines, failed) -> None:
    data = _fixture("oecd")
    idx = {n: i for i, n in enumerate(data.variable_names)}
    order = (
        (idx["I/Y"],), (idx["SCH"],), (idx["POP"],),
        (idx["RD"], idx["Y85"], idx["Y60"]),
    )
    cfg = SplaConfig(
        method="spca", grid=((0.05, 0.05, 0.05, 0.02, 0.02, 0.02),),
        standardize=True, block_order=order,
    )
    report = run_spla(data, cfg)
    lines.append("OECD fixture:")
    want = [("I/Y",), ("SCH",), ("POP",), ("Y60", "Y85", "RD")]
    _check_flag(
        lines, failed, "partition {I/Y}{SCH}{POP}{RD,Y85,Y60}",
        report.block_names() == want,
    )
    ecs = [e.ec for e in report.evaluations]
    for label, got, exp in [
        ("EC block 2", ecs[1], 0.96),
        ("EC block 3", ecs[2], 0.93),
        ("EC block 4", ecs[3], 0.84),
    ]:
        _check(lines, failed, label, got, exp, 0.01)
    for i, exp in enumerate([16.67, 16.04, 15.57, 40.26]):
        _check(lines, failed, f"block SV {i + 1}", report.shares.block_sv[i], exp, 0.05)
    _check(lines, failed, "final CV", report.shares.block_cv[-1], 88.54, 0.05)
    for i, exp in enumerate([10.23, 12.41, 12.94, 41.73]):
        _check(lines, failed, f"partial share {i + 1}", report.partial_shares[i], exp, 0.05)
    _check_flag(lines, failed, "no discards", not report.recommendations)


def _reproduce_exam(lines, failed) -> None:
    data = _fixture("exam")
    idx = {n: i for i, n in enumerate(data.variable_names)}
    order = ((idx["vec"],), (idx["mec"],), (idx["alg"], idx["ana"], idx["sta"]))
    cfg = SplaConfig(
        method="spca", grid=(2.0, (5.0, 5.0, 5.0, 2.0, 2.0)), block_order=order,
    )
    report = run_spla(data, cfg)
    lines.append("EXAM fixture:")
    want = [("vec",), ("mec",), ("alg", "ana", "sta")]
    _check_flag(
        lines, failed, "partition {vec}{mec}{alg,ana,sta}",
        report.block_names() == want,
    )
    ecs = [e.ec for e in report.evaluations]
    _check(lines, failed, "EC block 2", ecs[1], 0.74, 0.01)
    _check(lines, failed, "EC block 3", ecs[2], 0.72, 0.01)
    for i, exp in enumerate([13.21, 19.28, 38.98]):
        _check(lines, failed, f"block SV {i + 1}", report.shares.block_sv[i], exp, 0.05)
    _check(lines, failed, "final CV", report.shares.block_cv[-1], 71.47, 0.05)
    for i, exp in enumerate([7.45, 17.97, 46.49]):
        _check(lines, failed, f"partial share {i + 1}", report.partial_shares[i], exp, 0.05)
    discards = [r.variables for r in report.recommendations if r.discard]
    _check_flag(lines, failed, "{vec} discard verified", discards == [("vec",)])


_SYNTH_SEED = 20240817


def _reproduce_synthetic8(lines, failed) -> None:
    data = gen_spiked_sample(False, 5000, _SYNTH_SEED)
    cov = sample_cov(data)
    p = BlockPartition((
        Block(tuple(range(4)), tuple(range(4))),
        Block(tuple(range(4, 8)), tuple(range(4, 8))),
    ))
    _, min_ec, _ = evaluate_partition(cov, p)
    lines.append("Synthetic 8-variable fixture:")
    _check_flag(lines, failed, "two-block EC > 0.999", min_ec > 0.999)
    lines.append(f"    (min EC = {min_ec:.6f})")


def _reproduce_synthetic10(lines, failed) -> None:
    data = gen_spiked_sample(True, 5000, _SYNTH_SEED)
    cov = sample_cov(data)
    p2 = BlockPartition((
        Block(tuple(range(4)), tuple(range(4))),
        Block(tuple(range(4, 10)), tuple(range(4, 10))),
    ))
    _, ec2, _ = evaluate_partition(cov, p2)
    p3 = BlockPartition((
        Block(tuple(range(4)), tuple(range(4))),
        Block(tuple(range(4, 8)), tuple(range(4, 8))),
        Block((8, 9), (8, 9)),
    ))
    entries, _, _ = evaluate_partition(cov, p3)
    ec_last = entries[-1].ec
    lines.append("Synthetic 10-variable fixture:")
    _check_flag(
        lines, failed, "two-block EC in [0.985, 0.995]", 0.985 <= ec2 <= 0.995
    )
    lines.append(f"    (two-block min EC = {ec2:.6f})")
    _check_flag(lines, failed, "forced {9,10} EC < 0.01", ec_last < 0.01)
    lines.append(f"    (forced three-block EC = {ec_last:.6f})")


def cmd_reproduce(args) -> int:
    lines: list[str] = []
    failed: list[bool] = []
    runner = {
        "oecd": _reproduce_oecd,
        "exam": _reproduce_exam,
        "synthetic8": _reproduce_synthetic8,
        "synthetic10": _reproduce_synthetic10,
    }[args.fixture]
    try:
        runner(lines, failed)
    except MatopsError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    any_failed = any(failed)
    lines.append("RESULT: " + ("FAIL" if any_failed else "PASS"))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_GOLDEN if any_failed else EXIT_OK


def _rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_simulate(args) -> int:
    if args.experiment == "ec":
        design = BlockDesign(rho=args.rho)
        blocks = [int(b) - 1 for b in args.blocks.split(",")]
        ecs = ec_distribution(design, args.n, args.reps, blocks, args.seed)
        rows = [
            {"rep": r, "block": blocks[c] + 1, "ec": float(ecs[r, c])}
            for r in range(ecs.shape[0])
            for c in range(ecs.shape[1])
        ]
    elif args.experiment == "rate":
        design = BlockDesign()
        rows = identification_rate(
            design, [args.n], [args.rho], args.reps, EcGate(args.c_ec), args.seed,
        )
    else:  # wishart
        results = random_wishart_demo(args.reps, args.seed)
        rows = [{"rep": i, "blocks": k, "ec": ec} for i, (k, ec) in enumerate(results)]
    if args.format == "json":
        _emit(json.dumps(rows, indent=2) + "\n", args.out)
    else:
        _emit(_rows_to_csv(rows), args.out)
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="spla", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="analyze a CSV dataset")
    pa.add_argument("csv", help="path to a CSV file (header row of names)")
    pa.add_argument("--standardize", action="store_true")
    pa.add_argument("--c-ec", type=float, default=0.6, dest="c_ec")
    pa.add_argument("--method", choices=["pmd", "spca"], default="pmd")
    pa.add_argument(
        "--grid",
        help="lo:hi:steps, or comma list of penalties "
        "(slash-separated for per-loading vectors, e.g. 2,5/5/5/2/2)",
    )
    pa.add_argument(
        "--order",
        help="evaluation order: semicolon-separated blocks of "
        "comma-separated variable names, e.g. 'vec;mec;alg,ana,sta'",
    )
    pa.add_argument("--format", choices=["table", "json"], default="table")
    pa.add_argument("--out")

    pr = sub.add_parser("reproduce", help="check a fixture against expected values")
    pr.add_argument(
        "fixture", choices=["oecd", "exam", "synthetic8", "synthetic10"],
    )
    pr.add_argument("--out")

    ps = sub.add_parser("simulate", help="run a Monte-Carlo experiment")
    ps.add_argument("experiment", choices=["ec", "rate", "wishart"])
    ps.add_argument("--n", type=int, default=100)
    ps.add_argument("--rho", type=float, default=0.0)
    ps.add_argument("--reps", type=int, default=100)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--c-ec", type=float, default=0.6, dest="c_ec")
    ps.add_argument(
        "--blocks", default="2,4,6",
        help="1-based block indices to evaluate (ec experiment)",
    )
    ps.add_argument("--format", choices=["csv", "json"], default="csv")
    ps.add_argument("--out")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "reproduce":
            return cmd_reproduce(args)
        return cmd_simulate(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
