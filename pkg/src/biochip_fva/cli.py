"""Command-line interface: ``biochip-fva <command> ...``."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import bench, io
from .assignment import InvalidApplication, assign_volumes
from .lof import lof_edges
from .mixing import InvalidRatio, SearchMode, approximate_ratio, parse_ratio, synthesize
from .model import DEFAULT_EPSILON, FvaError, NotSatisfiable
from .pipeline import PipelineResult, optimize


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _q(v: Fraction) -> str:
    """Exact value plus a two-decimal rendering."""
    v = Fraction(v)
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v} ({float(v):.2f})"


def _comp(c: dict) -> str:
    return ", ".join(f"{k}: {_q(v)}" for k, v in sorted(c.items()) if v)


def _epsilon(text: str) -> Fraction:
    try:
        e = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}")
    if e < 0:
        raise argparse.ArgumentTypeError("epsilon must be non-negative")
    return e


def _globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--epsilon", type=_epsilon, default=d(DEFAULT_EPSILON), help="ratio tolerance as p/q (default 1/100)")
    p.add_argument("--precision", type=int, default=d(None), help="maximum 1:1 mixing depth")
    p.add_argument("--mode", choices=[m.value for m in SearchMode], default=d(SearchMode.PRUNED4.value))
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--out", type=Path, default=d(None), help="directory for output files")
    p.add_argument("--format", choices=["text", "json", "dot", "tsv"], default=d("text"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="biochip-fva", description="Fluid volume assignment for flow-based biochips.")
    _globals(parser, suppress=False)
    common = _Parser(add_help=False)
    _globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("approx", parents=[common], help="approximate a ratio by a dyadic one")
    p.add_argument("--ratio", required=True, help="a:b")

    p = sub.add_parser("tree", parents=[common], help="mixing tree for one ratio")
    p.add_argument("--ratio", required=True)
    p.add_argument("--units", type=int, default=1, help="units of product to deliver")

    for name, text in (("assign", "assign volumes without leftover reuse"), ("optimize", "assign volumes and reuse leftovers"), ("export-dot", "write a graph as DOT")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--app", required=True, type=Path, help="application JSON (or a combined document)")
        p.add_argument("--arch", type=Path, help="architecture JSON, if not embedded in --app")
        if name == "optimize":
            p.add_argument("--no-lof", action="store_true", help="skip leftover reuse")
            p.add_argument("--exhaustive", action="store_true", help="try every tree variant combination")

    p = sub.add_parser("bench", parents=[common], help="run a built-in assay")
    p.add_argument("--case", required=True, choices=sorted(bench.CASES))
    p.add_argument("--mixer", default="m1", choices=["m1", "m2", "arbitrary"])

    p = sub.add_parser("compare", parents=[common], help="compare tree search modes on random targets")
    p.add_argument("--count", type=int, default=10)
    return parser


# ------------------------------------------------------------- commands

def cmd_approx(args) -> str:
    share = parse_ratio(args.ratio)
    r = approximate_ratio(share, args.precision or 4)
    err = r.error
    return f"{r} (error {err if err == 0 else _q(err)}, depth {r.depth})"


def cmd_tree(args) -> str:
    share = parse_ratio(args.ratio)
    trees = synthesize(share, args.units, args.mode, args.precision or 4)
    t = trees[0]
    if args.format == "dot":
        return io.tree_to_dot(t)
    lines = [f"target {t.target} units {t.units_out}: cost {t.fluid_cost} (A {t.leaves['A']}, B {t.leaves['B']}), {t.op_count} mixes, {len(trees)} optimal variant(s)"]
    for s in t.steps:
        lines.append(f"  {s.count} x {s.vertex} <- {s.left} + {s.right}")
    for w in t.waste_ledger:
        lines.append(f"  waste {w.units} x {w.concentration}")
    return "\n".join(lines)


def _report_lines(res: PipelineResult, unit: str) -> list[str]:
    r = res.report
    lines = ["reagent\tconsumed\tbaseline\tsaved\twaste"]
    for k in sorted(set(r.consumption) | set(res.baseline.consumption)):
        lines.append(
            f"{k}\t{_q(r.consumption.get(k, 0))}\t{_q(res.baseline.consumption.get(k, 0))}\t{_q(res.savings.get(k, 0))}\t{_q(r.waste.get(k, 0))}"
        )
    lines.append(f"mix operations\t{r.op_count}\t{res.baseline.op_count}")
    for lo in (res.baseline.leftovers if not res.reassignments else r.leftovers):
        lines.append(f"leftover {lo.source}\t{_q(lo.volume)} {unit}\t{_comp(lo.composition)}")
    for ra in res.reassignments:
        lines.append(f"reuse {ra.source} -> {ra.target}\t{_q(ra.volume)} {unit}\t{_comp(ra.composition)}\tdeviation {_q(ra.deviation)}")
    return lines


def _document(res: PipelineResult) -> str:
    edges = [
        {"from": e["from"], "to": e["to"], "volume": io.format_volume(e["volume"]),
         "composition": {k: io.format_volume(v) for k, v in e["composition"].items()}}
        for e in lof_edges(res.app)
    ]
    report = {
        "consumption": {k: io.format_volume(v) for k, v in sorted(res.report.consumption.items())},
        "baseline": {k: io.format_volume(v) for k, v in sorted(res.baseline.consumption.items())},
        "waste": {k: io.format_volume(v) for k, v in sorted(res.report.waste.items())},
        "mix_operations": res.report.op_count,
    }
    savings = {k: io.format_volume(v) for k, v in sorted(res.savings.items())}
    return io.dumps(res.app, res.arch, lof_edges=edges, savings=savings, report=report)


def cmd_optimize(args) -> str:
    app, arch = io.load(args.app, args.arch)
    res = optimize(app, arch, args.mode, args.precision or 4, args.epsilon, lof=not args.no_lof, exhaustive=args.exhaustive)
    text = "\n".join(_report_lines(res, arch.unit))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "optimized.json").write_text(_document(res) + "\n")
        (args.out / "optimized.dot").write_text(io.application_to_dot(res.app, f" {arch.unit}"))
        (args.out / "report.tsv").write_text(text + "\n")
    if args.format == "json":
        return _document(res)
    if args.format == "dot":
        return io.application_to_dot(res.app, f" {arch.unit}")
    return text


def cmd_assign(args) -> str:
    app, arch = io.load(args.app, args.arch)
    out = assign_volumes(app, arch)
    if args.format == "dot":
        return io.application_to_dot(out, f" {arch.unit}")
    text = io.dumps(out, arch)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "assigned.json").write_text(text + "\n")
    return text


def cmd_export_dot(args) -> str:
    app, arch = io.load(args.app, args.arch)
    text = io.application_to_dot(app, f" {arch.unit}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"{args.app.stem}.dot").write_text(text)
    return text


def cmd_bench(args) -> str:
    case = bench.CASES[args.case]
    row = bench.run_case(case, args.mixer, args.mode)
    lines = [f"{case.name} {args.mixer} ({case.unit})\tR-side\tB-side\treference"]
    names = case.reagents

    def line(label: str, vals: dict, ref_key: str | None) -> str:
        ref = row.references.get(ref_key) if ref_key else None
        rtxt = f"{', '.join(f'{k} {_q(v)}' for k, v in ref.values.items())} {ref.tag}" if ref else "-"
        return f"{label}\t{_q(vals[names[0]])} {names[0]}\t{_q(vals[names[1]])} {names[1]}\t{rtxt}"

    lines.append(line("minimal", row.minimal, "minimal") + "  [DERIVED: sum of share x volume over approximated ratios]")
    lines.append(line("unoptimized", row.unoptimized, f"{args.mixer}/unoptimized"))
    lines.append(line("optimized", row.optimized, args.mixer))
    lines.append(f"mix operations\t{row.op_count}")
    return "\n".join(lines)


def cmd_compare(args) -> str:
    rows = bench.compare(args.seed, args.count, args.precision or 4)
    sep = "\t"
    lines = [sep.join(["target", "cost minmix", "cost exact", "cost pruned4", "ops minmix", "ops exact", "ops pruned4"])]
    for r in rows:
        lines.append(sep.join([str(r.target), *(str(r.cost[m.value]) for m in bench.MODES), *(str(r.ops[m.value]) for m in bench.MODES)]))
    summary = bench.compare_summary(rows)
    if summary:
        for m, s in summary.items():
            lines.append(f"mean {m}\tcost {s['cost']:.2f}\tops {s['ops']:.2f}\ttime {s['seconds'] * 1000:.2f} ms")
    return "\n".join(lines)


COMMANDS = {
    "approx": cmd_approx,
    "tree": cmd_tree,
    "assign": cmd_assign,
    "optimize": cmd_optimize,
    "bench": cmd_bench,
    "compare": cmd_compare,
    "export-dot": cmd_export_dot,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = COMMANDS[args.command](args)
    except NotSatisfiable as exc:
        print(f"not satisfiable: {exc}", file=sys.stderr)
        return 2
    except InvalidApplication as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return 1
    except (FvaError, InvalidRatio, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if out:
        print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
