"""Command line entry point: ``leo analyze | compress | verify | gen-fixture``.

Exit codes: 0 success, 2 bad input (format, missing file, stale report,
infeasible fixture spec), 3 equivalence check failed, 4 budget exhausted
with ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from leocompress.errors import FixtureSpecError, FormatError, LeoError
from leocompress.fixtures import FixtureSpec, generate_fixture
from leocompress.leo import CompressionOptions, CompressionReport, compress
from leocompress.net import dumps_json, load_domain, load_network, save_network
from leocompress.stability import (
    StabilityConfig,
    StabilityReport,
    analyze,
    format_1dp,
    render_stability_table,
    stability_summary,
)
from leocompress.verify import verify_by_sampling

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_EQUIVALENT = 3
EXIT_BUDGET = 4


def render_compression_table(report: CompressionReport) -> str:
    head = f"{'Layer':>5}  {'Width':>5}  {'Inactive':>8}  {'Constant':>8}  {'Merged':>6}  {'Folded':>6}  {'Collapsed':>9}  {'Removed':>7}"
    lines = [head]
    for lc in report.layers:
        lines.append(
            f"{lc.layer:>5}  {lc.width:>5}  {lc.removed_inactive:>8}  {lc.removed_constant:>8}  {lc.merged:>6}"
            f"  {lc.folded_units:>6}  {lc.collapsed_units:>9}  {lc.units_removed:>7}"
        )
    lines.append(f"Units removed: {report.removed_units} of {report.total_units}")
    lines.append(f"Network compression (%): {format_1dp(report.compression_percent)}")
    widths = " ".join(str(w) for w in report.final_widths) or "(none)"
    lines.append(f"Final hidden widths: {widths}")
    if report.collapsed:
        lines.append(f"Collapsed to constant output: {report.upsilon}")
    return "\n".join(lines)


def _config(args) -> StabilityConfig:
    return StabilityConfig(
        eps_stab=args.eps_stab,
        node_limit=args.node_limit,
        time_limit=args.time_limit,
        jobs=args.jobs,
        dump_lp=args.dump_lp,
    )


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def cmd_analyze(args) -> int:
    net = load_network(args.net)
    domain = load_domain(args.domain)
    start = time.perf_counter()
    report = analyze(net, domain, _config(args))
    runtime = time.perf_counter() - start
    if args.report:
        _write(args.report, dumps_json(report.to_dict()))
    print(render_stability_table(stability_summary(report), runtime))
    if report.unknown_units:
        print(f"Unknown units (budget exhausted): {report.unknown_units}")
        if args.strict:
            return EXIT_BUDGET
    return EXIT_OK


def cmd_compress(args) -> int:
    net = load_network(args.net)
    domain = load_domain(args.domain)
    start = time.perf_counter()
    if args.stability:
        with open(args.stability) as fh:
            try:
                stab = StabilityReport.from_dict(json.load(fh))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"bad stability report {args.stability}: {exc}") from None
    else:
        stab = analyze(net, domain, _config(args))
    if stab.unknown_units and args.strict:
        print(f"Unknown units (budget exhausted): {stab.unknown_units}", file=sys.stderr)
        return EXIT_BUDGET
    out_net, report = compress(net, domain, stab, CompressionOptions(seed=args.seed))
    check = verify_by_sampling(net, out_net, domain, args.samples, args.seed)
    runtime = time.perf_counter() - start
    print(render_compression_table(report))
    print(f"Sampling check: max |f1 - f2| = {check.max_abs_diff:.3e} over {check.n_points} points")
    print(f"Runtime (s): {runtime:.3f}")
    if check.max_abs_diff > args.eq_tol:
        print(
            f"equivalence check failed: max diff {check.max_abs_diff:.6g} > {args.eq_tol:g} at x = {check.argmax_point.tolist()}",
            file=sys.stderr,
        )
        return EXIT_NOT_EQUIVALENT
    if args.report:
        payload = report.to_dict()
        payload["max_abs_diff"] = check.max_abs_diff
        _write(args.report, dumps_json(payload))
    if not args.dry_run:
        if not args.out:
            print("compress needs --out (or --dry-run)", file=sys.stderr)
            return EXIT_INPUT
        save_network(out_net, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    net1 = load_network(args.net1)
    net2 = load_network(args.net2)
    domain = load_domain(args.domain)
    check = verify_by_sampling(net1, net2, domain, args.samples, args.seed)
    payload = check.to_dict()
    payload["eq_tol"] = args.eq_tol
    payload["equivalent_on_samples"] = check.max_abs_diff <= args.eq_tol
    text = dumps_json(payload)
    if args.report:
        _write(args.report, text)
    print(text)
    return EXIT_OK if check.max_abs_diff <= args.eq_tol else EXIT_NOT_EQUIVALENT


def _counts(text: str) -> tuple[int, ...] | int:
    parts = [p for p in text.split(",") if p.strip()]
    try:
        vals = tuple(int(p) for p in parts)
    except ValueError:
        raise FixtureSpecError(f"expected comma-separated integers, got {text!r}") from None
    return vals[0] if len(vals) == 1 else vals


def cmd_gen_fixture(args) -> int:
    widths = _counts(args.widths)
    widths = (widths,) if isinstance(widths, int) else widths
    spec = FixtureSpec(
        widths=widths,
        input_dim=args.input_dim,
        inactive=_counts(args.inactive),
        active=_counts(args.active),
        dependent=_counts(args.dependent),
        output_dim=args.output_dim,
        seed=args.seed,
        exact=args.exact,
    )
    paths = generate_fixture(spec).write(args.out)
    for name, p in paths.items():
        print(f"{name}: {p}")
    return EXIT_OK


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--time-limit", type=float, default=10.0, help="seconds per unit solve (default 10)")
    p.add_argument("--node-limit", type=int, default=100_000, help="branch-and-bound nodes per unit solve")
    p.add_argument("--eps-stab", type=float, default=1e-9, help="stability margin (default 1e-9)")
    p.add_argument("--jobs", type=int, default=1, help="concurrent unit solves")
    p.add_argument("--dump-lp", default=None, help="write every MILP model to this directory in LP format")
    p.add_argument("--strict", action="store_true", help="exit 4 if any unit stays Unknown")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leo", description="Lossless compression of ReLU networks on a box domain.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="classify every hidden unit as stable or unstable")
    p.add_argument("net")
    p.add_argument("--domain", required=True)
    p.add_argument("--report", help="write the stability report JSON here")
    _solver_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compress", help="analyze, compress and check the result by sampling")
    p.add_argument("net")
    p.add_argument("--domain", required=True)
    p.add_argument("--out", help="path of the compressed network")
    p.add_argument("--report", help="write the compression report JSON here")
    p.add_argument("--stability", help="reuse a stability report from 'leo analyze --report'")
    p.add_argument("--eq-tol", type=float, default=1e-6)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dry-run", action="store_true", help="print the report without writing --out")
    _solver_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("verify", help="max output difference of two networks on sample points")
    p.add_argument("net1")
    p.add_argument("net2")
    p.add_argument("--domain", required=True)
    p.add_argument("--report", help="write the result JSON here")
    p.add_argument("--eq-tol", type=float, default=1e-6)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-fixture", help="random network with planted stable units")
    p.add_argument("--widths", required=True, help="hidden widths, e.g. 6,6")
    p.add_argument("--input-dim", type=int, default=2)
    p.add_argument("--output-dim", type=int, default=1)
    p.add_argument("--inactive", default="0", help="planted dead units per layer (one value or a list)")
    p.add_argument("--active", default="0", help="planted always-active units per layer")
    p.add_argument("--dependent", default="0", help="how many of the active units are linear combinations")
    p.add_argument("--exact", action="store_true", help="dyadic weights so arithmetic is exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_fixture)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (LeoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
