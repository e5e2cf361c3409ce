"""Command-line entry point.

Exit codes: 0 success, 2 configuration or regime error, 3 decode failure,
4 privacy audit or confusability probe failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, FieldTooSmallError, InstanceTooLarge, RegimeError
from .harness import (
    fmt_fraction,
    format_report,
    run,
    sweep_capacity,
    sweep_gamma,
    sweep_to_csv,
    validate_and_load,
)

EXIT_OK, EXIT_CONFIG, EXIT_DECODE, EXIT_AUDIT = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bpir",
        description="Simulate private retrieval from replicated databases with Byzantine and colluding servers.",
    )
    ap.add_argument("--config", help="flat JSON config file; flags override its values")
    ap.add_argument("--n", type=int, help="number of databases")
    ap.add_argument("--m", type=int, help="number of messages")
    ap.add_argument("--t", type=int, help="collusion size")
    ap.add_argument("--b", type=int, help="Byzantine databases")
    ap.add_argument("--u", type=int, help="unresponsive databases (default 0)")
    ap.add_argument("--q", type=int, help="prime field size (default 65537)")
    ap.add_argument("--seed", type=int, help="master seed (default 0)")
    ap.add_argument("--desired", help="desired message index, or 'all'")
    ap.add_argument("--adversary", help="none | content | random:<rate> | worst (default worst)")
    ap.add_argument("--byzantine-set", help="comma-separated Byzantine databases (default: random per trial)")
    ap.add_argument("--unresponsive-set", help="comma-separated silent databases (default: random per trial)")
    ap.add_argument("--trials", type=int, help="trials per desired index (default 1)")
    ap.add_argument("--emit", choices=("table", "json", "csv"), help="output format (default table)")
    ap.add_argument("--dump-queries", action="store_true", default=None, help="print the query table")
    ap.add_argument("--audit-privacy", action="store_true", default=None,
                    help="rank-audit every T-subset of databases")
    ap.add_argument("--probe-confusability", action="store_true", default=None,
                    help="sample message-set pairs and look for answer collisions")
    ap.add_argument("--probe-pairs", type=int, help="pairs for the confusability probe (default 1000)")
    ap.add_argument("--trivial", action="store_true", default=None,
                    help="use the download-everything scheme (required when 2B+T+U >= N)")
    ap.add_argument("--timing", action="store_true", default=None,
                    help="include wall-clock time (output is then no longer byte-stable)")
    ap.add_argument("--sweep-capacity", nargs="?", const="0,1,2:5-20", metavar="BS:NLO-NHI",
                    help="capacity table over B and N for --t/--m (default 0,1,2:5-20, T=2, M=3)")
    ap.add_argument("--sweep-gamma", nargs="?", const="1000", metavar="N",
                    help="capacity at B=floor(gamma N) for gamma=0,0.05,...,0.45")
    return ap


def _parse_sweep(spec: str):
    try:
        bs, _, ns = spec.partition(":")
        Bs = [int(b) for b in bs.split(",") if b]
        lo, _, hi = ns.partition("-")
        Ns = list(range(int(lo), int(hi or lo) + 1))
    except ValueError:
        raise ConfigError(f"--sweep-capacity {spec}: expected e.g. 0,1,2:5-20") from None
    return Bs, Ns


def _emit_sweep(rows, emit: str) -> str:
    if emit == "json":
        return json.dumps([{k: (f"{v.numerator}/{v.denominator}" if hasattr(v, "denominator") and not isinstance(v, int)
                                else v) for k, v in r.items()} for r in rows], indent=2) + "\n"
    if emit == "csv":
        return sweep_to_csv(rows)
    lines = []
    for r in rows:
        cells = [f"{k}={fmt_fraction(v) if hasattr(v, 'denominator') and not isinstance(v, int) else v}"
                 for k, v in r.items()]
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = sys.stdout
    try:
        if args.sweep_capacity is not None or args.sweep_gamma is not None:
            emit = args.emit or "csv"
            if args.sweep_capacity is not None:
                Bs, Ns = _parse_sweep(args.sweep_capacity)
                rows = sweep_capacity(args.t or 2, args.m or 3, Bs, Ns)
            else:
                N = int(args.sweep_gamma)
                gammas = [k / 20 for k in range(10)]
                rows = sweep_gamma(gammas, N=N, M=args.m or 3, T=args.t or 2)
            out.write(_emit_sweep(rows, emit))
            return EXIT_OK
        overrides = {
            "N": args.n, "M": args.m, "T": args.t, "B": args.b, "U": args.u, "q": args.q,
            "seed": args.seed, "desired": args.desired, "adversary": args.adversary,
            "byzantine_set": args.byzantine_set, "unresponsive_set": args.unresponsive_set,
            "trials": args.trials, "emit": args.emit, "dump_queries": args.dump_queries,
            "audit_privacy": args.audit_privacy, "probe_confusability": args.probe_confusability,
            "probe_pairs": args.probe_pairs, "trivial": args.trivial, "timing": args.timing,
        }
        cfg = validate_and_load(args.config, overrides)
        report = run(cfg)
    except (ConfigError, RegimeError, FieldTooSmallError, InstanceTooLarge) as exc:
        print(f"bpir: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out.write(format_report(report))
    if not report.decode_ok:
        print(f"bpir: decode failure in {report.trials - report.successes} of {report.trials} trials",
              file=sys.stderr)
        return EXIT_DECODE
    if not report.audit_ok:
        print("bpir: privacy audit or confusability probe failed", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
