"""Command line entry point: paley-sos <verify|sweep|fit|plot|bounds>."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from .field import is_prime, primes_1mod4

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _primes(args) -> list[int]:
    if args.primes:
        try:
            ps = sorted({int(v) for v in args.primes.split(",") if v.strip()})
        except ValueError:
            raise SystemExit(_usage(f"--primes expects integers, got {args.primes!r}"))
        bad = [p for p in ps if not (is_prime(p) and p % 4 == 1)]
        if bad:
            raise SystemExit(_usage(f"not primes 1 mod 4: {bad}"))
        return ps
    return primes_1mod4(args.p_min, args.p_max)


def _usage(msg: str) -> int:
    print(f"paley-sos: error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _add_range(sp, p_min=5, p_max=29):
    sp.add_argument("--p-min", type=int, default=p_min)
    sp.add_argument("--p-max", type=int, default=p_max)
    sp.add_argument("--primes", help="comma list of primes; overrides the range")


def cmd_verify(args) -> int:
    from .verify import run_verify

    primes = _primes(args)
    if not primes:
        warnings.warn(f"no primes 1 mod 4 in [{args.p_min}, {args.p_max}]; nothing to verify")
        print(f"WARNING empty prime range [{args.p_min}, {args.p_max}]")
        return EXIT_OK
    checks = run_verify(args.suite, primes)
    hard = [c for c in checks if c.passed is not None]
    failed = [c for c in hard if not c.passed]
    print(f"{len(hard) - len(failed)}/{len(hard)} hard checks passed, "
          f"{len(checks) - len(hard)} measurements logged")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_sweep(args) -> int:
    from .sweep import parse_quantity, run_sweep, write_csv, write_trace

    try:
        parse_quantity(args.quantity)
    except ValueError as err:
        return _usage(str(err))
    out = Path(args.out)
    if not out.parent.exists() or (out.exists() and out.is_dir()):
        return _usage(f"cannot write {out}")
    primes = _primes(args)
    if not primes:
        print(f"WARNING empty prime range [{args.p_min}, {args.p_max}]", file=sys.stderr)
    records, traces = run_sweep(args.quantity, primes, jobs=args.jobs,
                                timeout=args.timeout_seconds, tol=args.tol)
    try:
        write_csv(records, out)
        if args.trace:
            write_trace(traces, args.trace)
    except OSError as err:
        return _usage(f"cannot write output: {err}")
    for r in records:
        print(f"p={r.p} {r.quantity}={r.value:.6g} status={r.status} ({r.runtime_seconds:.2f}s)")
    if args.plot:
        from .plotting import emit_plot

        ok = [r for r in records if r.status == "ok"]
        if ok:
            svg = emit_plot([out], out.with_suffix(".svg"), title=args.quantity)
            print(f"wrote {svg}")
    return EXIT_OK


def cmd_fit(args) -> int:
    from .fitting import fit_records
    from .sweep import read_csv

    records = []
    try:
        for path in args.csv:
            records += read_csv(path)
    except (OSError, ValueError) as err:
        return _usage(str(err))
    quantities = sorted({r.quantity for r in records})
    if args.quantity:
        quantities = [q for q in quantities if q == args.quantity]
    status = EXIT_OK
    print("quantity,a,b,r_squared,n_points")
    for q in quantities:
        sel = [r for r in records if r.quantity == q and args.p_min <= r.p <= args.p_max]
        try:
            fit = fit_records(sel)
        except ValueError as err:
            print(f"{q}: {err}", file=sys.stderr)
            status = EXIT_USAGE
            continue
        print(f"{q},{fit.a:.6g},{fit.b:.6f},{fit.r_squared:.6f},{fit.n_points}")
    if not quantities:
        return _usage("no matching rows")
    return status


def cmd_plot(args) -> int:
    from .plotting import emit_plot

    try:
        out = emit_plot(args.csv, args.out, title=args.title)
    except (OSError, ValueError) as err:
        return _usage(str(err))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    from .paley import build_paley, classical_bounds, clique_number
    from .pseudomoments import fk4_value
    from .invariant import build_sos4_invariant, solve_invariant
    from .sdp import build_sos2, solve

    ps = args.p
    bad = [p for p in ps if not (is_prime(p) and p % 4 == 1)]
    if bad:
        return _usage(f"not primes 1 mod 4: {bad}")
    print("p,omega,sqrt_p,hansen_podolskii,sos2,fk4,sos4")
    for p in ps:
        g = build_paley(p)
        b = classical_bounds(p)
        omega = clique_number(g) if p <= args.omega_max else None
        sos2 = solve(build_sos2(g), tol=1e-5).value if p <= args.sdp_max else None
        fk4 = fk4_value(g).lo if p <= args.sdp_max else None
        sos4 = solve_invariant(build_sos4_invariant(g)).value if args.sos4 else None
        cells = [p, omega, b["hoffman"], b["hansen_podolskii"], sos2, fk4, sos4]
        print(",".join("" if c is None else (str(c) if isinstance(c, int) else f"{c:.6f}") for c in cells))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paley-sos", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify", help="run invariant suites")
    sp.add_argument("--suite", default="all",
                    choices=["field", "charsums", "graph", "graphmx", "blockcirc", "fk", "sdp", "all"])
    _add_range(sp, 13, 17)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="evaluate a quantity over primes and write CSV")
    sp.add_argument("--quantity", required=True,
                    help="omega|sos2|sos4|fk4|t441norm|diamondnorm|charsum1norm|norm:<shape>|"
                         "restricted:<shape>:<i>:<j> (i, j in 0,1,2 or * for none)")
    _add_range(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--timeout-seconds", type=float, default=600.0)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--trace", help="CSV path for SDP solver traces")
    sp.add_argument("--plot", action="store_true", help="also write an SVG next to the CSV")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fit", help="fit a * p^b to sweep CSVs")
    sp.add_argument("csv", nargs="+")
    sp.add_argument("--quantity")
    sp.add_argument("--p-min", type=int, default=0)
    sp.add_argument("--p-max", type=int, default=10**9)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("plot", help="render sweep CSVs as a log-log SVG")
    sp.add_argument("csv", nargs="+")
    sp.add_argument("--out", required=True)
    sp.add_argument("--title")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("bounds", help="table of clique bounds")
    sp.add_argument("--p", type=int, nargs="+", required=True)
    sp.add_argument("--sos4", action="store_true", help="also solve SOS4 (minutes per prime beyond 61)")
    sp.add_argument("--omega-max", type=int, default=1000)
    sp.add_argument("--sdp-max", type=int, default=149)
    sp.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        return _usage("--jobs must be positive")
    if getattr(args, "timeout_seconds", None) is not None and args.timeout_seconds <= 0:
        return _usage("--timeout-seconds must be positive")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
