"""Command-line entry point ``vll``.

Exit codes: 0 success, 1 certificate failure, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings

from . import gallery, lab
from .diagnostics import TABLE_COLUMNS

EXIT_OK, EXIT_CERT, EXIT_CONFIG = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vll", description="Viscous-limit laboratory for 2D Navier-Stokes.")
    sub = p.add_subparsers(dest="command", required=True)

    for name, help_ in (("run", "evolve each viscosity and tabulate diagnostics"),
                        ("sweep", "run a viscosity sweep with trend, drift and rate analysis")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="INI configuration file")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--workers", type=int, default=None, help="worker processes (capped by VLL_THREADS)")

    sp = sub.add_parser("diagnose", help="diagnostics of snapshot files")
    sp.add_argument("snapshots", nargs="+")
    sp.add_argument("--ell", type=float, required=True)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--out", help="write the table CSV here instead of stdout")

    sp = sub.add_parser("gallery", help="list or emit gallery items")
    gsub = sp.add_subparsers(dest="action", required=True)
    gsub.add_parser("list", help="list items and their parameters")
    ge = gsub.add_parser("emit", help="write <name>.vll and <name>.facts.json")
    ge.add_argument("name")
    ge.add_argument("params", nargs="*", help="key=value parameters")
    ge.add_argument("--out", default=".", help="output directory")

    sp = sub.add_parser("report", help="render the pass/fail matrix of an output directory")
    sp.add_argument("path")
    return p


def _cmd_run(args, mode: str) -> int:
    try:
        cfg = lab.load_config(args.config)
    except lab.ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    fn = lab.sweep if mode == "sweep" else lab.run
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        report = fn(cfg, outdir=args.out, workers=args.workers)
    try:
        text, code = lab.render_report(report.outdir)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(text)
    print(f"outputs written to {report.outdir}")
    return code


def _cmd_diagnose(args) -> int:
    try:
        table, certs = lab.diagnose(args.snapshots, args.ell, args.delta)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        table.to_csv(args.out)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        row = table.rows[0]
        w.writerow(list(TABLE_COLUMNS) + [c.name for c in certs])
        w.writerow([repr(float(row[c])) for c in TABLE_COLUMNS] + [c.cell() for c in certs])
    failed = any(not c.passed for c in certs if c.name in lab.CONSTANT_FREE)
    return EXIT_CERT if failed else EXIT_OK


def _cmd_gallery(args) -> int:
    if args.action == "list":
        for name in gallery.list_items():
            _, schema = gallery.REGISTRY[name]
            params = " ".join(f"{k}=<{t.__name__}>" for k, t in schema.items())
            print(f"{name} {params}")
        return EXIT_OK
    try:
        params = dict(p.split("=", 1) for p in args.params)
    except ValueError:
        print("error: parameters must be key=value", file=sys.stderr)
        return EXIT_CONFIG
    try:
        snap, facts = gallery.emit(args.name, params, args.out)
    except (KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(snap)
    print(facts)
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        text, code = lab.render_report(args.path)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(text)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command in ("run", "sweep"):
        return _cmd_run(args, args.command)
    if args.command == "diagnose":
        return _cmd_diagnose(args)
    if args.command == "gallery":
        return _cmd_gallery(args)
    return _cmd_report(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
