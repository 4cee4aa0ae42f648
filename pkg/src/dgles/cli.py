"""Command line entry point: ``dgles run|postprocess|verify|compare``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
``DGLES_OUTPUT_DIR`` overrides the output directory of any subcommand.
"""

import argparse
import os
import sys

from .errors import CheckpointError, ConfigError, NumericalBlowupError, PositivityError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_run(args):
    from .config import read_config
    from .driver import run

    cfg = read_config(args.config, _overrides(args.set))
    run(cfg, outdir=args.output, restart=args.restart)
    return EXIT_OK


def cmd_postprocess(args):
    from .driver import postprocess

    _, rec = postprocess(args.checkpoint, outdir=args.output)
    if rec is None:
        print("checkpoint holds no statistics samples", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_checks

    return EXIT_OK if run_checks() else EXIT_NUMERICAL


def cmd_compare(args):
    from .reference import compare
    from .statistics import parse_record

    with open(args.record) as fh:
        record = parse_record(fh.read())
    ok, rows = compare(record, args.case, tolerance=args.tolerance)
    for key, val, ref, rel, good in rows:
        print(f"{'PASS' if good else 'FAIL'}  {key}: {val:.6g} vs {ref:.6g} ({100 * rel:.1f}%)")
    return EXIT_OK if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="dgles", description="DG large eddy simulation of compressible channel flow")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a configured simulation")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides output.dir)")
    r.add_argument("--restart", help="continue from a checkpoint")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    r.set_defaults(func=cmd_run)

    pp = sub.add_parser("postprocess", help="profiles and mean-flow record from a checkpoint")
    pp.add_argument("checkpoint")
    pp.add_argument("-o", "--output")
    pp.set_defaults(func=cmd_postprocess)

    v = sub.add_parser("verify", help="run the built-in self checks")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("compare", help="compare a table2.txt record with the published rows")
    c.add_argument("record")
    c.add_argument("--case", required=True, help="reference row, e.g. anis-ma15")
    c.add_argument("--tolerance", type=float, default=0.10)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "output", None) is None and os.environ.get("DGLES_OUTPUT_DIR"):
        args.output = os.environ["DGLES_OUTPUT_DIR"]
    try:
        return args.func(args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for prob in exc.problems:
            print(f"  - {prob}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PositivityError, NumericalBlowupError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
