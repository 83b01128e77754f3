"""Command-line front end.

Exit codes: 0 success, 2 invalid config or arguments, 3 numerical failure.
"""

import argparse
import json
import sys

from infosel import __version__, experiments
from infosel.errors import InvalidArgument, NumericalFailure

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _parser():
    p = argparse.ArgumentParser(prog="infosel", description="Informative spatial sampling experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("--config", required=True, help="path to the JSON config")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--out", help=f"output directory (default: config, ${experiments.OUTPUT_ENV}, "
                   f"or ./{experiments.DEFAULT_OUTPUT})")
    r.add_argument("--workers", type=int, help="override the number of worker threads")
    r.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    v = sub.add_parser("validate", help="list every problem in a config")
    v.add_argument("--config", required=True)

    ls = sub.add_parser("list-experiments", help="list experiments and their default parameters")
    ls.add_argument("--defaults", action="store_true", help="print default parameters as JSON")
    return p


def _load(path):
    try:
        return experiments.load_config(path)
    except OSError as exc:
        raise InvalidArgument(f"cannot read config: {exc}") from None


def _run(args):
    raw = _load(args.config)
    if isinstance(raw, dict):
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.workers is not None:
            raw["workers"] = args.workers
        if args.no_figures:
            raw["figures"] = False
    errors = experiments.validate(raw)
    if errors:
        for e in errors:
            print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_INVALID
    manifest = experiments.run(experiments.from_dict(raw), args.out)
    for f in manifest["files"] + manifest["figures"]:
        print(f["path"])
    return EXIT_OK


def _validate(args):
    errors = experiments.validate(_load(args.config))
    for e in errors:
        print(e)
    if errors:
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def _list(args):
    for name in experiments.list_experiments():
        if args.defaults:
            print(name, json.dumps(experiments.describe(name)))
        else:
            print(f"{name:20s} {experiments.DESCRIPTIONS[name]}")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    handler = {"run": _run, "validate": _validate, "list-experiments": _list}[args.command]
    try:
        return handler(args)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
