"""Command-line entry point: ``riwalk <kind> [--config FILE] [--seed S] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigInvalid, RiwalkError
from .config import KINDS, config_from_dict, load_config
from .runner import run


def _param(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riwalk", description="Interlacement and biased-walk experiments.")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run a {kind} experiment")
        s.add_argument("--config", help="INI file with an [experiment] section")
        s.add_argument("--seed", help="master seed (mandatory, here or in the config)")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
        s.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        s.add_argument("-p", "--param", action="append", type=_param, default=[], metavar="KEY=VALUE",
                       help="set or override a parameter (repeatable)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = dict(args.param)
    overrides["kind"] = args.kind
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = load_config(args.config, overrides) if args.config else config_from_dict(overrides)
        res = run(cfg, args.out, args.format, args.threads)
    except ConfigInvalid as exc:
        for k, m in sorted(exc.problems.items()):
            print(f"config error: {k}: {m}", file=sys.stderr)
        return 2
    except RiwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"data": res["data"], "meta": res["meta"], "rows": res["rows"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
