"""Command-line entry point: ``liezalcman run <config>``, ``list-families``, ``list-groups``."""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import ConfigError, DomainError, LieZalcmanError
from .scenario import FAMILIES, GROUP_DOCS, load_config, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_TASK = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liezalcman", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a scenario config")
    run.add_argument("config")
    run.add_argument("--output-dir", help="where report.json and grids/*.csv go")
    run.add_argument("--grid", type=int, help="override region.grid")
    run.add_argument("--tolerance", type=float, help="override tolerance.cauchy")
    run.add_argument("--seed", type=int, help="override seed (unsigned 64-bit)")
    sub.add_parser("list-families", help="show the built-in family registry")
    sub.add_parser("list-groups", help="show the built-in group instances")
    return parser


def _run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.grid is not None:
        overrides["region_grid"] = args.grid
    if args.tolerance is not None:
        overrides["cauchy_tolerance"] = args.tolerance
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        overrides["seed"] = args.seed
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    cfg = dataclasses.replace(cfg, **overrides).validate()
    bundle = run_scenario(cfg)
    status = "passed" if bundle.passed else "FAILED"
    where = f" -> {cfg.output_dir}/report.json" if cfg.output_dir else ""
    # keep stdout pure JSON when the report goes there
    print(f"{cfg.task}: {status} ({bundle.elapsed:.2f}s){where}",
          file=sys.stdout if cfg.output_dir else sys.stderr)
    if not cfg.output_dir:
        sys.stdout.write(bundle.to_json())
    return EXIT_OK if bundle.passed else EXIT_TASK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-families":
        for name in sorted(FAMILIES):
            e = FAMILIES[name]
            params = ", ".join(e["params"]) or "-"
            print(f"{name:20s} groups={','.join(e['groups'])}  params={params}  {e['doc']}")
        return EXIT_OK
    if args.command == "list-groups":
        for name, doc in GROUP_DOCS.items():
            print(f"{name:10s} {doc}")
        return EXIT_OK
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (LieZalcmanError, ArithmeticError) as exc:
        print(f"task error: {exc}", file=sys.stderr)
        return EXIT_TASK


if __name__ == "__main__":
    sys.exit(main())
