"""Command line entry point.

    nonlocal-interface run --config study.toml [--study h|delta|patch|single]
                           [--case ID] [--out DIR]

Flags override the matching config keys. Exit status is 0 on success, 1 when
the sweep stopped on an error (partial tables are still written) and 2 for an
invalid configuration.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from . import __version__
from .study import ConfigError, StudyConfig, run_study

log = logging.getLogger("nonlocal_interface")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonlocal-interface",
                                     description="Nonlocal interface problem studies")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a study described by a TOML config")
    run.add_argument("--config", required=True, help="study config file (TOML)")
    run.add_argument("--study", choices=("h", "delta", "patch", "single"),
                     help="study kind (overrides 'study')")
    run.add_argument("--case", help="case id (overrides 'case')")
    run.add_argument("--out", help="output directory (overrides 'out')")
    run.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    return parser


def _format_row(row) -> str:
    def f(v):
        return "-" if v is None else f"{v:.4g}" if isinstance(v, float) else str(v)
    vals = row.values()
    return "  ".join(f(v) for v in vals)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    try:
        config = StudyConfig.from_toml(args.config)
        overrides = {k: getattr(args, k) for k in ("study", "case", "out")
                     if getattr(args, k) is not None}
        if overrides:
            config = config.replace(**overrides)
    except (OSError, ConfigError) as err:
        log.error("config error: %s", err)
        return 2
    log.info("%s study, case %s -> %s", config.study, config.case, config.out)
    result = run_study(config)
    log.info("param  dofs  L2_1  L2_2  H1_1  H1_2  slopes...  seconds")
    for row in result.rows:
        log.info(_format_row(row))
    for name, path in sorted(result.files.items()):
        log.info("wrote %s: %s", name, path)
    if not result.ok:
        log.error("study failed: %s", result.error)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
