"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 no positive key rate,
4 numerical-domain error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, NoPositiveRateError, NumericalDomainError
from .experiments import (COMMANDS, EXIT_CONFIG, EXIT_NO_RATE, EXIT_NUMERIC, ENV_PREFIX,
                          load_config, run)

log = logging.getLogger("lloqss")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lloqss",
        description="LLO-CVQSS key-rate analysis and protocol simulation.",
        epilog=f"Config values can be overridden with {ENV_PREFIX}<SECTION>__<KEY> variables.")
    p.add_argument("--command", choices=COMMANDS, help="what to run (default: run.command)")
    p.add_argument("--config", help="INI or JSON configuration file")
    p.add_argument("--seed", type=int, help="random seed (u64)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--frames", type=int, help="frames to simulate")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None, environ=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {k: v for k, v in (("run.command", args.command), ("run.seed", args.seed),
                                   ("run.out", args.out), ("run.frames", args.frames))
                 if v is not None}
    try:
        ex = load_config(args.config, overrides, environ)
        result = run(ex.command, ex)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoPositiveRateError as exc:
        print(f"no positive key rate: {exc}", file=sys.stderr)
        return EXIT_NO_RATE
    except NumericalDomainError as exc:
        print(f"numerical domain error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(result.summary)
    for name, path in result.artifacts.items():
        log.info("wrote %s: %s", name, path)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
