"""Command-line entry point: ``explainrul --config run.ini --stage all``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .errors import ConfigError, DependencyError, DivergenceError, ExplainRulError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3
EXIT_DIVERGENCE = 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="explainrul",
        description="Autoencoder health features and RUL estimation for rolling bearings.",
    )
    ap.add_argument("--config", help="INI configuration file (built-in defaults otherwise)")
    ap.add_argument("--out", help="output directory (overrides [pipeline] out)")
    ap.add_argument("--seed", type=int, help="global seed (overrides [pipeline] seed)")
    ap.add_argument("--stage", default="all", choices=("all", *pipeline.STAGES),
                    help="stage to run; 'all' runs the whole chain in order")
    ap.add_argument("--ae-pool", choices=("train", "train+test"),
                    help="runs whose records train the autoencoder")
    ap.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose + 1, 2),
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = pipeline.PipelineConfig.load(args.config, out=args.out, seed=args.seed, ae_pool=args.ae_pool)
        if args.print_config:
            sys.stdout.write(cfg.canonical())
            return EXIT_OK
        if args.stage == "all":
            pipeline.run_all(cfg)
        else:
            pipeline.run_stage(args.stage, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ExplainRulError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
