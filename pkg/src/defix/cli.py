"""Command-line entry point: ``defix <command> --config run.ini``.

Exit status: 0 when every table was estimated, 1 when at least one table (or
some of its rows) failed, 2 on configuration or input errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, DefixError, IngestError
from .pipeline import COMMANDS, Pipeline, any_failed, run_all, write_artifacts

EXIT_OK, EXIT_TABLE_FAILED, EXIT_BAD_INPUT = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="defix", description="DeFi index construction and return-predictability suite.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", help="output directory (overrides config and OUTPUT_DIR)")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    with_config("build-index", "construct the index and write index.csv / epochs.json")
    with_config("summary", "summary statistics table")
    with_config("correlations", "correlation matrices")
    p = with_config("lagged-regressions", "lagged benchmark-return regressions")
    p.add_argument("--predictor", choices=("btc", "eth", "crix"), default="btc")
    with_config("network-suite", "network-factor regressions and panels")
    with_config("attention", "search-attention regressions")
    p = with_config("valuation", "TVL-to-market ratio panels and log-log fit")
    p.add_argument("--frequency", choices=("weekly", "monthly"), default="weekly")
    with_config("cumulative", "cumulative daily return series")
    with_config("features", "export derived features as a long CSV")
    with_config("run-all", "every command above")

    fx = sub.add_parser("fixture", help="write the bundled synthetic input set")
    fx.add_argument("dest", help="directory to write CSVs and defix.ini into")
    fx.add_argument("--seed", type=int, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "fixture":
        from .fixture import DEFAULT_SEED, write_fixture

        paths = write_fixture(Path(args.dest), seed=DEFAULT_SEED if args.seed is None else args.seed)
        for path in paths:
            print(path)
        return EXIT_OK

    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out).resolve() if args.out else cfg.output_dir
        pl = Pipeline(cfg)
        if args.command == "run-all":
            artifacts = run_all(pl)
            label = "run-all"
        else:
            kwargs = {k: getattr(args, k) for k in ("predictor", "frequency") if hasattr(args, k)}
            artifacts = COMMANDS[args.command](pl, **kwargs)
            label = " ".join([args.command, *(f"--{k}={v}" for k, v in sorted(kwargs.items()))])
        write_artifacts(pl, artifacts, out_dir, label)
    except (ConfigError, IngestError) as exc:
        print(f"defix: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except DefixError as exc:
        # index construction or data-coverage problems that stop the whole command
        print(f"defix: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    for art in artifacts:
        for err in getattr(art, "errors", ()):
            print(f"defix: {err}", file=sys.stderr)
    return EXIT_TABLE_FAILED if any_failed(artifacts) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
