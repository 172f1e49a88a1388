from __future__ import annotations

import argparse
import json

from dotenv import load_dotenv

from decoupler.catalog import CatalogError, builtin_catalog
from decoupler.config import MODES, ConfigError, load_config
from decoupler.reports import jsonable
from decoupler.runner import run
from decoupler.tensor import OperatorError, TruncationError

load_dotenv()

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _positive_int(value: str) -> int:
    parsed = int(value)
    if parsed < 2:
        raise argparse.ArgumentTypeError("samples must be at least 2")
    return parsed


def _seed(value: str) -> int:
    parsed = int(value)
    if parsed < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return parsed


def _print(payload: dict) -> None:
    print(json.dumps(jsonable(payload), indent=2, sort_keys=True))


def experiment(args: argparse.Namespace) -> int:
    config = load_config(args.config, mode=args.command).with_overrides(
        seed=args.seed, samples=args.samples, out_dir=args.out
    )
    result = run(config)
    _print(result.summary())
    return EXIT_OK


def catalog(args: argparse.Namespace) -> int:
    _print(builtin_catalog())
    return EXIT_OK


def parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(
        description=(
            "Run decoupling and QMAC rate-region experiments from JSON configs "
            "and write machine-readable reports."
        )
    )
    subparsers = root.add_subparsers(dest="command", required=True)

    for mode in MODES:
        mode_parser = subparsers.add_parser(mode, help=f"Run a {mode} experiment.")
        mode_parser.add_argument("--config", required=True, help="Experiment config JSON.")
        mode_parser.add_argument("--seed", type=_seed, default=None)
        mode_parser.add_argument("--samples", type=_positive_int, default=None)
        mode_parser.add_argument(
            "--out",
            default=None,
            help="Report directory. Defaults to DECOUPLER_OUT_DIR or .decoupler/out.",
        )
        mode_parser.set_defaults(handler=experiment)

    catalog_parser = subparsers.add_parser(
        "catalog",
        help="List the builtin channels and states with their default dims.",
    )
    catalog_parser.set_defaults(handler=catalog)
    return root


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, OperatorError, CatalogError)):
        return EXIT_INVALID
    if isinstance(exc, TruncationError):
        return EXIT_NUMERICAL
    if isinstance(exc, ValueError):
        return EXIT_INVALID
    return EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    args = parser().parse_args(argv)
    try:
        return int(args.handler(args))
    except Exception as exc:
        print(f"ERROR: {exc}")
        return exit_code(exc)


if __name__ == "__main__":
    raise SystemExit(main())
