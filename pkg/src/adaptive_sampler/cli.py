"""Command-line entry point: one subcommand per pipeline stage."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import SEED_NAMES, ConfigError, load_config
from .pipeline import STAGE_FUNCS, STAGES, ArtifactMismatch, ArtifactStore, MissingArtifact

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
FIXTURE_CHOICES = ("small", "twin-rooms", "mirrored")


def _seed_override(text: str) -> tuple[str, int]:
    name, sep, value = text.partition("=")
    if not sep or name not in SEED_NAMES:
        raise argparse.ArgumentTypeError(f"expected NAME=U64 with NAME in {', '.join(SEED_NAMES)}")
    try:
        seed = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed {value!r} is not an integer") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"seed {seed} outside the unsigned 64-bit range")
    return name, seed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON RunConfig (see `schema`)")
    common.add_argument("--out", metavar="DIR", help="artifact directory (overrides paths.output_dir)")
    common.add_argument("--seed-override", metavar="NAME=U64", type=_seed_override, action="append",
                        default=[], help="replace one named seed; repeatable")

    parser = argparse.ArgumentParser(prog="adaptive-sampler", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        p = sub.add_parser(stage, parents=[common])
        if stage == "ingest":
            p.add_argument("--fixture", choices=FIXTURE_CHOICES,
                           help="use a bundled floor plan instead of paths.floor_plan")
        if stage == "zone":
            p.add_argument("--method", choices=("spaces", "grid", "build2vec", "all"), default="all")
            p.add_argument("--no-mirror", action="store_true",
                           help="skip the mirrored-plan zone counts used for scalability classes")
    run = sub.add_parser("run", parents=[common], help="every stage in order")
    run.add_argument("--fixture", choices=FIXTURE_CHOICES)
    run.add_argument("--method", choices=("spaces", "grid", "build2vec", "all"), default="all")
    run.add_argument("--no-mirror", action="store_true")
    sub.add_parser("schema", help="print the RunConfig JSON schema")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("ADAPTIVE_SAMPLER_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def _run_stage(store: ArtifactStore, stage: str, args: argparse.Namespace) -> None:
    if stage == "ingest":
        STAGE_FUNCS[stage](store, fixture=args.fixture)
    elif stage == "zone":
        STAGE_FUNCS[stage](store, method=args.method, mirrored=not args.no_mirror)
    else:
        STAGE_FUNCS[stage](store)


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        import json

        from .config import config_schema

        print(json.dumps(config_schema(), indent=2, sort_keys=True))
        return 0
    overrides = {f"seeds__{name}": seed for name, seed in args.seed_override}
    if args.out:
        overrides["paths__output_dir"] = args.out
    try:
        config = load_config(args.config, **overrides)
        store = ArtifactStore(config.paths.output_dir, config)
        stages = STAGES if args.command == "run" else (args.command,)
        for stage in stages:
            _run_stage(store, stage, args)
            print(f"{stage}: ok ({store.manifest_path(stage)})")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (MissingArtifact, ArtifactMismatch, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
