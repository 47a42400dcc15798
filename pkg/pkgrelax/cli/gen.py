import argparse
import logging
from pathlib import Path

from pkgrelax.cli.common import EXIT_OK
from pkgrelax.services.ingest import generate_dataset, load_dataset_spec, write_items

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen", help="Generate a synthetic item table.")
    parser.add_argument("--spec", type=Path, required=True, help="DatasetSpec JSON.")
    parser.add_argument("--out", type=Path, required=True, help="CSV file to write.")
    parser.set_defaults(handler=cmd_gen)


def cmd_gen(args: argparse.Namespace) -> int:
    table = generate_dataset(load_dataset_spec(args.spec))
    path = write_items(table, args.out)
    logger.info("✅ Wrote %d items to %s", len(table), path)
    print(path)
    return EXIT_OK
