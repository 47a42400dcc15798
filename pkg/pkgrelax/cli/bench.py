import argparse
from pathlib import Path

from pkgrelax.cli.common import EXIT_OK, positive_int
from pkgrelax.config import settings
from pkgrelax.services.bench import load_workload_spec, run_benchmark


def register(subparsers) -> None:
    parser = subparsers.add_parser("bench", help="Run a benchmark workload and write curve CSVs.")
    parser.add_argument("--spec", type=Path, required=True, help="WorkloadSpec JSON.")
    parser.add_argument("--out", type=Path, default=None, help="Output directory.")
    parser.add_argument("--threads", type=positive_int, default=1, help="Parallel benchmark cells.")
    parser.set_defaults(handler=cmd_bench)


def cmd_bench(args: argparse.Namespace) -> int:
    spec = load_workload_spec(args.spec)
    artifacts = run_benchmark(spec, args.out or Path(settings.bench_output_dir), threads=args.threads)
    for name, path in artifacts.model_dump().items():
        if path is not None:
            print(f"{name}: {path}")
    return EXIT_OK
