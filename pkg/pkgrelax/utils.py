import logging
import sys
import time
from contextlib import contextmanager
from typing import Iterator, List, Optional


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging on stderr; stdout is reserved for result documents"""
    from pkgrelax.config import settings

    logging.basicConfig(
        force=True,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        level=(level or settings.log_level).upper(),
    )


def round_half_up(numerator: int, denominator: int) -> int:
    """round(numerator / denominator) with halves rounded up, in integer arithmetic"""
    return (2 * numerator + denominator) // (2 * denominator)


class Stopwatch:
    def __init__(self):
        self.seconds = 0.0


@contextmanager
def stopwatch() -> Iterator[Stopwatch]:
    watch = Stopwatch()
    started = time.perf_counter()
    try:
        yield watch
    finally:
        watch.seconds = time.perf_counter() - started


def parse_key_values(text: str) -> List[tuple]:
    """'a=1,b=2' -> [('a', '1'), ('b', '2')]"""
    pairs = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"expected key=value, got '{part}'")
        key, value = part.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs
