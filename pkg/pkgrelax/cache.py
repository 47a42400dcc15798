"""
In-memory memoization of solver outcomes.
Relaxation searches solve many sub-queries of one query; identical retained
constraint sets are solved once per cache.
"""
from cachetools import LRUCache
from typing import Any, Callable, Hashable
import hashlib
import json
import logging
import threading

from pkgrelax.config import settings

logger = logging.getLogger(__name__)


def generate_cache_key(*args, **kwargs) -> str:
    """Generate a cache key from function arguments"""
    key_data = {
        'args': args,
        'kwargs': kwargs
    }
    key_string = json.dumps(key_data, sort_keys=True, default=str)
    return hashlib.md5(key_string.encode()).hexdigest()


class SolveCache:
    """Thread-safe LRU cache with hit/miss accounting"""

    def __init__(self, maxsize: int = None, name: str = "solve"):
        self.name = name
        self._cache = LRUCache(maxsize=maxsize or settings.solve_cache_size)
        self._lock = threading.RLock()
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        with self._lock:
            if key in self._cache:
                self.hits += 1
                return self._cache[key]
            self.misses += 1

        # computed outside the lock so concurrent candidates do not serialize
        value = compute()
        with self._lock:
            self._cache[key] = value
        return value

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()
            logger.debug("🗑️  Cleared %s cache", self.name)

    def __len__(self) -> int:
        return len(self._cache)

    def stats(self) -> dict:
        """Get cache statistics"""
        return {
            "name": self.name,
            "size": len(self._cache),
            "maxsize": self._cache.maxsize,
            "currsize": self._cache.currsize,
            "hits": self.hits,
            "misses": self.misses,
        }
