from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # --------------------
    # Logging
    # --------------------
    log_level: str = "WARNING"

    # --------------------
    # Numerics
    # --------------------
    tolerance: float = 1e-9  # absolute, on constraint comparisons
    epsilon: float = 1e-12  # guard for zero denominators in metrics

    # --------------------
    # Solver
    # --------------------
    max_items_bruteforce: int = 15
    node_limit: int = 10**8
    max_package_size_unbounded: Optional[int] = None  # None means n_items

    # --------------------
    # Relaxation search
    # --------------------
    optimal_enumeration_cap: int = 20
    search_threads: int = 1
    solve_cache_size: int = 4096

    # --------------------
    # Benchmarks
    # --------------------
    generation_attempts: int = 50
    widening_rounds: int = 6
    bench_output_dir: str = "bench_out"

    # --------------------
    # Pydantic Settings Config
    # --------------------
    model_config = SettingsConfigDict(
        env_file="env/.env",
        env_prefix="PKGRELAX_",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()
