import os
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv

load_dotenv()


@dataclass(frozen=True)
class Settings:
    log_level: str
    threads: int
    block_size: int
    output_root: str
    database_url: str | None


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings(
        log_level=os.getenv('DECOUPLER_LOG_LEVEL', 'INFO').upper(),
        threads=int(os.getenv('DECOUPLER_THREADS', '1')),
        block_size=int(os.getenv('DECOUPLER_BLOCK_SIZE', '4096')),
        output_root=os.getenv('DECOUPLER_OUTPUT_ROOT', 'runs'),
        # registry is off unless a database is configured
        database_url=os.getenv('DATABASE_URL') or None,
    )
