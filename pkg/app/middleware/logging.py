"""
Logging setup and pipeline stage timing
"""
import sys
import time
from contextlib import contextmanager
from typing import Iterator

from loguru import logger

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)


def configure_logging(level: str = "INFO") -> None:
    """Replace the default sink with a stderr sink at the given level"""
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)


@contextmanager
def log_stage(name: str) -> Iterator[None]:
    """Log start, end and elapsed time of a pipeline stage"""
    start_time = time.perf_counter()
    logger.debug(f"Stage start: {name}")
    try:
        yield
    except Exception as e:
        elapsed = time.perf_counter() - start_time
        logger.error(f"Stage failed: {name} after {elapsed:.3f}s - {e}")
        raise
    elapsed = time.perf_counter() - start_time
    logger.info(f"Stage done: {name} - Time: {elapsed:.3f}s")
