"""
Logging setup built on loguru.
"""
import sys
from pathlib import Path
from typing import Optional, Union

from loguru import logger

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)


def configure_logging(
    level: str = "INFO",
    log_file: Optional[Union[str, Path]] = None,
    enable: bool = True
) -> None:
    """
    Replace the default loguru sink with the modedg sinks.

    Args:
        level: Minimum level for all sinks
        log_file: Optional file that receives a copy of the log
        enable: When False, all sinks are removed and nothing is logged
    """
    logger.remove()
    if not enable:
        return
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)
    if log_file is not None:
        logger.add(str(log_file), level=level.upper(), format=LOG_FORMAT, colorize=False)
