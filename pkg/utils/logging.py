import sys

from loguru import logger

LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {name}:{function} - {message}"


def configure_logging(verbose: bool = False, quiet: bool = False):
    """Install a single stderr sink; library modules just import loguru's logger"""
    logger.remove()
    level = "DEBUG" if verbose else ("WARNING" if quiet else "INFO")
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)
    return logger
