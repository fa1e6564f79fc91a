import sys

from loguru import logger


def configure(verbose=False):
    """Route diagnostics to stderr; stdout stays reserved for results."""
    logger.remove()
    logger.add(
        sys.stderr,
        level='DEBUG' if verbose else 'WARNING',
        format='<level>{level: <7}</level> {name}:{function} - {message}',
    )
    return logger
