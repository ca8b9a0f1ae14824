"""
This module is for logging utility functions.
"""
import logging
import os
from typing import Optional, Union

import coloredlogs

DEFAULT_LOGS_PATH = './artifacts/logs'
SIMPLE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger('stagewise_mtl')


def setup_logging(experiment_name: str,
                  logs_path: Optional[str] = None,
                  level: Union[int, str] = 'INFO'):
    """
    Attach file and console handlers to the package logger.

    Two files are written per experiment: ``<name>.info.log`` and ``<name>.error.log``.
    Calling it twice for the same experiment does not duplicate handlers.
    """
    logs_path = logs_path or DEFAULT_LOGS_PATH
    os.makedirs(logs_path, exist_ok=True)

    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    info_handler = logging.FileHandler(os.path.join(logs_path, f'{experiment_name}.info.log'))
    error_handler = logging.FileHandler(os.path.join(logs_path, f'{experiment_name}.error.log'))

    info_handler.setLevel(logging.INFO)
    error_handler.setLevel(logging.ERROR)

    info_handler.setFormatter(logging.Formatter(SIMPLE_FORMAT))
    error_handler.setFormatter(logging.Formatter(SIMPLE_FORMAT))

    logger.addHandler(info_handler)
    logger.addHandler(error_handler)
    logger.propagate = False

    # coloredlogs adds the console handler
    coloredlogs.install(fmt=SIMPLE_FORMAT, level=level, logger=logger)
    return logger
