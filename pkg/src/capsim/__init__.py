"""capsim: deterministic magnetic capsule endoscope simulation and evaluation."""

import logging
import os

__version__ = "0.1.0"


def _configure_logging():
    level = os.environ.get("CAPSIM_LOG_LEVEL")
    if level:
        logging.basicConfig(level=level.upper())


_configure_logging()
