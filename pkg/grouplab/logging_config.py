import logging.config
from typing import Optional

from .config import LOG_LEVEL
from .errors import UsageError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def configure_logging(level: Optional[str] = None) -> None:
    """Configure console logging for the grouplab package"""
    name = (level or LOG_LEVEL).upper()
    if name not in LOG_LEVELS:
        choices = ", ".join(LOG_LEVELS)
        raise UsageError(f"unknown log level {level or LOG_LEVEL!r}; expected one of {choices}")
    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {"console": {"format": LOG_FORMAT}},
            "handlers": {
                "console": {
                    "class": "logging.StreamHandler",
                    "formatter": "console",
                    "stream": "ext://sys.stderr",
                }
            },
            "loggers": {
                "grouplab": {
                    "handlers": ["console"],
                    "level": name,
                    "propagate": False,
                }
            },
        }
    )
