from __future__ import annotations

import logging
import os
import sys

LOG_ENV = "ECODYN_LOG"
LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def get_log_level(value: str | None = None) -> int:
    """Map the `ECODYN_LOG` value to a logging level, `warn` when unset or unknown."""

    if value is None:
        value = os.environ.get(LOG_ENV, "warn")
    return LOG_LEVELS.get(value.strip().lower(), logging.WARNING)


logging.basicConfig(
    level=get_log_level(),
    format="[%(levelname)s] %(name)s: %(message)s",
)


def set_logging_color(level: int, color: int) -> None:
    def get_color_code(color: int = 0) -> str:
        return f"\033[{color}m"

    fmt = get_color_code(color) + logging.getLevelName(level) + get_color_code()
    logging.addLevelName(level, fmt)


if sys.stderr.isatty():
    set_logging_color(logging.DEBUG, 34)  # blue
    set_logging_color(logging.INFO, 32)  # green
    set_logging_color(logging.WARNING, 33)  # yellow
    set_logging_color(logging.ERROR, 31)  # red
    set_logging_color(logging.CRITICAL, 35)  # magenta


def get_colored_logger(name: str | None = None) -> logging.Logger:
    return logging.getLogger(f"ecodyn.{name}" if name else "ecodyn")


def configure_logging(value: str | None = None) -> int:
    """Re-read the log level, e.g. after the CLI has started."""

    raw = os.environ.get(LOG_ENV) if value is None else value
    level = get_log_level(raw)
    logging.getLogger("ecodyn").setLevel(level)
    if raw is not None and raw.strip().lower() not in LOG_LEVELS:
        get_colored_logger().warning(
            f"{LOG_ENV}={raw!r} is not one of {', '.join(LOG_LEVELS)}; using warn"
        )
    return level
