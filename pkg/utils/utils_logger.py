"""
Logger Setup Script
File: utils/utils_logger.py

This script provides logging functions for the project.
Training runs, evaluation passes and data generation all log through here.

Features:
- Logs information, warnings, and errors to a designated log file.
- Ensures the log directory exists.
- Sanitizes logs to remove personal/identifying information for GitHub sharing.
"""

#####################################
# Import Modules
#####################################

# Imports from Python Standard Library
import getpass
import os
import pathlib
import sys
from typing import Any, Mapping

# Imports from external packages
from dotenv import load_dotenv
from loguru import logger

#####################################
# Default Configurations
#####################################

load_dotenv()

# Set directory where logs will be stored
LOG_FOLDER: pathlib.Path = pathlib.Path(os.getenv("GLOCALFUSE_LOG_FOLDER", "logs"))

# Set the name of the log file
LOG_FILE: pathlib.Path = LOG_FOLDER.joinpath("project_log.log")

LOG_LEVEL: str = os.getenv("GLOCALFUSE_LOG_LEVEL", "INFO").upper()

#####################################
# Helper Functions
#####################################


def _identifying_strings() -> list[tuple[str, str]]:
    """(value, placeholder) pairs scrubbed from every message, longest paths first."""
    pairs = []
    for lookup, placeholder in (
        (lambda: str(pathlib.Path.cwd()), "PROJECT_ROOT"),
        (lambda: str(pathlib.Path.home()), "~"),
        (getpass.getuser, "USER"),
    ):
        try:
            pairs.append((lookup(), placeholder))
        except Exception:
            continue
    return pairs


def sanitize_message(record: Mapping[str, Any]) -> str:
    """Scrub user name and local paths, normalize slashes, and escape braces for loguru."""
    message = record["message"]
    for value, placeholder in _identifying_strings():
        if value:
            message = message.replace(value, placeholder)
    message = message.replace("\\", "/")
    return message.replace("{", "{{").replace("}", "}}")


def format_sanitized(record: Mapping[str, Any]) -> str:
    """Custom formatter that sanitizes messages and returns a plain string."""
    message = sanitize_message(record)
    time_str = record["time"].strftime("%Y-%m-%d %H:%M:%S")
    level_name = record["level"].name
    return f"{time_str} | {level_name} | {message}\n"


try:
    LOG_FOLDER.mkdir(parents=True, exist_ok=True)
except Exception as e:
    print(f"Error creating log folder: {e}")

try:
    logger.remove()
    logger.add(
        LOG_FILE,
        level=LOG_LEVEL,
        rotation="5 MB",  # training logs grow quickly
        retention=2,
        compression=None,
        enqueue=True,  # safer across loader worker processes
        format=format_sanitized,
    )
    logger.add(
        sys.stderr,
        level=LOG_LEVEL,
        enqueue=True,
        format=format_sanitized,
    )
    logger.debug(f"Logging to file: {LOG_FILE}")
except Exception as e:
    logger.error(f"Error configuring logger to write to file: {e}")


def get_log_file_path() -> pathlib.Path:
    """Return the path to the log file."""
    return LOG_FILE


def log_banner(title: str, **fields: Any) -> None:
    """Log a START/END style banner followed by one line per field."""
    logger.info(title)
    for key, value in fields.items():
        logger.info(f"  {key} = {value}")
