# logs.py
# One stream handler, "[module] message" lines like the rest of the tooling prints.

import logging
import sys

LOG_FORMAT = "[%(module)s] %(message)s"


def setup_logging(level: str | int = "INFO") -> None:
    root = logging.getLogger()
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    root.setLevel(level)

    # re-running the CLI in one process (tests) must not stack handlers
    for handler in list(root.handlers):
        if getattr(handler, "_dissipate", False):
            root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._dissipate = True
    root.addHandler(handler)
