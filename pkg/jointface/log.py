"""JointFace — structlog setup shared by the CLI and long-running jobs."""
import logging

import structlog

_configured = False


def configure_logging(level: str = "info", json: bool = False) -> None:
    """Configure structlog once per process. Later calls are ignored."""
    global _configured
    if _configured:
        return

    renderer = structlog.processors.JSONRenderer() if json else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level.upper(), logging.INFO)),
    )
    _configured = True
