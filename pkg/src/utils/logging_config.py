"""
Logging configuration for SpecTran

Console output goes through rich; run milestones use the
``EVENT | key=value`` register.
"""

import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, Optional, Union

from rich.console import Console
from rich.logging import RichHandler

DEFAULT_LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Shared stderr console for rich output
console = Console(stderr=True)

# Third-party loggers that are only useful when debugging them
_QUIET_LOGGERS = ("joblib",)


def _console_handler(use_rich: bool, log_format: str) -> logging.Handler:
    if use_rich:
        return RichHandler(
            console=console,
            show_path=False,
            rich_tracebacks=True,
            markup=False,
        )
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(log_format))
    return handler


def setup_logging(
    level: str = "INFO",
    log_file: Optional[Union[str, Path]] = None,
    log_format: Optional[str] = None,
    use_rich: bool = True
) -> logging.Logger:
    """
    Replace the root handlers with a console handler and an optional file handler

    Args:
        level: level name; unknown names fall back to INFO
        log_file: also append records to this file
        log_format: format for the file (and plain console) handler
        use_rich: rich console handler instead of a plain stream handler

    Returns:
        The root logger
    """
    resolved = logging.getLevelName(level.upper())
    if not isinstance(resolved, int):
        resolved = logging.INFO
    fmt = log_format or DEFAULT_LOG_FORMAT

    handlers = [_console_handler(use_rich, fmt)]
    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(fmt))
        handlers.append(file_handler)

    root = logging.getLogger()
    for old in list(root.handlers):
        root.removeHandler(old)
    for handler in handlers:
        handler.setLevel(resolved)
        root.addHandler(handler)
    root.setLevel(resolved)

    for name in _QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)
    return root


def get_logger(name: str) -> logging.Logger:
    """Module logger (pass __name__)"""
    return logging.getLogger(name)


class TrainingLogger:
    """
    JSON-lines training log

    One record per epoch: epoch, train_loss, valid_ndcg20, wall_clock_s,
    trainable_params. Records are mirrored to the module logger.
    """

    FIELDS = ("epoch", "train_loss", "valid_ndcg20", "wall_clock_s", "trainable_params")

    def __init__(self, log_file: Optional[Union[str, Path]] = None):
        self.logger = logging.getLogger("training")
        self.path = Path(log_file) if log_file else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def log_run_start(self, run_name: str, trainable_params: int, train_examples: int) -> None:
        self.logger.info(
            f"TRAIN_START | run={run_name} | params={trainable_params} | "
            f"examples={train_examples}"
        )

    def log_epoch(
        self,
        epoch: int,
        train_loss: float,
        valid_ndcg20: float,
        wall_clock_s: float,
        trainable_params: int
    ) -> Dict[str, Any]:
        """Append one epoch record and return it"""
        record = dict(zip(self.FIELDS, (epoch, train_loss, valid_ndcg20, wall_clock_s, trainable_params)))
        if self.path:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record) + "\n")
        self.logger.info(
            f"EPOCH | epoch={epoch} | loss={train_loss:.5f} | "
            f"valid_ndcg20={valid_ndcg20:.5f}"
        )
        return record

    def log_run_complete(self, best_epoch: int, best_ndcg20: float, duration_seconds: float) -> None:
        self.logger.info(
            f"TRAIN_COMPLETE | best_epoch={best_epoch} | "
            f"best_valid_ndcg20={best_ndcg20:.5f} | duration={duration_seconds:.2f}s"
        )


class ProgressTracker:
    """Counts completed steps of a bounded loop and reports them at DEBUG"""

    def __init__(self, total: int, description: str = "Progress"):
        self.total = max(int(total), 0)
        self.current = 0
        self.description = description
        self._started = time.perf_counter()
        self._logger = get_logger(__name__)

    @property
    def elapsed_seconds(self) -> float:
        return time.perf_counter() - self._started

    def update(self, steps: int = 1, message: Optional[str] = None) -> None:
        self.current = min(self.current + steps, self.total)
        if message:
            self._logger.debug(f"PROGRESS | {self.description} | {self.current}/{self.total} | {message}")

    def finish(self) -> float:
        """Log completion; returns elapsed seconds"""
        elapsed = self.elapsed_seconds
        self._logger.info(
            f"PROGRESS_DONE | {self.description} | steps={self.current} | elapsed={elapsed:.2f}s"
        )
        return elapsed
