"""
Structured logging configuration using loguru with JSON formatting.
"""

import contextvars
import json
import sys
import uuid
from pathlib import Path
from typing import Any, Optional

from loguru import logger

# Context variables for run tracking
run_id_var: contextvars.ContextVar[str] = contextvars.ContextVar("run_id", default="")
cell_var: contextvars.ContextVar[str] = contextvars.ContextVar("cell", default="")


class StructuredLogger:
    """Structured logger configuration with JSON formatting."""

    def __init__(
        self,
        service_name: str = "mapl-choice",
        log_level: str = "INFO",
        log_file: Optional[str] = None,
        json_format: bool = False,
    ):
        self.service_name = service_name
        self.log_level = log_level
        self.log_file = log_file
        self.json_format = json_format

        # Remove default logger
        logger.remove()

        self._configure_logger()

    def _json_line(self, record: dict[str, Any]) -> str:
        log_entry: dict[str, Any] = {
            "timestamp": record["time"].isoformat(),
            "level": record["level"].name,
            "service": self.service_name,
            "logger": record["name"],
            "message": record["message"],
            "module": record["module"],
            "function": record["function"],
            "line": record["line"],
        }

        run_id = run_id_var.get()
        if run_id:
            log_entry["run_id"] = run_id
        cell = cell_var.get()
        if cell:
            log_entry["cell"] = cell

        log_entry.update(
            {k: v for k, v in record["extra"].items() if not k.startswith("_")}
        )

        if record["exception"]:
            log_entry["exception"] = {
                "type": record["exception"].type.__name__,
                "message": str(record["exception"].value),
            }

        return json.dumps(log_entry, default=str, ensure_ascii=False)

    def _configure_logger(self) -> None:
        """Configure loguru sinks; stdout stays free for command output."""

        def json_formatter(record: dict[str, Any]) -> str:
            record["extra"]["_json"] = self._json_line(record)
            return "{extra[_json]}\n"

        def human_formatter(record: dict[str, Any]) -> str:
            extra_info = ""
            run_id = run_id_var.get()
            if run_id:
                extra_info += f" [run:{run_id[:8]}]"
            cell = cell_var.get()
            if cell:
                extra_info += f" [cell:{cell}]"
            return (
                "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
                "<level>{level: <8}</level> | "
                f"<cyan>{self.service_name}</cyan> | "
                "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan>"
                f"{extra_info} - <level>{{message}}</level>\n"
            )

        formatter = json_formatter if self.json_format else human_formatter

        logger.add(
            sys.stderr,
            format=formatter,
            level=self.log_level,
            colorize=not self.json_format,
            backtrace=False,
            diagnose=False,
        )

        if self.log_file:
            log_path = Path(self.log_file)
            log_path.parent.mkdir(parents=True, exist_ok=True)

            logger.add(
                str(log_path),
                format=json_formatter,
                level=self.log_level,
                rotation="100 MB",
                retention="30 days",
                compression="gz",
            )

            error_log_path = log_path.parent / f"{log_path.stem}_errors{log_path.suffix}"
            logger.add(
                str(error_log_path),
                format=json_formatter,
                level="ERROR",
                rotation="50 MB",
                retention="90 days",
                compression="gz",
            )


class ContextLogger:
    """Logger facade that binds keyword context to every record."""

    @staticmethod
    def info(message: str, **kwargs: Any) -> None:
        logger.bind(**kwargs).info(message)

    @staticmethod
    def error(message: str, **kwargs: Any) -> None:
        logger.bind(**kwargs).error(message)

    @staticmethod
    def warning(message: str, **kwargs: Any) -> None:
        logger.bind(**kwargs).warning(message)

    @staticmethod
    def debug(message: str, **kwargs: Any) -> None:
        logger.bind(**kwargs).debug(message)


# Global structured logger instance
structured_logger = ContextLogger()


def setup_logging(
    service_name: str = "mapl-choice",
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    json_format: bool = False,
) -> StructuredLogger:
    """Setup structured logging and start a new run id."""
    run_id_var.set(uuid.uuid4().hex)
    return StructuredLogger(
        service_name=service_name,
        log_level=log_level,
        log_file=log_file,
        json_format=json_format,
    )


def log_fit_checkpoint(
    model: str,
    epoch: int,
    train_nll: float,
    valid_nll: float,
    **kwargs: Any,
) -> None:
    """Log one training checkpoint."""
    structured_logger.debug(
        f"Checkpoint {model} epoch {epoch}: train={train_nll:.6f} valid={valid_nll:.6f}",
        model=model,
        epoch=epoch,
        train_nll=train_nll,
        valid_nll=valid_nll,
        event_type="fit_checkpoint",
        **kwargs,
    )


def log_cell_result(
    dgp: str,
    model: str,
    rep: int,
    status: str,
    pct_error: Optional[float] = None,
    **kwargs: Any,
) -> None:
    """Log an experiment cell outcome."""
    message = f"Cell {dgp}/{model}/rep{rep}: {status}"
    if pct_error is not None:
        message += f" (pct_error={pct_error:.3f})"
    log = structured_logger.info if status == "ok" else structured_logger.error
    log(
        message,
        dgp=dgp,
        model=model,
        rep=rep,
        status=status,
        pct_error=pct_error,
        event_type="cell_result",
        **kwargs,
    )


def log_clamp_events(source: str, count: int, **kwargs: Any) -> None:
    """Log probability-floor clamps (simulated probabilities below the floor)."""
    if count <= 0:
        return
    structured_logger.warning(
        f"{source}: {count} simulated probabilities clamped at the floor",
        source=source,
        clamp_count=count,
        event_type="probability_clamp",
        **kwargs,
    )
