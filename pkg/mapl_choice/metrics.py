"""
Prometheus metrics for fits and experiment runs.
"""

from pathlib import Path
from typing import Optional, Union

from prometheus_client import CollectorRegistry, Counter, Histogram, Info, write_to_textfile

# Custom registry for application metrics
app_registry = CollectorRegistry()

fits_total = Counter(
    "mapl_fits_total",
    "Total number of model fits",
    ["model", "status"],
    registry=app_registry,
)

fit_duration_seconds = Histogram(
    "mapl_fit_duration_seconds",
    "Wall-clock time spent fitting a model",
    ["model"],
    buckets=[0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 300.0, 900.0, 3600.0],
    registry=app_registry,
)

training_epochs_total = Counter(
    "mapl_training_epochs_total",
    "Total number of optimizer epochs run",
    ["model"],
    registry=app_registry,
)

probability_clamps_total = Counter(
    "mapl_probability_clamps_total",
    "Simulated probabilities clamped at the likelihood floor",
    ["source"],
    registry=app_registry,
)

cells_total = Counter(
    "mapl_cells_total",
    "Experiment result rows by status",
    ["status"],
    registry=app_registry,
)

app_info = Info(
    "mapl_app",
    "Application information",
    registry=app_registry,
)


def record_fit(model: str, status: str, seconds: float, epochs: int = 0) -> None:
    """Record one fit outcome."""
    fits_total.labels(model=model, status=status).inc()
    fit_duration_seconds.labels(model=model).observe(max(seconds, 0.0))
    if epochs:
        training_epochs_total.labels(model=model).inc(epochs)


def record_clamps(source: str, count: int) -> None:
    if count > 0:
        probability_clamps_total.labels(source=source).inc(count)


def record_result_row(model: str, status: str, wall_seconds: float, clamp_count: int) -> None:
    """Record an experiment row in the main process."""
    cells_total.labels(status="ok" if status == "ok" else "failed").inc()
    record_fit(model, "ok" if status == "ok" else "failed", wall_seconds)
    record_clamps(model, clamp_count)


def setup_metrics(app_name: str, app_version: str) -> None:
    app_info.info({"name": app_name, "version": app_version})


def write_metrics(path: Optional[Union[str, Path]]) -> None:
    """Write the registry in Prometheus text format when a path is configured."""
    if not path:
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(target), app_registry)
