"""Per-evaluation training records and their CSV form.

"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence, Type, TypeVar

try:
    from typing import Self
except ImportError:
    Self = TypeVar("Self")

import pandas as pd

__all__ = ["SchemaError", "MetricsRecord", "METRIC_COLUMNS", "success_columns", "metrics_frame", "write_metrics",
           "read_metrics"]

METRIC_COLUMNS = ["epoch", "beta", "d_loss", "v_loss", "surrogate_gain"]


class SchemaError(ValueError):
    """Raised when a metrics CSV does not have the expected columns.

    """
    pass


@dataclass(frozen=True)
class MetricsRecord:
    """Losses, β and per-task evaluation successes at one epoch.

    ``successes`` holds one count per task, task 1 first.

    """

    epoch: int
    beta: float
    d_loss: float
    v_loss: float
    surrogate_gain: float
    successes: tuple[int, ...]

    ser_identifier = "MetricsRecord"

    def __post_init__(self):
        object.__setattr__(self, "successes", tuple(int(s) for s in self.successes))

    def serialize(self) -> tuple[str, dict[str, Any]]:
        return self.ser_identifier, dict(epoch=self.epoch, beta=self.beta, d_loss=self.d_loss, v_loss=self.v_loss,
                                         surrogate_gain=self.surrogate_gain, successes=list(self.successes))

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], **_) -> Self:
        return cls(**d)


def success_columns(n_tasks: int) -> list[str]:
    return [f"success_task{k + 1}" for k in range(n_tasks)]


def metrics_frame(records: Sequence[MetricsRecord]) -> pd.DataFrame:
    n_tasks = len(records[0].successes) if records else 2
    rows = [[r.epoch, r.beta, r.d_loss, r.v_loss, r.surrogate_gain, *r.successes] for r in records]
    return pd.DataFrame(rows, columns=METRIC_COLUMNS + success_columns(n_tasks))


def write_metrics(records: Sequence[MetricsRecord], path: str | Path) -> None:
    metrics_frame(records).to_csv(path, index=False)


def read_metrics(path: str | Path) -> list[MetricsRecord]:
    """Parse a metrics CSV.

    Raises
    ------
    SchemaError if the columns are not epoch, beta, d_loss, v_loss, surrogate_gain and
    one or more success_task<k> columns in task order.

    """
    frame = pd.read_csv(path, float_precision="round_trip")
    columns = list(frame.columns)
    n_tasks = len(columns) - len(METRIC_COLUMNS)
    if n_tasks < 1 or columns != METRIC_COLUMNS + success_columns(n_tasks):
        raise SchemaError(f"{path} has columns {columns}")
    successes = success_columns(n_tasks)
    return [MetricsRecord(int(row.epoch), float(row.beta), float(row.d_loss), float(row.v_loss),
                          float(row.surrogate_gain), tuple(int(row[c]) for c in successes))
            for _, row in frame.iterrows()]
