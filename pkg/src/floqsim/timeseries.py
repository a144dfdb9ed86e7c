"""Stroboscopic sample container with CSV persistence.

Column layout is fixed: period, time, then observables in request
order.  Metadata travels separately (run manifests); the CSV holds only
the header and rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    """Rows of (period, time, named values) plus immutable run metadata."""

    column_names: list[str]
    periods: np.ndarray
    times: np.ndarray
    values: np.ndarray  # shape (n_rows, n_columns)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.periods = np.asarray(self.periods, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if self.values.size == 0:
            self.values = self.values.reshape(0, len(self.column_names))
        if self.values.shape != (len(self.periods), len(self.column_names)):
            raise ValueError("values shape must be (n_rows, n_columns)")
        if len(self.times) != len(self.periods):
            raise ValueError("times and periods must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_rows(self) -> int:
        return len(self.periods)

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.column_names.index(name)
        except ValueError:
            raise KeyError(f"no column {name!r}; have {self.column_names}") from None
        return self.values[:, j]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["period", "time", *self.column_names])
            for i in range(self.n_rows):
                w.writerow([int(self.periods[i]), repr(float(self.times[i])),
                            *(repr(float(x)) for x in self.values[i])])

    @classmethod
    def from_csv(cls, path, metadata=None) -> "TimeSeries":
        with open(path, newline="") as f:
            r = csv.reader(f)
            header = next(r)
            if header[:2] != ["period", "time"]:
                raise ValueError(f"unexpected series header in {path}")
            rows = [line for line in r if line]
        names = header[2:]
        periods = np.array([int(row[0]) for row in rows], dtype=np.int64)
        times = np.array([float(row[1]) for row in rows])
        values = np.array([[float(x) for x in row[2:]] for row in rows])
        values = values.reshape(len(rows), len(names))
        return cls(names, periods, times, values, metadata or {})


class SeriesRecorder:
    """Incremental builder used by the evolution loops.

    Optionally streams each finished row to a CSV file so that a run
    interrupted mid-flight leaves its completed samples on disk.
    """

    def __init__(self, column_names, metadata=None, stream_path=None, resume_rows=None):
        self.column_names = list(column_names)
        self.metadata = dict(metadata or {})
        self._periods: list[int] = []
        self._times: list[float] = []
        self._values: list[list[float]] = []
        self._stream = None
        if resume_rows is not None:
            for period, time, vals in resume_rows:
                self._periods.append(int(period))
                self._times.append(float(time))
                self._values.append([float(x) for x in vals])
        if stream_path is not None:
            fresh = not self._periods
            self._stream = open(stream_path, "a" if not fresh else "w", newline="")
            self._writer = csv.writer(self._stream)
            if fresh:
                self._writer.writerow(["period", "time", *self.column_names])
                self._stream.flush()

    def add(self, period: int, time: float, vals) -> None:
        vals = [float(x) for x in vals]
        if len(vals) != len(self.column_names):
            raise ValueError("row length does not match column set")
        self._periods.append(int(period))
        self._times.append(float(time))
        self._values.append(vals)
        if self._stream is not None:
            self._writer.writerow([int(period), repr(float(time)),
                                   *(repr(v) for v in vals)])
            self._stream.flush()

    @property
    def last_period(self) -> int:
        return self._periods[-1] if self._periods else -1

    def last_value(self, name: str) -> float:
        return self._values[-1][self.column_names.index(name)]

    def first_value(self, name: str) -> float:
        return self._values[0][self.column_names.index(name)]

    def recent_values(self, name: str, count: int) -> list[float]:
        j = self.column_names.index(name)
        return [row[j] for row in self._values[-count:]]

    def close(self):
        if self._stream is not None:
            self._stream.close()
            self._stream = None

    def to_series(self) -> TimeSeries:
        vals = np.array(self._values, dtype=np.float64)
        vals = vals.reshape(len(self._periods), len(self.column_names))
        return TimeSeries(self.column_names, np.array(self._periods, dtype=np.int64),
                          np.array(self._times), vals, self.metadata)
