"""Modality panels: per-entity time series with the KPI as the last row.

Both the metric and the log modality are handled as an n x T matrix whose
first n-1 rows are entity series and whose last row is the system KPI.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class ModalityPanel:
    """An n x T panel of time series; row n-1 is always the KPI."""

    values: np.ndarray
    entity_names: list[str]
    kpi_name: str = "kpi"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("panel values must be a 2-D array")
        if self.values.shape[0] != len(self.entity_names) + 1:
            raise ValueError(
                f"panel has {self.values.shape[0]} rows but "
                f"{len(self.entity_names)} entity names (+1 KPI expected)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("panel contains NaN or Inf")

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_timesteps(self) -> int:
        return self.values.shape[1]

    @property
    def node_names(self) -> list[str]:
        return list(self.entity_names) + [self.kpi_name]

    @property
    def kpi(self) -> np.ndarray:
        return self.values[-1]


def aggregate_windows(panel: ModalityPanel, window_size: int) -> ModalityPanel:
    """Average a panel over consecutive fixed windows (last window may be short).

    With window_size=1 the panel is returned unchanged (same resolution as the
    raw timeline); larger windows align a timestep-resolution panel with
    window-resolution log series.
    """
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    if window_size == 1:
        return ModalityPanel(panel.values.copy(), list(panel.entity_names), panel.kpi_name)
    n, t = panel.values.shape
    n_windows = -(-t // window_size)
    out = np.empty((n, n_windows))
    for w in range(n_windows):
        out[:, w] = panel.values[:, w * window_size:(w + 1) * window_size].mean(axis=1)
    return ModalityPanel(out, list(panel.entity_names), panel.kpi_name)


KPI_ENTITY = "kpi"


def write_panel_csv(panel: ModalityPanel, path, metric_name: str) -> None:
    """Write a panel in the long metric CSV schema (timestamp, entity, metric_name, value)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "entity", "metric_name", "value"])
        names = panel.entity_names
        for t in range(panel.n_timesteps):
            for i, name in enumerate(names):
                writer.writerow([t, name, metric_name, repr(float(panel.values[i, t]))])
            writer.writerow([t, KPI_ENTITY, KPI_ENTITY, repr(float(panel.values[-1, t]))])


def read_panel_csv(path, metric_name: str | None = None) -> ModalityPanel:
    """Rebuild a panel from the long CSV schema.

    If metric_name is given, only rows of that metric kind are used for the
    entity series; KPI rows (entity == "kpi") are always used for the last row.
    """
    series: dict[str, dict[int, float]] = {}
    entity_order: list[str] = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            entity = row["entity"]
            if entity != KPI_ENTITY and metric_name is not None and row["metric_name"] != metric_name:
                continue
            if entity not in series:
                series[entity] = {}
                if entity != KPI_ENTITY:
                    entity_order.append(entity)
            series[entity][int(row["timestamp"])] = float(row["value"])
    if KPI_ENTITY not in series:
        raise ValueError(f"no KPI rows found in {path}")
    timestamps = sorted(series[KPI_ENTITY])
    values = np.empty((len(entity_order) + 1, len(timestamps)))
    for i, name in enumerate(entity_order):
        values[i] = [series[name][t] for t in timestamps]
    values[-1] = [series[KPI_ENTITY][t] for t in timestamps]
    return ModalityPanel(values, entity_order, KPI_ENTITY)
