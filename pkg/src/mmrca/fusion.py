"""KPI-aware graph fusion.

Each modality earns an attention weight from how strongly its raw entity
series cross-correlate with the KPI; the two learned adjacencies are then
blended with those weights into one causal graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .panel import ModalityPanel


@dataclass
class ModalityScore:
    scores: np.ndarray  # one entry per entity, KPI excluded
    modality: str
    max_lag: int

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("modality scores must be finite")
        if self.max_lag < 0:
            raise ValueError("max_lag must be >= 0")


@dataclass
class FusedCausalGraph:
    adjacency: np.ndarray
    a_log: float
    a_metric: float
    node_names: list[str]

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=float)
        if not np.isclose(self.a_log + self.a_metric, 1.0):
            raise ValueError("attention weights must sum to 1")
        if self.a_log < 0 or self.a_metric < 0:
            raise ValueError("attention weights must be non-negative")
        if self.adjacency.shape != (len(self.node_names), len(self.node_names)):
            raise ValueError("adjacency shape does not match node_names")


def _lagged_correlation(x: np.ndarray, y: np.ndarray, lag: int, normalized: bool) -> float:
    # pairs (x[t+lag], y[t]) over the overlapping support
    a = x[lag:]
    b = y[: len(y) - lag] if lag > 0 else y
    if not normalized:
        return float(np.dot(a, b))
    ca = a - a.mean()
    cb = b - b.mean()
    denom = np.linalg.norm(ca) * np.linalg.norm(cb)
    if denom == 0.0:
        return 0.0
    return float(np.dot(ca, cb) / denom)


def cross_correlation_scores(
    panel: ModalityPanel, max_lag: int, modality: str = "metric", normalized: bool = True
) -> ModalityScore:
    """Per-entity max lagged correlation with the KPI over lags 0..max_lag.

    The entity series leads the KPI: at lag p the pairs are (x_i(t+p), y(t)).
    Normalized mode mean-centers both series over the overlap and divides by
    their norms (Pearson); raw mode keeps the plain inner product. Entities
    with zero variance at every lag score 0.
    """
    if max_lag >= panel.n_timesteps:
        raise ValueError(
            f"max_lag {max_lag} must be smaller than panel length {panel.n_timesteps}"
        )
    kpi = panel.kpi
    scores = np.empty(panel.n_nodes - 1)
    for i in range(panel.n_nodes - 1):
        best = -np.inf
        for lag in range(max_lag + 1):
            best = max(best, _lagged_correlation(panel.values[i], kpi, lag, normalized))
        scores[i] = best
    return ModalityScore(scores=scores, modality=modality, max_lag=max_lag)


def modality_attention(
    score_log: ModalityScore, score_metric: ModalityScore, k: int
) -> tuple[float, float]:
    """Two-way softmax over the top-k score sums of each modality.

    Returns (a_log, a_metric) with a_log + a_metric = 1. The softmax is
    computed max-subtracted, which leaves the values analytically unchanged.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(score_log.scores) or k > len(score_metric.scores):
        raise ValueError("k exceeds the number of entities")
    sums = np.array(
        [
            np.sort(score_log.scores)[-k:].sum(),
            np.sort(score_metric.scores)[-k:].sum(),
        ]
    )
    shifted = sums - sums.max()
    weights = np.exp(shifted)
    weights /= weights.sum()
    return float(weights[0]), float(weights[1])


def fuse(structure, weights: tuple[float, float], node_names: list[str]) -> FusedCausalGraph:
    """Convex combination A = a_log * A_log + a_metric * A_metric with zeroed diagonal.

    `structure` is anything exposing A_log and A_metric matrices (normally a
    LearnedStructure).
    """
    a_log_matrix = np.asarray(structure.A_log, dtype=float)
    a_metric_matrix = np.asarray(structure.A_metric, dtype=float)
    if a_log_matrix.shape != a_metric_matrix.shape:
        raise ValueError("modality adjacencies must share a shape")
    w_log, w_metric = weights
    if not np.isclose(w_log + w_metric, 1.0):
        raise ValueError("attention weights must sum to 1")
    fused = w_log * a_log_matrix + w_metric * a_metric_matrix
    np.fill_diagonal(fused, 0.0)
    return FusedCausalGraph(
        adjacency=fused, a_log=w_log, a_metric=w_metric, node_names=list(node_names)
    )


def graph_to_json(graph: FusedCausalGraph) -> str:
    payload = {
        "a_log": graph.a_log,
        "a_metric": graph.a_metric,
        "node_names": graph.node_names,
        "adjacency": [[float(v) for v in row] for row in graph.adjacency],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def graph_from_json(text: str) -> FusedCausalGraph:
    payload = json.loads(text)
    return FusedCausalGraph(
        adjacency=np.asarray(payload["adjacency"], dtype=float),
        a_log=payload["a_log"],
        a_metric=payload["a_metric"],
        node_names=list(payload["node_names"]),
    )


def graph_to_dot(graph: FusedCausalGraph, threshold: float = 0.3) -> str:
    """DOT export keeping edges whose fused weight exceeds the threshold."""
    lines = ["digraph fused_causal_graph {"]
    for name in graph.node_names:
        lines.append(f'  "{name}";')
    n = len(graph.node_names)
    for i in range(n):
        for j in range(n):
            w = graph.adjacency[i, j]
            if i != j and w > threshold:
                lines.append(
                    f'  "{graph.node_names[i]}" -> "{graph.node_names[j]}" [label="{w:.2f}"];'
                )
    lines.append("}")
    return "\n".join(lines) + "\n"
