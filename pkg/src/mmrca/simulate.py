"""Synthetic incidents with known causal structure and planted root causes.

Entity metrics follow a lag-1 linear structural process along a ground-truth
DAG; the KPI is an extra node fed by the DAG's sink entities. A fault injects
a sustained shock at the root-cause entity (metric faults), a burst of
golden-signal log messages propagating along the DAG (log faults), or both.
Faults that are invisible in metrics still degrade the KPI directly, since
the KPI is the symptom that defines the incident.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .panel import ModalityPanel

FAULT_TYPES = ("none", "metric_only", "log_only", "both")

# lag order of the generating process; horizons shorter than 4 lags are rejected
LAG_ORDER = 1

SELF_DECAY = 0.5
EDGE_WEIGHT_RANGE = (0.3, 0.8)
FAULT_ONSET_FRACTION = 0.6
SHOCK_NOISE_MULTIPLIER = 8.0
SHOCK_FLOOR = 1.0
NORMAL_LOG_RATE = 2.0
BURST_RANGE = (10, 30)
BURST_HOP_DECAY = 0.6
BURST_SPREAD = 12


@dataclass
class ScenarioSpec:
    n_entities: int
    ground_truth_dag: np.ndarray
    root_cause: int
    fault_type: str
    horizon_T: int
    noise_std: float
    seed: int
    metric_kinds: tuple[str, ...] = ("cpu",)
    log_lag: int = 1  # per-hop delay (timesteps) of the log burst propagation

    def __post_init__(self):
        self.ground_truth_dag = np.asarray(self.ground_truth_dag, dtype=int)

    def validate(self) -> None:
        dag = self.ground_truth_dag
        if self.n_entities < 1:
            raise ValueError("n_entities must be positive")
        if dag.shape != (self.n_entities, self.n_entities):
            raise ValueError("ground_truth_dag must be n_entities x n_entities")
        if not np.isin(dag, (0, 1)).all():
            raise ValueError("ground_truth_dag must be binary")
        if np.any(np.diag(dag) != 0):
            raise ValueError("ground_truth_dag must have a zero diagonal")
        if topological_order(dag) is None:
            raise ValueError("ground_truth_dag must be acyclic")
        if not 0 <= self.root_cause < self.n_entities:
            raise ValueError("root_cause must be a valid entity index")
        if self.fault_type not in FAULT_TYPES:
            raise ValueError(f"fault_type must be one of {FAULT_TYPES}")
        if self.horizon_T < 4 * LAG_ORDER:
            raise ValueError(
                f"horizon_T={self.horizon_T} is below 4x the lag order ({4 * LAG_ORDER})"
            )
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.log_lag < 1:
            raise ValueError("log_lag must be >= 1")
        if not self.metric_kinds:
            raise ValueError("at least one metric kind is required")
        parents = kpi_parents(dag)
        reachable = descendants(dag, self.root_cause) | {self.root_cause}
        if not reachable & set(parents):
            raise ValueError("root_cause has no directed path to the KPI-affecting entities")


@dataclass
class IncidentDataset:
    metric_panels: list[ModalityPanel]
    raw_logs: list[dict]
    ground_truth: ScenarioSpec
    entity_names: list[str]
    kpi_parents: list[int]
    fault_onset: int
    shock_magnitude: float
    generator_matrices: dict[str, np.ndarray] = field(default_factory=dict)


def topological_order(dag: np.ndarray) -> list[int] | None:
    """Kahn's algorithm; None if the graph has a directed cycle."""
    dag = np.asarray(dag)
    n = dag.shape[0]
    indegree = dag.sum(axis=0).astype(int).copy()
    queue = [i for i in range(n) if indegree[i] == 0]
    order = []
    while queue:
        node = queue.pop(0)
        order.append(node)
        for j in np.flatnonzero(dag[node]):
            indegree[j] -= 1
            if indegree[j] == 0:
                queue.append(int(j))
    return order if len(order) == n else None


def descendants(dag: np.ndarray, node: int) -> set[int]:
    seen: set[int] = set()
    stack = list(np.flatnonzero(dag[node]))
    while stack:
        cur = int(stack.pop())
        if cur not in seen:
            seen.add(cur)
            stack.extend(int(j) for j in np.flatnonzero(dag[cur]))
    return seen


def hop_distances(dag: np.ndarray, source: int) -> dict[int, int]:
    """BFS hop distance from source along DAG edges (source included at 0)."""
    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for node in frontier:
            for j in np.flatnonzero(dag[node]):
                j = int(j)
                if j not in dist:
                    dist[j] = dist[node] + 1
                    nxt.append(j)
        frontier = nxt
    return dist


def kpi_parents(dag: np.ndarray) -> list[int]:
    """Sink entities (no outgoing edges) feed the KPI node."""
    dag = np.asarray(dag)
    return [int(i) for i in range(dag.shape[0]) if dag[i].sum() == 0]


def entity_name(index: int) -> str:
    return f"svc-{index}"


# --- log message templates ---------------------------------------------------

def _normal_message(rng: np.random.Generator, entity: int) -> str:
    choice = rng.integers(0, 5)
    if choice == 0:
        return f"GET /api/svc-{entity}/items took {rng.integers(1, 500)} ms"
    if choice == 1:
        return f"heartbeat ok from svc-{entity} seq {rng.integers(0, 100000)}"
    if choice == 2:
        return f"connection pool for svc-{entity} at {rng.integers(1, 50)} of {rng.integers(50, 100)}"
    if choice == 3:
        return f"request 0x{rng.integers(0, 2**32):08x} completed with status ok in {rng.integers(1, 500)} ms"
    return f"cache refresh on svc-{entity} finished in {rng.integers(1, 200)} ms entries {rng.integers(0, 5000)}"


def _fault_message(rng: np.random.Generator, entity: int) -> str:
    choice = rng.integers(0, 3)
    if choice == 0:
        return f"ERROR request to svc-{entity} failed with timeout after {rng.integers(1000, 9000)} ms"
    if choice == 1:
        return f"CRITICAL worker {rng.integers(0, 64)} terminated unexpectedly: out of memory"
    return f"WARN retries exhausted calling svc-{entity}: service unavailable"

GOLDEN_BURST_KEYWORDS = ("error", "timeout", "out of memory", "service unavailable")


# --- generation --------------------------------------------------------------

def _generator_matrix(
    rng: np.random.Generator, dag: np.ndarray, parents: list[int], with_kpi: bool
) -> np.ndarray:
    """Linear map M with x_t = M x_{t-1}: M[effect, cause] carries the edge weight."""
    n = dag.shape[0]
    size = n + 1 if with_kpi else n
    m = np.zeros((size, size))
    np.fill_diagonal(m, SELF_DECAY)
    lo, hi = EDGE_WEIGHT_RANGE
    for i in range(n):
        for j in np.flatnonzero(dag[i]):
            m[int(j), i] = rng.uniform(lo, hi)
    if with_kpi:
        for p in parents:
            m[n, p] = rng.uniform(lo, hi)
    return m


def generate_incident(spec: ScenarioSpec) -> IncidentDataset:
    """Simulate one incident: correlated metric panels plus a raw log stream.

    Deterministic for a fixed spec (all randomness flows from spec.seed).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, t_len = spec.n_entities, spec.horizon_T
    dag = spec.ground_truth_dag
    parents = kpi_parents(dag)
    onset = int(FAULT_ONSET_FRACTION * t_len)
    shock = max(SHOCK_NOISE_MULTIPLIER * spec.noise_std, SHOCK_FLOOR)
    names = [entity_name(i) for i in range(n)]

    metric_fault = spec.fault_type in ("metric_only", "both")
    log_fault = spec.fault_type in ("log_only", "both")

    panels = []
    matrices: dict[str, np.ndarray] = {}
    kpi_row = None
    for kind_index, kind in enumerate(spec.metric_kinds):
        with_kpi = kind_index == 0
        m = _generator_matrix(rng, dag, parents, with_kpi)
        matrices[kind] = m
        size = m.shape[0]
        x = np.zeros((size, t_len))
        x[:, 0] = rng.standard_normal(size)
        noise = spec.noise_std * rng.standard_normal((size, t_len))
        for t in range(1, t_len):
            x[:, t] = m @ x[:, t - 1] + noise[:, t]
            # the shock is exogenous: it enters the faulted kind's root-cause
            # equation from the onset on and propagates through m afterwards
            if metric_fault and kind_index == 0 and t >= onset:
                x[spec.root_cause, t] += shock
        if with_kpi:
            if spec.fault_type == "log_only":
                # metrics stay clean but the symptom must still appear: the KPI
                # degrades after the fault has propagated to its feeding sinks
                delay = _kpi_delay(dag, spec.root_cause, parents)
                for t in range(min(onset + delay, t_len), t_len):
                    x[n, t] += shock
            kpi_row = x[n]
            values = x
        else:
            values = np.vstack([x, kpi_row])
        panels.append(ModalityPanel(values, names, "kpi"))

    raw_logs = _generate_logs(rng, spec, onset, log_fault)
    return IncidentDataset(
        metric_panels=panels,
        raw_logs=raw_logs,
        ground_truth=spec,
        entity_names=names,
        kpi_parents=parents,
        fault_onset=onset,
        shock_magnitude=shock,
        generator_matrices=matrices,
    )


def _kpi_delay(dag: np.ndarray, root: int, parents: list[int]) -> int:
    dist = hop_distances(dag, root)
    return min(dist[p] for p in parents if p in dist) + 1


def _generate_logs(
    rng: np.random.Generator, spec: ScenarioSpec, onset: int, log_fault: bool
) -> list[dict]:
    records = []
    for t in range(spec.horizon_T):
        for entity in range(spec.n_entities):
            for _ in range(rng.poisson(NORMAL_LOG_RATE)):
                records.append({"ts": t, "entity": entity, "msg": _normal_message(rng, entity)})
    if log_fault:
        lo, hi = BURST_RANGE
        burst_root = int(rng.integers(lo, hi + 1))
        dist = hop_distances(spec.ground_truth_dag, spec.root_cause)
        for entity, hops in sorted(dist.items()):
            count = int(round(burst_root * BURST_HOP_DECAY**hops))
            if count < 1:
                continue
            start = onset + hops * spec.log_lag
            for _ in range(count):
                ts = int(start + rng.integers(0, BURST_SPREAD))
                if ts >= spec.horizon_T:
                    continue
                records.append({"ts": ts, "entity": entity, "msg": _fault_message(rng, entity)})
    records.sort(key=lambda r: (r["ts"], r["entity"]))
    return records


def sample_scenario(
    n_entities: int,
    fault_type: str,
    horizon_T: int,
    noise_std: float,
    seed: int,
    edge_prob: float = 0.35,
    metric_kinds: tuple[str, ...] = ("cpu",),
    log_lag: int = 1,
) -> ScenarioSpec:
    """Draw a random DAG (upper-triangular under a random order) and plant a root cause.

    The root cause is chosen among entities with at least one outgoing edge
    when any exist, so the fault has somewhere to propagate.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_entities)
    dag = np.zeros((n_entities, n_entities), dtype=int)
    for a in range(n_entities):
        for b in range(a + 1, n_entities):
            if rng.random() < edge_prob:
                dag[order[a], order[b]] = 1
    candidates = [i for i in range(n_entities) if dag[i].sum() > 0]
    if not candidates:
        candidates = list(range(n_entities))
    root = int(candidates[rng.integers(0, len(candidates))])
    return ScenarioSpec(
        n_entities=n_entities,
        ground_truth_dag=dag,
        root_cause=root,
        fault_type=fault_type,
        horizon_T=horizon_T,
        noise_std=noise_std,
        seed=seed,
        metric_kinds=metric_kinds,
        log_lag=log_lag,
    )


# --- persistence --------------------------------------------------------------

def write_incident(dataset: IncidentDataset, directory) -> dict:
    """Write metrics.csv, logs.jsonl and ground_truth.json; returns the paths."""
    import os

    os.makedirs(directory, exist_ok=True)
    paths = {
        "metrics": os.path.join(directory, "metrics.csv"),
        "logs": os.path.join(directory, "logs.jsonl"),
        "ground_truth": os.path.join(directory, "ground_truth.json"),
    }
    spec = dataset.ground_truth
    with open(paths["metrics"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "entity", "metric_name", "value"])
        for t in range(spec.horizon_T):
            for kind, panel in zip(spec.metric_kinds, dataset.metric_panels):
                for i, name in enumerate(dataset.entity_names):
                    writer.writerow([t, name, kind, repr(float(panel.values[i, t]))])
            kpi_value = dataset.metric_panels[0].values[-1, t]
            writer.writerow([t, "kpi", "kpi", repr(float(kpi_value))])
    with open(paths["logs"], "w") as fh:
        for record in dataset.raw_logs:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    with open(paths["ground_truth"], "w") as fh:
        fh.write(ground_truth_to_json(dataset))
    return paths


def ground_truth_to_json(dataset: IncidentDataset) -> str:
    spec = dataset.ground_truth
    payload = {
        "n_entities": spec.n_entities,
        "entity_names": dataset.entity_names,
        "ground_truth_dag": spec.ground_truth_dag.tolist(),
        "root_cause": spec.root_cause,
        "root_cause_name": dataset.entity_names[spec.root_cause],
        "fault_type": spec.fault_type,
        "horizon_T": spec.horizon_T,
        "noise_std": spec.noise_std,
        "seed": spec.seed,
        "metric_kinds": list(spec.metric_kinds),
        "log_lag": spec.log_lag,
        "kpi_parents": dataset.kpi_parents,
        "fault_onset": dataset.fault_onset,
        "shock_magnitude": dataset.shock_magnitude,
        "generator_matrices": {
            kind: m.tolist() for kind, m in dataset.generator_matrices.items()
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def read_ground_truth(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def spec_from_ground_truth(payload: dict) -> ScenarioSpec:
    return ScenarioSpec(
        n_entities=payload["n_entities"],
        ground_truth_dag=np.asarray(payload["ground_truth_dag"], dtype=int),
        root_cause=payload["root_cause"],
        fault_type=payload["fault_type"],
        horizon_T=payload["horizon_T"],
        noise_std=payload["noise_std"],
        seed=payload["seed"],
        metric_kinds=tuple(payload["metric_kinds"]),
        log_lag=payload.get("log_lag", 1),
    )
