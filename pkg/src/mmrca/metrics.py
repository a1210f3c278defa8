"""Ranking metrics for root-cause localization: PR@K, MAP@K, MRR.

A case pairs one ordered prediction list with the set of true root causes.
Predictions shorter than K are treated as padded with misses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class EvaluationCase:
    predicted: list
    truth: set

    def __post_init__(self):
        self.predicted = list(self.predicted)
        self.truth = set(self.truth)
        if not self.truth:
            raise ValueError("truth set must be non-empty")
        if len(set(self.predicted)) != len(self.predicted):
            raise ValueError("predicted list contains duplicates")


def _case_precision_at(case: EvaluationCase, k: int) -> float:
    hits = sum(1 for p in case.predicted[:k] if p in case.truth)
    return hits / min(k, len(case.truth))


def precision_at_k(cases: list[EvaluationCase], k: int) -> float:
    """Mean over cases of (#hits in the first K) / min(K, #true causes)."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if not cases:
        raise ValueError("no evaluation cases given")
    return float(np.mean([_case_precision_at(c, k) for c in cases]))


def map_at_k(cases: list[EvaluationCase], k: int) -> float:
    """Mean over j=1..K of the per-case prefix precision, averaged over cases."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if not cases:
        raise ValueError("no evaluation cases given")
    per_case = [
        np.mean([_case_precision_at(c, j) for j in range(1, k + 1)]) for c in cases
    ]
    return float(np.mean(per_case))


def mrr(cases: list[EvaluationCase]) -> float:
    """Mean reciprocal rank of the first correct prediction; a full miss counts 0."""
    if not cases:
        raise ValueError("no evaluation cases given")
    total = 0.0
    for case in cases:
        for rank, p in enumerate(case.predicted, start=1):
            if p in case.truth:
                total += 1.0 / rank
                break
    return total / len(cases)


def structural_hamming(a: np.ndarray, b: np.ndarray) -> int:
    """Structural Hamming distance between two binary directed adjacency matrices.

    Counts node pairs whose edge configuration differs (missing, extra, or
    reversed edges each contribute 1 per pair).
    """
    a = np.asarray(a).astype(bool)
    b = np.asarray(b).astype(bool)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency matrices must share a square shape")
    n = a.shape[0]
    shd = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (a[i, j], a[j, i]) != (b[i, j], b[j, i]):
                shd += 1
    return shd


def evaluate_cases(cases: list[EvaluationCase], k_values: list[int]) -> dict:
    """Compute PR@K and MAP@K for each K plus MRR over all cases."""
    report = {"n_cases": len(cases), "mrr": mrr(cases)}
    for k in k_values:
        report[f"pr@{k}"] = precision_at_k(cases, k)
        report[f"map@{k}"] = map_at_k(cases, k)
    return report


def case_from_files(ranking_path, truth_path) -> EvaluationCase:
    """Build a case from an exported ranking JSON and a ground-truth JSON sidecar."""
    with open(ranking_path) as fh:
        ranking = json.load(fh)
    with open(truth_path) as fh:
        truth = json.load(fh)
    predicted = [entry["entity"] for entry in ranking["ranking"]]
    root = truth["root_cause_name"]
    return EvaluationCase(predicted=predicted, truth={root})


def format_report(report: dict) -> str:
    """Plain-text table for a metrics report dict."""
    lines = [f"{'metric':<10} value", "-" * 18]
    for key in sorted(report):
        if key == "n_cases":
            continue
        lines.append(f"{key:<10} {report[key]:.4f}")
    lines.append(f"{'cases':<10} {report['n_cases']}")
    return "\n".join(lines) + "\n"
