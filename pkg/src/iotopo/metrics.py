"""Evaluation metrics: gauge-free localization error and run summaries."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict, List, Sequence

import numpy as np

from .errors import EmptyInput, LengthMismatch


def procrustes_align(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Rigidly align est onto truth (rotation + reflection + translation).

    No scaling: distances carry physical units, and a scale fit would
    mask systematic errors.  Returns the aligned copy of est.
    """
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise LengthMismatch(f"shapes differ: {est.shape} vs {truth.shape}")
    if est.shape[0] < 1:
        raise LengthMismatch("need at least one point")
    ec = est - est.mean(axis=0)
    tc = truth - truth.mean(axis=0)
    m = ec.T @ tc
    u, _, vt = np.linalg.svd(m)
    rot = u @ vt  # orthogonal, reflection allowed
    return ec @ rot + truth.mean(axis=0)


def procrustes_error(est: np.ndarray, truth: np.ndarray) -> float:
    """RMS per-node error after removing the rigid-motion gauge."""
    aligned = procrustes_align(est, truth)
    truth = np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean(np.sum((aligned - truth) ** 2, axis=1))))


@dataclass(frozen=True)
class RunReport:
    """One scenario x algorithm x sweep-point measurement."""

    scenario_id: str
    seed: int
    algorithm: str
    beta_db: float
    avg_node_degree: float
    throughput_total_bps: float
    throughput_per_link_bps: float
    localization_rms_km: float
    iterations: int
    wall_time_ms: float

    def __post_init__(self):
        for name in (
            "avg_node_degree",
            "throughput_total_bps",
            "throughput_per_link_bps",
            "localization_rms_km",
            "wall_time_ms",
        ):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


METRIC_FIELDS = (
    "avg_node_degree",
    "throughput_total_bps",
    "throughput_per_link_bps",
    "localization_rms_km",
    "iterations",
)


def aggregate(reports: Sequence[RunReport]) -> List[Dict]:
    """Mean and sample stddev per (algorithm, beta_db) group.

    Rows are ordered by algorithm name then sweep point; a group of one
    report has stddev 0.
    """
    if not reports:
        raise EmptyInput("no reports to aggregate")
    groups: Dict[tuple, List[RunReport]] = {}
    for r in reports:
        groups.setdefault((r.algorithm, r.beta_db), []).append(r)
    rows = []
    for (algo, beta), members in sorted(groups.items()):
        row = {"algorithm": algo, "beta_db": beta, "n": len(members)}
        for name in METRIC_FIELDS:
            vals = np.array([float(getattr(m, name)) for m in members])
            row[f"mean_{name}"] = float(vals.mean())
            row[f"std_{name}"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        rows.append(row)
    return rows
