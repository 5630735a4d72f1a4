"""Synthetic IoT deployments and noisy pairwise distance measurement.

All lengths are kilometers throughout the package (see radio module for
why the link budget is km-normalized).  Generators are pure functions of
their arguments and seed; values are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidCount, InvalidRegion


@dataclass(frozen=True)
class Deployment:
    """A set of node positions with the region they were drawn from.

    True coordinates are ground truth for evaluation only; solvers never
    see them.
    """

    node_count: int
    positions: np.ndarray  # (n, 2) km
    region: dict
    seed: int

    def to_json(self) -> dict:
        return {
            "kind": "deployment",
            "node_count": self.node_count,
            "region": self.region,
            "seed": self.seed,
            "positions_km": [[float(x), float(y)] for x, y in self.positions],
        }

    @staticmethod
    def from_json(obj: dict) -> "Deployment":
        pos = np.asarray(obj["positions_km"], dtype=float).reshape(-1, 2)
        return Deployment(
            node_count=int(obj["node_count"]),
            positions=pos,
            region=obj["region"],
            seed=int(obj["seed"]),
        )


@dataclass(frozen=True)
class MeasurementGraph:
    """Noisy pairwise distances between nodes within sensing range.

    Each unordered pair is stored once as (i, j, d) with i < j and d > 0.
    """

    node_count: int
    edges: tuple  # of (i, j, d_km)
    sensing_range: float
    noise_factor: float
    _adj: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        adj = {i: {} for i in range(self.node_count)}
        for i, j, d in self.edges:
            adj[i][j] = d
            adj[j][i] = d
        object.__setattr__(self, "_adj", adj)

    def neighbors(self, i: int) -> dict:
        """Map of neighbor index -> measured distance for node i."""
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def distance(self, i: int, j: int) -> Optional[float]:
        return self._adj[i].get(j)

    def to_json(self) -> dict:
        return {
            "kind": "measurement_graph",
            "node_count": self.node_count,
            "sensing_range_km": self.sensing_range,
            "noise_factor": self.noise_factor,
            "edges": [[i, j, float(d)] for i, j, d in self.edges],
        }

    @staticmethod
    def from_json(obj: dict) -> "MeasurementGraph":
        edges = tuple((int(i), int(j), float(d)) for i, j, d in obj["edges"])
        return MeasurementGraph(
            node_count=int(obj["node_count"]),
            edges=edges,
            sensing_range=float(obj["sensing_range_km"]),
            noise_factor=float(obj["noise_factor"]),
        )


def generate_annulus(n: int, inner_km: float, outer_km: float, seed: int) -> Deployment:
    """Gateway at the center, n-1 nodes uniform by area on the annulus.

    Uniformity by area uses the inverse-CDF square-root radius transform.
    Node 0 is the gateway.
    """
    if n < 1:
        raise InvalidCount("need at least one node")
    if inner_km < 0 or inner_km >= outer_km:
        raise InvalidRegion(f"bad annulus radii [{inner_km}, {outer_km}]")
    rng = np.random.default_rng(seed)
    pos = np.zeros((n, 2))
    if n > 1:
        u = rng.uniform(size=n - 1)
        r = np.sqrt(inner_km**2 + u * (outer_km**2 - inner_km**2))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n - 1)
        pos[1:, 0] = r * np.cos(phi)
        pos[1:, 1] = r * np.sin(phi)
    region = {
        "shape": "annulus",
        "center_km": [0.0, 0.0],
        "inner_km": float(inner_km),
        "outer_km": float(outer_km),
    }
    return Deployment(node_count=n, positions=pos, region=region, seed=seed)


def generate_rectangle(n: int, width_km: float, height_km: float, seed: int) -> Deployment:
    """n i.i.d.-uniform nodes in [0, width] x [0, height]; no gateway."""
    if n < 1:
        raise InvalidCount("need at least one node")
    if width_km <= 0 or height_km <= 0:
        raise InvalidRegion(f"bad rectangle {width_km} x {height_km}")
    rng = np.random.default_rng(seed)
    pos = np.column_stack(
        [rng.uniform(0.0, width_km, size=n), rng.uniform(0.0, height_km, size=n)]
    )
    region = {
        "shape": "rectangle",
        "width_km": float(width_km),
        "height_km": float(height_km),
    }
    return Deployment(node_count=n, positions=pos, region=region, seed=seed)


def measure(
    dep: Deployment,
    sensing_range: float,
    noise_factor: float = 0.0,
    seed: int = 0,
) -> MeasurementGraph:
    """Measure pairwise distances for every pair within sensing range.

    The edge (i, j) exists iff the true distance is <= sensing_range.
    Measured d = true * (1 + eta * g) with g standard normal, resampled
    until d > 0.  eta = 0 gives exact Euclidean distances.  Coincident
    pairs (true distance 0) carry no usable measurement and are skipped.
    """
    if sensing_range <= 0:
        raise InvalidRegion("sensing range must be positive")
    if noise_factor < 0:
        raise InvalidRegion("noise factor must be >= 0")
    rng = np.random.default_rng(seed)
    pos = dep.positions
    n = dep.node_count
    edges = []
    for i in range(n):
        diffs = pos[i + 1 :] - pos[i]
        dists = np.hypot(diffs[:, 0], diffs[:, 1])
        for off in np.nonzero((dists <= sensing_range) & (dists > 0))[0]:
            j = i + 1 + int(off)
            d_true = float(dists[off])
            d = d_true
            if noise_factor > 0:
                d = d_true * (1.0 + noise_factor * rng.standard_normal())
                while d <= 0:
                    d = d_true * (1.0 + noise_factor * rng.standard_normal())
            edges.append((i, j, d))
    return MeasurementGraph(
        node_count=n,
        edges=tuple(edges),
        sensing_range=float(sensing_range),
        noise_factor=float(noise_factor),
    )


def save_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_json(), fh, indent=1)
        fh.write("\n")


def load_deployment(path) -> Deployment:
    with open(path) as fh:
        return Deployment.from_json(json.load(fh))


def load_measurement(path) -> MeasurementGraph:
    with open(path) as fh:
        return MeasurementGraph.from_json(json.load(fh))
