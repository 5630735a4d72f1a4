"""Topology extraction: the iterative SNR-driven extractor plus LMST
and brute-force grid-search baselines.

All three algorithms see the same candidate link set: pairs within the
maximum distance detectable at the transmit cap (intersected with the
measurement graph's edges when one is supplied).  The iterative
extractor starts from the minimum-power assignment for each node's
nearest neighbor, admits edges in decreasing SNR order whenever they
merge two patches, and raises powers geometrically toward the cap
until the mean link SNR is within eps of the all-max-power SNR; the
converged operating point is the cap itself, which maximizes both
spatial usage and Shannon throughput under this interference-free
model.  The per-iteration minimum-power solutions stay visible in the
trace.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EmptyNetwork, Infeasible, NotConverged
from .radio import (
    OFF,
    PowerAssignment,
    RadioParams,
    assign_power_lp,
    dbm_to_mw,
    is_detectable,
    link_snr,
    mw_to_dbm,
    required_power_mw,
    transmission_range_km,
)
from .scenario import MeasurementGraph

Source = Union[MeasurementGraph, np.ndarray]


@dataclass(frozen=True)
class Topology:
    """An extracted edge set with per-edge SNR and node powers."""

    n: int
    edges: Tuple[Tuple[int, int, float], ...]  # (i, j, symmetric SNR dB)
    powers: PowerAssignment
    trace: Tuple[dict, ...]
    algorithm: str
    iterations: int
    converged: bool = True

    def to_json(self) -> dict:
        return {
            "kind": "topology",
            "algorithm": self.algorithm,
            "node_count": self.n,
            "edges": [[i, j, float(s)] for i, j, s in self.edges],
            "powers_dbm": self.powers.to_json(),
            "iterations": self.iterations,
            "converged": self.converged,
            "trace": list(self.trace),
        }


@dataclass(frozen=True)
class ThroughputReport:
    total_bps: float
    per_link_bps: float
    n_scheduled: int
    mean_scheduled_snr_db: float


def candidate_links(source: Source, params: RadioParams) -> Tuple[int, List[Tuple[int, int, float, float]]]:
    """Node count and (i, j, d_km, gain) pairs within transmission range."""
    max_d = transmission_range_km(params)
    links = []
    if isinstance(source, MeasurementGraph):
        n = source.node_count
        for i, j, d in source.edges:
            if d <= max_d:
                links.append((i, j, d, params.gain(i, j)))
    else:
        coords = np.asarray(source, dtype=float)
        n = coords.shape[0]
        for i in range(n):
            diffs = coords[i + 1 :] - coords[i]
            dists = np.hypot(diffs[:, 0], diffs[:, 1])
            for off in np.nonzero((dists <= max_d) & (dists > 0))[0]:
                j = i + 1 + int(off)
                links.append((i, j, float(dists[off]), params.gain(i, j)))
    return n, links


def _symmetric_snr_db(d, h, p_i_dbm, p_j_dbm, params) -> float:
    return 0.5 * (
        link_snr(d, p_i_dbm, h, params) + link_snr(d, p_j_dbm, h, params)
    )


def _detectable_edges(links, p_dbm, params):
    out = []
    for i, j, d, h in links:
        if is_detectable(d, p_dbm[i], h, params) and is_detectable(d, p_dbm[j], h, params):
            out.append((i, j, d, h))
    return out


def _mean_directed_snr_db(edges, p_dbm, params) -> float:
    if not edges:
        return 0.0
    acc = 0.0
    for i, j, d, h in edges:
        acc += link_snr(d, p_dbm[i], h, params)
        acc += link_snr(d, p_dbm[j], h, params)
    return acc / (2 * len(edges))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def max_nt_top(
    source: Source,
    params: RadioParams,
    eps: float = 0.1,
    max_iters: int = 50,
    initial_patches: Optional[Sequence[Sequence[int]]] = None,
    power_step_fraction: float = 0.7,
) -> Topology:
    """Iterative SNR-sorted patch-merging topology extraction.

    Per iteration: (1) power assignment -- the minimum-power solution
    for the currently required edges on the first pass, then a
    geometric step closing power_step_fraction of each node's dB gap to
    the cap (never below the minimum-power floor); (2) candidate edges
    sorted by decreasing SNR at current powers, each admitted into the
    required set when it merges two patches; (3) the convergence gap
    delta = |mean SNR at cap - mean SNR at current powers| over the
    currently detectable edge set.  On delta <= eps the assignment is
    finalized at the cap (the loop's fixed point).  Edges whose
    requirement exceeds the cap are pruned and logged, not fatal.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n, links = candidate_links(source, params)
    links = list(links)
    cap = params.p_tmax_dbm

    # nearest candidate neighbor per node seeds the required set
    nearest: Dict[int, Tuple[float, int, int]] = {}
    for i, j, d, h in links:
        for u, v in ((i, j), (j, i)):
            cur = nearest.get(u)
            if cur is None or (d, min(u, v), max(u, v)) < cur:
                nearest[u] = (d, min(u, v), max(u, v))
    required = {(a, b) for _, a, b in nearest.values()}
    link_map = {(i, j): (d, h) for i, j, d, h in links}

    uf = _UnionFind(n)
    if initial_patches:
        for group in initial_patches:
            group = list(group)
            for v in group[1:]:
                uf.union(group[0], v)

    has_link = np.zeros(n, dtype=bool)
    for i, j, _, _ in links:
        has_link[i] = has_link[j] = True

    p_dbm = np.full(n, OFF)
    trace: List[dict] = []
    pruned_total: List[Tuple[int, int]] = []

    for t in range(1, max_iters + 1):
        # power assignment for the required set, with infeasible pruning
        while True:
            try:
                req_edges = [
                    (a, b, link_map[(a, b)][0], link_map[(a, b)][1])
                    for a, b in sorted(required)
                ]
                lp = assign_power_lp(req_edges, n, params)
                break
            except Infeasible as exc:
                key = (min(exc.i, exc.j), max(exc.i, exc.j))
                required.discard(key)
                links = [e for e in links if (e[0], e[1]) != key]
                link_map.pop(key, None)
                pruned_total.append(key)
        if t == 1:
            p_dbm = lp.p_dbm.copy()
        else:
            stepped = np.where(
                np.isfinite(p_dbm),
                p_dbm + power_step_fraction * (cap - p_dbm),
                p_dbm,
            )
            p_dbm = np.maximum(stepped, lp.p_dbm)

        # admit edges in decreasing-SNR order when they merge patches
        order = sorted(
            links,
            key=lambda e: (-_symmetric_snr_db(e[2], e[3], p_dbm[e[0]], p_dbm[e[1]], params), e[0], e[1]),
        )
        merges = 0
        for i, j, d, h in order:
            if uf.union(i, j):
                required.add((i, j))
                merges += 1

        current = _detectable_edges(links, p_dbm, params)
        mean_now = _mean_directed_snr_db(current, p_dbm, params)
        p_max_vec = np.where(has_link, cap, OFF)
        mean_max = _mean_directed_snr_db(current, p_max_vec, params)
        delta = abs(mean_max - mean_now)
        trace.append(
            {
                "iteration": t,
                "delta_db": delta,
                "mean_snr_assigned_db": mean_now,
                "mean_snr_max_db": mean_max,
                "n_required": len(required),
                "n_detectable": len(current),
                "n_merges": merges,
                "min_power_dbm": [None if not np.isfinite(p) else round(float(p), 6) for p in lp.p_dbm],
                "pruned": [list(e) for e in pruned_total],
            }
        )
        if delta <= eps:
            # converged: operate at the loop's fixed point, the cap
            p_final = np.where(has_link, cap, OFF)
            final = _detectable_edges(links, p_final, params)
            edges = tuple(
                (i, j, _symmetric_snr_db(d, h, p_final[i], p_final[j], params))
                for i, j, d, h in final
            )
            return Topology(
                n=n,
                edges=edges,
                powers=PowerAssignment(p_dbm=p_final),
                trace=tuple(trace),
                algorithm="maxnttop",
                iterations=t,
            )
    raise NotConverged(trace)


def lmst(source: Source, params: RadioParams) -> Topology:
    """Local-minimum-spanning-tree topology control baseline.

    Every node builds the minimum spanning forest of its one-hop
    neighborhood (distance weights, ties by the smaller index pair) and
    keeps the edges it is itself an endpoint of; the final edge set is
    the union over nodes, powered by the minimum-power assignment.
    """
    n, links = candidate_links(source, params)
    link_map = {(i, j): (d, h) for i, j, d, h in links}
    nbrs: Dict[int, set] = {v: set() for v in range(n)}
    for i, j, _, _ in links:
        nbrs[i].add(j)
        nbrs[j].add(i)

    kept: set = set()
    for u in range(n):
        local = sorted(nbrs[u] | {u})
        if len(local) < 2:
            continue
        local_set = set(local)
        local_edges = sorted(
            (
                (d, a, b)
                for (a, b), (d, _) in link_map.items()
                if a in local_set and b in local_set
            ),
        )
        uf = _UnionFind(n)
        for d, a, b in local_edges:
            if uf.union(a, b):
                if a == u or b == u:
                    kept.add((a, b))

    kept_edges = [(a, b, *link_map[(a, b)]) for a, b in sorted(kept)]
    powers = _assign_with_pruning(kept_edges, n, params)
    final = _detectable_edges(kept_edges, powers.p_dbm, params)
    edges = tuple(
        (i, j, _symmetric_snr_db(d, h, powers.p_dbm[i], powers.p_dbm[j], params))
        for i, j, d, h in final
    )
    return Topology(
        n=n, edges=edges, powers=powers, trace=(), algorithm="lmst", iterations=1
    )


def _assign_with_pruning(edges, n, params) -> PowerAssignment:
    edges = list(edges)
    while True:
        try:
            return assign_power_lp(edges, n, params)
        except Infeasible as exc:
            edges = [e for e in edges if (e[0], e[1]) != (min(exc.i, exc.j), max(exc.i, exc.j))]


def brute_force(source: Source, params: RadioParams, step_db: float = 1.0) -> Topology:
    """Grid search for the least power reaching each node's farthest
    neighbor; the topology is every candidate edge detectable both ways
    at the chosen powers.

    The grid starts at the power that puts the farthest neighbor right
    at the receiver floor and steps up by step_db, with the cap itself
    as the final level.  A node whose farthest neighbor stays out of
    reach even at the cap keeps the cap and the unreachable edges drop
    out (logged in the trace).
    """
    if step_db <= 0:
        raise ValueError("step_db must be positive")
    n, links = candidate_links(source, params)
    per_node: Dict[int, List[Tuple[float, float, int]]] = {v: [] for v in range(n)}
    for i, j, d, h in links:
        per_node[i].append((d, h, j))
        per_node[j].append((d, h, i))

    p_dbm = np.full(n, OFF)
    infeasible_nodes = []
    for u in range(n):
        if not per_node[u]:
            continue
        d_far, h_far, _ = max(per_node[u], key=lambda e: (e[0], -e[2]))
        floor_dbm = mw_to_dbm(dbm_to_mw(params.p_rmin_dbm) * d_far**params.nu)
        chosen = None
        level = floor_dbm
        while level < params.p_tmax_dbm:
            if is_detectable(d_far, level, h_far, params):
                chosen = level
                break
            level += step_db
        if chosen is None:
            if is_detectable(d_far, params.p_tmax_dbm, h_far, params):
                chosen = params.p_tmax_dbm
            else:
                infeasible_nodes.append(u)
                chosen = params.p_tmax_dbm
        p_dbm[u] = chosen

    powers = PowerAssignment(p_dbm=p_dbm)
    final = _detectable_edges(links, p_dbm, params)
    edges = tuple(
        (i, j, _symmetric_snr_db(d, h, p_dbm[i], p_dbm[j], params))
        for i, j, d, h in final
    )
    trace = (
        {"iteration": 1, "infeasible_nodes": infeasible_nodes},
    ) if infeasible_nodes else ()
    return Topology(
        n=n, edges=edges, powers=powers, trace=trace,
        algorithm="bruteforce", iterations=1,
    )


def avg_node_degree(t: Topology) -> float:
    """Mean number of concurrent edges per node."""
    if t.n == 0:
        raise EmptyNetwork("topology has no nodes")
    return 2.0 * len(t.edges) / t.n


def network_throughput(t: Topology, params: RadioParams) -> ThroughputReport:
    """Greedy maximum-weight matching throughput under non-link-sharing.

    Each scheduled link carries its Shannon rate B*log2(1 + SNR); no
    node participates in two concurrent links.  Ties in rate break
    toward the smaller index pair.
    """
    rates = []
    for i, j, snr_db in t.edges:
        rate = params.bandwidth_hz * math.log2(1.0 + 10.0 ** (snr_db / 10.0))
        rates.append((rate, i, j, snr_db))
    rates.sort(key=lambda e: (-e[0], e[1], e[2]))
    used = set()
    total = 0.0
    snr_acc = 0.0
    scheduled = 0
    for rate, i, j, snr_db in rates:
        if i in used or j in used:
            continue
        used.add(i)
        used.add(j)
        total += rate
        snr_acc += snr_db
        scheduled += 1
    return ThroughputReport(
        total_bps=total,
        per_link_bps=total / scheduled if scheduled else 0.0,
        n_scheduled=scheduled,
        mean_scheduled_snr_db=snr_acc / scheduled if scheduled else 0.0,
    )


def extract(algorithm: str, source: Source, params: RadioParams, **kw) -> Topology:
    """Dispatch by algorithm tag: maxnttop, lmst, or bruteforce."""
    if algorithm == "maxnttop":
        return max_nt_top(source, params, **kw)
    if algorithm == "lmst":
        return lmst(source, params)
    if algorithm == "bruteforce":
        return brute_force(source, params, **kw)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def save_topology(t: Topology, path) -> None:
    with open(path, "w") as fh:
        json.dump(t.to_json(), fh, indent=1)
        fh.write("\n")
