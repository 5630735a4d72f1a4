"""Rigidity tests cross-checked against exhaustive oracles.

Oracles here are deliberately independent of the pebble game: matroid
rank by greedy extension with the subset-count condition checked over
every vertex subset, vertex connectivity by max-flow on a split graph,
and redundant rigidity by deleting each edge and re-testing cold.
"""

import itertools

import numpy as np
import pytest

from iotopo.errors import UnlocalizableGraph
from iotopo.rigidity import (
    decompose,
    is_globally_rigid,
    is_redundantly_rigid,
    is_rigid,
    is_three_connected,
    rigidity_rank,
)
from iotopo.scenario import MeasurementGraph, generate_rectangle, measure


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def _sparse_ok(n, edges):
    """Subset-count independence: every |S| >= 2 spans <= 2|S| - 3 edges."""
    for k in range(2, n + 1):
        for sub in itertools.combinations(range(n), k):
            s = set(sub)
            count = sum(1 for u, v in edges if u in s and v in s)
            if count > 2 * k - 3:
                return False
    return True


def laman_rank(n, edges):
    """Greedy matroid rank using the exhaustive subset condition."""
    chosen = []
    for e in edges:
        if _sparse_ok(n, chosen + [e]):
            chosen.append(e)
    return len(chosen)


def rigid_by_laman(n, edges):
    if n <= 1:
        return True
    return laman_rank(n, edges) == 2 * n - 3


def _max_flow(n, arcs, s, t):
    """Edmonds-Karp on an integer-capacity arc dict."""
    cap = {}
    adj = {v: set() for v in range(n)}
    for (a, b), c in arcs.items():
        cap[(a, b)] = cap.get((a, b), 0) + c
        cap.setdefault((b, a), 0)
        adj[a].add(b)
        adj[b].add(a)
    flow = 0
    while True:
        parent = {s: None}
        queue = [s]
        while queue and t not in parent:
            u = queue.pop(0)
            for v in adj[u]:
                if v not in parent and cap.get((u, v), 0) > 0:
                    parent[v] = u
                    queue.append(v)
        if t not in parent:
            return flow
        v = t
        while parent[v] is not None:
            u = parent[v]
            cap[(u, v)] -= 1
            cap[(v, u)] += 1
            v = u
        flow += 1


def vertex_connectivity_at_least(n, edges, k):
    """Menger via max-flow on the split graph (in/out per vertex)."""
    if n <= k:
        return False
    adj = {v: set() for v in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    big = n * n
    for s in range(n):
        for t in range(s + 1, n):
            if t in adj[s]:
                continue
            arcs = {}
            for v in range(n):
                arcs[(2 * v, 2 * v + 1)] = big if v in (s, t) else 1
            for u, v in edges:
                arcs[(2 * u + 1, 2 * v)] = big
                arcs[(2 * v + 1, 2 * u)] = big
            if _max_flow(2 * n, arcs, 2 * s, 2 * t + 1) < k:
                return False
    return True


def globally_rigid_oracle(n, edges):
    if n <= 3:
        return len(set(map(lambda e: tuple(sorted(e)), edges))) == n * (n - 1) // 2
    if not rigid_by_laman(n, edges):
        return False
    for k in range(len(edges)):
        rest = edges[:k] + edges[k + 1 :]
        if not rigid_by_laman(n, rest):
            return False
    return vertex_connectivity_at_least(n, edges, 3)


def _random_graph(rng, n, p):
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((i, j))
    return edges


# ---------------------------------------------------------------------------
# is_rigid
# ---------------------------------------------------------------------------

def test_triangle_rigid():
    assert is_rigid(range(3), [(0, 1), (1, 2), (0, 2)])


def test_four_cycle_flexes():
    assert not is_rigid(range(4), [(0, 1), (1, 2), (2, 3), (3, 0)])


def test_small_cases():
    assert is_rigid([0], [])
    assert is_rigid(range(2), [(0, 1)])
    assert not is_rigid(range(2), [])
    assert not is_rigid(range(3), [(0, 1), (1, 2)])


def test_pebble_game_matches_laman_oracle():
    rng = np.random.default_rng(123)
    disagreements = 0
    for trial in range(250):
        n = int(rng.integers(2, 7))
        edges = _random_graph(rng, n, float(rng.uniform(0.2, 0.9)))
        if is_rigid(range(n), edges) != rigid_by_laman(n, edges):
            disagreements += 1
    assert disagreements == 0


def test_rank_matches_laman_rank():
    rng = np.random.default_rng(7)
    for _ in range(60):
        n = int(rng.integers(2, 7))
        edges = _random_graph(rng, n, 0.6)
        assert rigidity_rank(range(n), edges) == laman_rank(n, edges)


# ---------------------------------------------------------------------------
# global rigidity
# ---------------------------------------------------------------------------

def _complete(n):
    return list(itertools.combinations(range(n), 2))


def test_k4_globally_rigid():
    assert is_globally_rigid(range(4), _complete(4))


def test_k4_minus_edge_not_globally_rigid():
    edges = _complete(4)[:-1]
    assert not is_globally_rigid(range(4), edges)


def test_wheel_w5():
    # hub 0 plus 4-cycle 1-2-3-4
    edges = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4), (4, 1)]
    assert globally_rigid_oracle(5, edges)
    assert is_globally_rigid(range(5), edges)


def test_small_complete_graphs_globally_rigid():
    assert is_globally_rigid([0], [])
    assert is_globally_rigid(range(2), [(0, 1)])
    assert is_globally_rigid(range(3), _complete(3))
    assert not is_globally_rigid(range(3), [(0, 1), (1, 2)])
    assert not is_globally_rigid(range(2), [])


def test_global_rigidity_matches_oracle_randomized():
    rng = np.random.default_rng(321)
    checked = 0
    for _ in range(120):
        n = int(rng.integers(4, 8))
        edges = _random_graph(rng, n, float(rng.uniform(0.4, 0.95)))
        assert is_globally_rigid(range(n), edges) == globally_rigid_oracle(n, edges)
        checked += 1
    assert checked == 120


def test_redundant_rigidity_matches_per_edge_deletion():
    rng = np.random.default_rng(99)
    for _ in range(120):
        n = int(rng.integers(3, 9))
        edges = _random_graph(rng, n, float(rng.uniform(0.4, 0.9)))
        want = is_rigid(range(n), edges) and len(edges) > 0 and all(
            is_rigid(range(n), edges[:k] + edges[k + 1 :]) for k in range(len(edges))
        )
        assert is_redundantly_rigid(range(n), edges) == want


def test_three_connectivity_matches_flow_oracle():
    rng = np.random.default_rng(55)
    for _ in range(80):
        n = int(rng.integers(4, 9))
        edges = _random_graph(rng, n, float(rng.uniform(0.3, 0.9)))
        assert is_three_connected(range(n), edges) == vertex_connectivity_at_least(n, edges, 3)


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------

def _mg_from_edges(n, edges):
    return MeasurementGraph(
        node_count=n,
        edges=tuple((min(u, v), max(u, v), 1.0) for u, v in edges),
        sensing_range=2.0,
        noise_factor=0.0,
    )


def test_decompose_k5_single_patch():
    mg = _mg_from_edges(5, _complete(5))
    ps = decompose(mg)
    assert len(ps.patches) == 1
    assert ps.patches[0].members == (0, 1, 2, 3, 4)
    assert ps.unlocalized == ()


def test_decompose_path_unlocalizable():
    mg = _mg_from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    with pytest.raises(UnlocalizableGraph):
        decompose(mg)


def test_decompose_two_k4_blocks_sharing_three():
    # K4 on {0,1,2,3} union K4 on {1,2,3,4}: the rim nodes' neighborhoods
    # are the K4s; the shared nodes see everything (K5 minus edge (0,4),
    # itself globally rigid), so three distinct member sets survive dedup
    edges = set(itertools.combinations([0, 1, 2, 3], 2)) | set(
        itertools.combinations([1, 2, 3, 4], 2)
    )
    ps = decompose(_mg_from_edges(5, sorted(edges)))
    members = {p.members for p in ps.patches}
    assert (0, 1, 2, 3) in members
    assert (1, 2, 3, 4) in members
    assert (0, 1, 2, 3, 4) in members
    k4a = next(p.patch_id for p in ps.patches if p.members == (0, 1, 2, 3))
    k4b = next(p.patch_id for p in ps.patches if p.members == (1, 2, 3, 4))
    pair = (min(k4a, k4b), max(k4a, k4b))
    match = [a for a in ps.adjacency if (a[0], a[1]) == pair]
    assert match and match[0][2] == 3  # the two blocks overlap in {1,2,3}


def test_decompose_shrinks_nonrigid_neighborhoods():
    # K4 with a pendant path: pendant neighborhoods collapse below 3 and
    # drop; the K4 neighborhoods survive
    edges = _complete(4) + [(3, 4), (4, 5)]
    ps = decompose(_mg_from_edges(6, edges))
    assert all(set(p.members) <= {0, 1, 2, 3} for p in ps.patches)
    assert 5 in ps.unlocalized and 4 in ps.unlocalized


def test_decompose_deterministic_and_patches_globally_rigid():
    dep = generate_rectangle(40, 2.0, 2.0, seed=4)
    mg = measure(dep, 0.7, 0.0, 0)
    ps1 = decompose(mg)
    ps2 = decompose(mg)
    assert [p.members for p in ps1.patches] == [p.members for p in ps2.patches]
    assert ps1.adjacency == ps2.adjacency
    for p in ps1.patches:
        assert len(p.members) >= 3
        assert is_globally_rigid(p.members, [(u, v) for u, v, _ in p.local_edges])
    # every degree >= 2 node is covered on this dense instance
    for v in range(40):
        if mg.degree(v) >= 2:
            assert v in ps1.node_to_patches


def test_patchset_json():
    mg = _mg_from_edges(5, _complete(5))
    obj = decompose(mg).to_json()
    assert obj["patches"][0]["members"] == [0, 1, 2, 3, 4]
    assert obj["unlocalized"] == []
