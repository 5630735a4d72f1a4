"""Generic 2-D rigidity tests and globally rigid patch decomposition.

Rigidity is decided combinatorially with the (2,3) pebble game; generic
global rigidity uses the standard planar characterization: 3-connected
and redundantly rigid.  Redundant rigidity reuses a single pebble-game
run: an independent edge survives deletion iff it lies in the
fundamental circuit of some rejected edge, and the failed pebble search
exposes that circuit's vertex support.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import UnlocalizableGraph
from .scenario import MeasurementGraph


# ---------------------------------------------------------------------------
# (2,3) pebble game
# ---------------------------------------------------------------------------

class _PebbleGame:
    """Incremental (2,3) pebble game over n vertices (local indices)."""

    def __init__(self, n: int):
        self.n = n
        self.pebbles = [2] * n
        self.out: List[set] = [set() for _ in range(n)]
        self.accepted: List[Tuple[int, int]] = []
        self.reject_reaches: List[set] = []

    def _find_pebble(self, root: int, forbidden: Tuple[int, int]) -> Optional[set]:
        """Move one pebble to root via path reversal.

        Returns None on success, or the set of visited vertices when no
        pebble is reachable (used for circuit extraction).
        """
        parent = {root: None}
        stack = [root]
        while stack:
            a = stack.pop()
            for b in self.out[a]:
                if b in parent:
                    continue
                parent[b] = a
                if self.pebbles[b] > 0 and b not in forbidden:
                    self.pebbles[b] -= 1
                    self.pebbles[root] += 1
                    # reverse the root -> b path
                    node = b
                    while parent[node] is not None:
                        prev = parent[node]
                        self.out[prev].discard(node)
                        self.out[node].add(prev)
                        node = prev
                    return None
                stack.append(b)
        return set(parent)

    def try_insert(self, u: int, v: int) -> bool:
        """Insert edge (u, v); False means the edge is dependent."""
        if u == v:
            return False
        while self.pebbles[u] + self.pebbles[v] < 4:
            visited_u = self._find_pebble(u, (u, v))
            if visited_u is None:
                continue
            visited_v = self._find_pebble(v, (u, v))
            if visited_v is None:
                continue
            self.reject_reaches.append(visited_u | visited_v)
            return False
        self.pebbles[u] -= 1
        self.out[u].add(v)
        self.accepted.append((u, v))
        return True


def _run_pebble_game(n: int, edges: Sequence[Tuple[int, int]]) -> _PebbleGame:
    game = _PebbleGame(n)
    for u, v in edges:
        game.try_insert(u, v)
    return game


def _as_local(nodes, edges):
    nodes = sorted(set(nodes))
    idx = {v: k for k, v in enumerate(nodes)}
    loc = []
    seen = set()
    for u, v in edges:
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        loc.append((idx[u], idx[v]))
    return len(nodes), loc


def rigidity_rank(nodes, edges) -> int:
    """Size of a maximal independent edge set (generic 2-D)."""
    n, loc = _as_local(nodes, edges)
    return len(_run_pebble_game(n, loc).accepted)


def is_rigid(nodes, edges) -> bool:
    """Generic rigidity in the plane via the (2,3) pebble game.

    Graphs on one vertex (and the empty-edge single node) are rigid;
    otherwise the pebble-game rank must reach 2n - 3.
    """
    n, loc = _as_local(nodes, edges)
    if n <= 1:
        return True
    return len(_run_pebble_game(n, loc).accepted) == 2 * n - 3


def is_redundantly_rigid(nodes, edges) -> bool:
    """Rigid, and still rigid after deleting any single edge."""
    n, loc = _as_local(nodes, edges)
    if n <= 1:
        return True
    game = _run_pebble_game(n, loc)
    if len(game.accepted) != 2 * n - 3:
        return False
    if not game.reject_reaches:
        return False  # minimally rigid: every edge is critical
    uncovered = set(game.accepted)
    for reach in game.reject_reaches:
        for e in list(uncovered):
            if e[0] in reach and e[1] in reach:
                uncovered.discard(e)
        if not uncovered:
            return True
    return not uncovered


def _adjacency(n: int, edges) -> List[set]:
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def _connected_without(adj: List[set], skip: set) -> bool:
    keep = [v for v in range(len(adj)) if v not in skip]
    if not keep:
        return True
    seen = {keep[0]}
    stack = [keep[0]]
    while stack:
        a = stack.pop()
        for b in adj[a]:
            if b not in skip and b not in seen:
                seen.add(b)
                stack.append(b)
    return len(seen) == len(keep)


def _articulation_free(adj: List[set], skip: Optional[int] = None) -> bool:
    """True when the graph minus `skip` is connected with no cut vertex."""
    n = len(adj)
    nodes = [v for v in range(n) if v != skip]
    if len(nodes) <= 2:
        return _connected_without(adj, {skip} if skip is not None else set())
    root = nodes[0]
    num = {}
    low = {}
    counter = 0
    # iterative DFS computing low-links
    stack = [(root, None, iter(sorted(adj[root] - {skip} if skip is not None else adj[root])))]
    num[root] = low[root] = counter
    counter += 1
    root_children = 0
    while stack:
        v, parent, it = stack[-1]
        advanced = False
        for w in it:
            if w == skip:
                continue
            if w not in num:
                num[w] = low[w] = counter
                counter += 1
                if v == root:
                    root_children += 1
                stack.append((w, v, iter(sorted(adj[w] - ({skip} if skip is not None else set())))))
                advanced = True
                break
            elif w != parent:
                low[v] = min(low[v], num[w])
        if not advanced:
            stack.pop()
            if stack:
                pv = stack[-1][0]
                low[pv] = min(low[pv], low[v])
                if pv != root and low[v] >= num[pv]:
                    return False
    if len(num) != len(nodes):
        return False  # disconnected
    return root_children <= 1


def is_three_connected(nodes, edges) -> bool:
    """Vertex connectivity >= 3 (brute articulation scan; n >= 4)."""
    n, loc = _as_local(nodes, edges)
    if n < 4:
        return False
    adj = _adjacency(n, loc)
    if min(len(a) for a in adj) < 3:
        return False
    if not _articulation_free(adj):
        return False
    return all(_articulation_free(adj, skip=u) for u in range(n))


def is_globally_rigid(nodes, edges) -> bool:
    """Generic global rigidity in 2-D.

    Graphs on at most 3 vertices are globally rigid exactly when
    complete; larger graphs must be 3-connected and redundantly rigid.
    """
    n, loc = _as_local(nodes, edges)
    if n <= 3:
        return len(loc) == n * (n - 1) // 2
    return is_three_connected(range(n), loc) and is_redundantly_rigid(range(n), loc)


# ---------------------------------------------------------------------------
# Patch decomposition
# ---------------------------------------------------------------------------

@dataclass
class Patch:
    """A globally rigid subgraph with (eventually) its own 2-D embedding.

    members hold sorted global node indices; local_edges keep global
    endpoint labels; local_coords rows follow the members order.
    """

    patch_id: int
    members: Tuple[int, ...]
    local_edges: Tuple[Tuple[int, int, float], ...]
    local_coords: Optional[np.ndarray] = None

    def member_index(self) -> Dict[int, int]:
        return {v: k for k, v in enumerate(self.members)}

    def size(self) -> int:
        return len(self.members)

    def coords_complex(self) -> np.ndarray:
        c = self.local_coords
        return c[:, 0] + 1j * c[:, 1]


@dataclass
class PatchSet:
    """Patches plus the bookkeeping needed to stitch them back together."""

    patches: List[Patch]
    node_to_patches: Dict[int, List[int]]
    adjacency: List[Tuple[int, int, int]]  # (patch k, patch l, shared count)
    unlocalized: Tuple[int, ...]

    def shared_nodes(self, k: int, l: int) -> List[int]:
        a = set(self.patches[k].members)
        return sorted(a.intersection(self.patches[l].members))

    def to_json(self) -> dict:
        return {
            "kind": "patch_set",
            "patches": [
                {
                    "patch_id": p.patch_id,
                    "members": list(p.members),
                    "n_edges": len(p.local_edges),
                }
                for p in self.patches
            ],
            "adjacency": [list(a) for a in self.adjacency],
            "unlocalized": list(self.unlocalized),
        }


MIN_SHARED_FOR_ALIGNMENT = 3  # patches sharing fewer nodes cannot be aligned


def _induced_edges(mg: MeasurementGraph, members) -> List[Tuple[int, int, float]]:
    mset = set(members)
    out = []
    for i in members:
        for j, d in mg.neighbors(i).items():
            if j > i and j in mset:
                out.append((i, j, d))
    return out


def decompose(mg: MeasurementGraph) -> PatchSet:
    """Split the measurement graph into globally rigid patches.

    Each node's 1-hop neighborhood is taken as a candidate patch; a
    candidate that fails the global rigidity test is shrunk by
    repeatedly deleting its minimum-degree member (ties to the smallest
    index) until it passes or falls below 3 nodes (then it is dropped).
    Identical member sets are emitted once.  Raises UnlocalizableGraph
    when nothing survives.
    """
    patches: List[Patch] = []
    seen: Dict[Tuple[int, ...], int] = {}
    verdict_cache: Dict[Tuple[int, ...], bool] = {}

    for i in range(mg.node_count):
        nbrs = mg.neighbors(i)
        if len(nbrs) < 2:
            continue
        members = sorted([i] + list(nbrs))
        while len(members) >= 3:
            key = tuple(members)
            if key in seen:
                members = None
                break
            edges = _induced_edges(mg, members)
            ok = verdict_cache.get(key)
            if ok is None:
                ok = is_globally_rigid(members, [(u, v) for u, v, _ in edges])
                verdict_cache[key] = ok
            if ok:
                break
            deg = {v: 0 for v in members}
            for u, v, _ in edges:
                deg[u] += 1
                deg[v] += 1
            drop = min(members, key=lambda v: (deg[v], v))
            members = [v for v in members if v != drop]
        if not members or len(members) < 3:
            continue
        key = tuple(members)
        if key in seen:
            continue
        seen[key] = len(patches)
        patches.append(
            Patch(
                patch_id=len(patches),
                members=key,
                local_edges=tuple(_induced_edges(mg, members)),
            )
        )

    if not patches:
        raise UnlocalizableGraph(
            f"no globally rigid patch in a graph of {mg.node_count} nodes"
        )

    node_to_patches: Dict[int, List[int]] = {}
    for p in patches:
        for v in p.members:
            node_to_patches.setdefault(v, []).append(p.patch_id)

    adjacency = []
    for k in range(len(patches)):
        mk = set(patches[k].members)
        for l in range(k + 1, len(patches)):
            shared = len(mk.intersection(patches[l].members))
            if shared >= MIN_SHARED_FOR_ALIGNMENT:
                adjacency.append((k, l, shared))

    unlocalized = tuple(
        v for v in range(mg.node_count) if v not in node_to_patches
    )
    return PatchSet(
        patches=patches,
        node_to_patches=node_to_patches,
        adjacency=adjacency,
        unlocalized=unlocalized,
    )
