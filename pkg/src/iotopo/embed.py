"""Per-patch 2-D embedding: distance completion, classical MDS, and
iterative majorization refinement.

Completion estimates each missing pairwise distance as the midpoint of
a lower and an upper bound derived from measured edges.  The upper
bound is the cheapest two-hop detour through a common neighbor (or the
measured shortest path when no common neighbor exists).  The default
lower bound is the larger of the two endpoints' longest incident
measured edges, clamped to the upper bound; a triangle-inequality
variant (max |d_ik - d_jk| over common neighbors) is available via
lower_bound="triangle".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import DegenerateConfiguration, DisconnectedPatch
from .rigidity import Patch

COINCIDENT_KM = 1e-9  # distances below this are treated as zero


@dataclass(frozen=True)
class CompletedDistances:
    """Full symmetric distance matrix with a mask of estimated entries."""

    size: int
    d: np.ndarray
    completed_mask: np.ndarray  # True where the entry was estimated


@dataclass(frozen=True)
class MdsDecomposition:
    """Double-centered Gram matrix, its eigenpairs, and 2-D coordinates."""

    gram: np.ndarray
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # columns follow eigenvalues
    coords: np.ndarray        # (n, 2)
    rank_used: int = 2


def complete_distances(patch: Patch, lower_bound: str = "as_printed") -> CompletedDistances:
    """Fill in unmeasured pairwise distances for one patch."""
    if lower_bound not in ("as_printed", "triangle"):
        raise ValueError(f"unknown lower_bound mode {lower_bound!r}")
    k = patch.size()
    if k < 3:
        raise ValueError("patches must have at least 3 members")
    idx = patch.member_index()
    d = np.zeros((k, k))
    measured = np.zeros((k, k), dtype=bool)
    for u, v, dist in patch.local_edges:
        a, b = idx[u], idx[v]
        d[a, b] = d[b, a] = dist
        measured[a, b] = measured[b, a] = True

    nbrs: List[dict] = [dict() for _ in range(k)]
    for u, v, dist in patch.local_edges:
        a, b = idx[u], idx[v]
        nbrs[a][b] = dist
        nbrs[b][a] = dist

    missing = [
        (a, b)
        for a in range(k)
        for b in range(a + 1, k)
        if not measured[a, b]
    ]
    sp = None
    if missing:
        rows, cols, vals = [], [], []
        for u, v, dist in patch.local_edges:
            a, b = idx[u], idx[v]
            rows += [a, b]
            cols += [b, a]
            vals += [dist, dist]
        graph = csr_matrix((vals, (rows, cols)), shape=(k, k))
        sp = shortest_path(graph, method="D", directed=False)

    for a, b in missing:
        common = nbrs[a].keys() & nbrs[b].keys()
        if common:
            upper = min(nbrs[a][c] + nbrs[b][c] for c in common)
        else:
            upper = float(sp[a, b])
            if not np.isfinite(upper):
                raise DisconnectedPatch(
                    f"no measured path between members {patch.members[a]} "
                    f"and {patch.members[b]}"
                )
        if lower_bound == "as_printed":
            lo_a = max(nbrs[a].values()) if nbrs[a] else 0.0
            lo_b = max(nbrs[b].values()) if nbrs[b] else 0.0
            lower = max(lo_a, lo_b)
        else:
            lower = max((abs(nbrs[a][c] - nbrs[b][c]) for c in common), default=0.0)
        lower = min(lower, upper)  # keep the midpoint inside the bracket
        d[a, b] = d[b, a] = 0.5 * (lower + upper)

    mask = ~measured
    np.fill_diagonal(mask, False)
    return CompletedDistances(size=k, d=d, completed_mask=mask)


def classical_mds(cd: CompletedDistances) -> MdsDecomposition:
    """Coordinates from double centering and eigendecomposition.

    Negative trailing eigenvalues (noisy or non-Euclidean inputs) are
    clamped to zero before the square root.
    """
    n = cd.size
    sq = cd.d**2
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * centering @ sq @ centering
    gram = 0.5 * (gram + gram.T)
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    top = evals[: min(2, n)]
    if np.all(top <= COINCIDENT_KM**2):
        raise DegenerateConfiguration("all points coincide")
    lam = np.maximum(evals[:2], 0.0) if n >= 2 else np.array([max(evals[0], 0.0), 0.0])
    coords = np.zeros((n, 2))
    for c in range(min(2, n)):
        coords[:, c] = evecs[:, c] * np.sqrt(lam[c])
    return MdsDecomposition(
        gram=gram, eigenvalues=evals, eigenvectors=evecs, coords=coords
    )


def _edge_arrays(patch: Patch):
    idx = patch.member_index()
    ei = np.array([idx[u] for u, _, _ in patch.local_edges], dtype=int)
    ej = np.array([idx[v] for _, v, _ in patch.local_edges], dtype=int)
    dij = np.array([d for _, _, d in patch.local_edges])
    deg = np.zeros(patch.size())
    np.add.at(deg, ei, 1.0)
    np.add.at(deg, ej, 1.0)
    return ei, ej, dij, deg


def stress(coords: np.ndarray, patch: Patch) -> float:
    """Raw squared misfit of embedded vs measured distances."""
    ei, ej, dij, _ = _edge_arrays(patch)
    lengths = np.linalg.norm(coords[ei] - coords[ej], axis=1)
    return float(np.sum((lengths - dij) ** 2))


def refine_majorization(
    coords: np.ndarray,
    patch: Patch,
    max_iters: int = 200,
    tol: float = 1e-9,
    stress_floor: float = 0.0,
) -> Tuple[np.ndarray, List[float]]:
    """Barycentric majorization sweeps over measured edges.

    Every sweep rebuilds each point from its measured neighbors using
    the previous sweep's coordinates (Jacobi order, deterministic).
    Stops on relative stress change below tol, on stress at or below
    stress_floor, on the iteration cap, or on a monotonicity violation
    (the previous sweep's coordinates are then returned, so the result
    never has higher stress than the input).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    ei, ej, dij, deg = _edge_arrays(patch)
    p = np.array(coords, dtype=float)
    if p.shape[0] != patch.size():
        raise ValueError("coords length must match patch members")
    safe_deg = np.where(deg > 0, deg, 1.0)
    frozen = deg == 0

    def lengths_of(q):
        diff = q[ei] - q[ej]
        return diff, np.sqrt(np.einsum("ij,ij->i", diff, diff))

    diff, lengths = lengths_of(p)
    history = [float(np.sum((lengths - dij) ** 2))]
    for _ in range(max_iters):
        inv = np.where(lengths > COINCIDENT_KM, 1.0 / np.maximum(lengths, COINCIDENT_KM), 0.0)
        pull = diff * (dij * inv)[:, None]
        acc = np.zeros_like(p)
        np.add.at(acc, ei, p[ej] + pull)
        np.add.at(acc, ej, p[ei] - pull)
        q = acc / safe_deg[:, None]
        if frozen.any():
            q[frozen] = p[frozen]
        q_diff, q_lengths = lengths_of(q)
        s_new = float(np.sum((q_lengths - dij) ** 2))
        s_prev = history[-1]
        if s_new > s_prev * (1 + 1e-12) + 1e-300:
            break  # majorization stalled; keep the better iterate
        p, diff, lengths = q, q_diff, q_lengths
        history.append(s_new)
        if s_new <= stress_floor:
            break
        rel = abs(s_prev - s_new) / max(s_prev, 1e-300)
        if rel < tol:
            break
    return p, history


FOLD_REL_STRESS = 1e-12   # above this (relative) the embedding is considered folded
KICK_TRIAGE_SWEEPS = 200  # majorization budget when triaging restart basins


def _polish_coords(coords: np.ndarray, patch: Patch) -> Tuple[np.ndarray, float]:
    """Gauss-Newton finish of the distance misfit from a given basin.

    Majorization converges linearly and can crawl on ill-conditioned
    patches; a least-squares polish from its iterate reaches the basin
    floor at quadratic rate.  The caller only keeps the result when the
    stress actually drops.
    """
    from scipy.optimize import least_squares

    ei, ej, dij, _ = _edge_arrays(patch)
    k = patch.size()

    def residuals(x):
        p = x.reshape(k, 2)
        return np.linalg.norm(p[ei] - p[ej], axis=1) - dij

    def jac(x):
        p = x.reshape(k, 2)
        diff = p[ei] - p[ej]
        lengths = np.linalg.norm(diff, axis=1)
        unit = np.where(
            lengths[:, None] > COINCIDENT_KM, diff / np.maximum(lengths, COINCIDENT_KM)[:, None], 0.0
        )
        out = np.zeros((len(ei), 2 * k))
        rows = np.arange(len(ei))
        out[rows, 2 * ei] = unit[:, 0]
        out[rows, 2 * ei + 1] = unit[:, 1]
        out[rows, 2 * ej] = -unit[:, 0]
        out[rows, 2 * ej + 1] = -unit[:, 1]
        return out

    sol = least_squares(
        residuals, coords.ravel(), jac=jac, method="trf",
        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200,
    )
    refined = sol.x.reshape(k, 2)
    return refined, float(np.sum(residuals(sol.x) ** 2))


def embed_patch(
    patch: Patch,
    lower_bound: str = "as_printed",
    max_iters: int = 200,
    tol: float = 1e-9,
    stress_floor: float = 0.0,
    restarts: int = 6,
    fold_stress: float = 0.0,
    polish: bool = True,
) -> Tuple[np.ndarray, dict]:
    """Completion + MDS + refinement for one patch.

    Each refinement pass is majorization followed (by default) by a
    Gauss-Newton polish, kept only when it lowers the stress.
    Majorization only finds stationary points, and an MDS start on
    completed (approximate) distances occasionally lands in a folded
    basin; when the settled stress stays above the fold threshold
    (FOLD_REL_STRESS relative to the squared edge lengths, or the
    caller-supplied noise floor fold_stress, whichever is larger), the
    procedure retries from the MDS start plus seeded Gaussian kicks of
    growing size and keeps the lowest-stress basin.  Kick seeds derive
    from the patch id and attempt number, so the whole procedure is
    deterministic.

    Returns the local coordinates (rows follow patch.members) and a
    diagnostics dict with the stress trajectory of the winning run.
    """
    cd = complete_distances(patch, lower_bound=lower_bound)
    mds = classical_mds(cd)
    scale_sq = sum(d * d for _, _, d in patch.local_edges)
    threshold = max(FOLD_REL_STRESS * scale_sq, fold_stress)

    def settle(init, sweeps):
        c, hist = refine_majorization(
            init, patch, max_iters=sweeps, tol=tol, stress_floor=stress_floor
        )
        if polish and hist[-1] > stress_floor:
            cand, s = _polish_coords(c, patch)
            if s < hist[-1]:
                c = cand
                hist = hist + [s]
        return c, hist

    coords, history = settle(mds.coords, max_iters)
    attempts = 1
    if history[-1] > threshold and restarts > 0:
        mean_len = np.mean([d for _, _, d in patch.local_edges])
        for attempt in range(1, restarts + 1):
            rng = np.random.default_rng(1_000_003 * (patch.patch_id + 1) + attempt)
            kick = rng.normal(scale=(0.15 + 0.2 * attempt) * mean_len, size=mds.coords.shape)
            cand, hist = settle(mds.coords + kick, min(KICK_TRIAGE_SWEEPS, max_iters))
            attempts += 1
            if hist[-1] < history[-1]:
                coords, history = cand, hist
            if history[-1] <= threshold:
                break
    diag = {
        "patch_id": patch.patch_id,
        "members": len(patch.members),
        "completed_pairs": int(cd.completed_mask.sum() // 2),
        "stress_history": history,
        "final_stress": history[-1],
        "sweeps": len(history) - 1,
        "attempts": attempts,
    }
    return coords, diag
