"""Link SNR model, dB conversions, and minimum-power assignment.

Unit convention: distances enter the link budget in kilometers.  With
meters, the default parameter set (27 dBm cap, -63 dBm sensitivity,
pathloss exponent 4) cannot close a 1 km link at all, which contradicts
the regimes the deployment generators target; km-normalized distance
keeps those scenarios feasible.  This is deliberate and documented in
the README.

The received SNR of link i->j is

    snr_linear = h_ij * p_mw(i) * d_km^(-nu) / noise_mw

and a link is detectable when the SNR clears the threshold beta AND the
received power clears the receiver sensitivity floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import Infeasible, NonPositivePower, ZeroDistance

OFF = float("-inf")  # dBm sentinel for a node that never transmits


def dbm_to_mw(x_dbm: float) -> float:
    """Decibel-milliwatts to milliwatts; -inf maps to 0."""
    return 10.0 ** (x_dbm / 10.0)


def mw_to_dbm(x_mw: float) -> float:
    """Milliwatts to decibel-milliwatts; rejects non-positive power."""
    if x_mw <= 0:
        raise NonPositivePower(f"cannot express {x_mw} mW in dBm")
    return 10.0 * math.log10(x_mw)


@dataclass(frozen=True)
class RadioParams:
    """Channel and device parameters.

    Defaults match the simulation setup the experiments target:
    pathloss exponent 4, noise -50 dBm, SNR threshold 2.5 dB, transmit
    cap 27 dBm, receiver sensitivity -63 dBm.  gain_sigma_db = 0 means a
    unit (deterministic) channel gain; a positive sigma switches on
    symmetric log-normal shadowing seeded by gain_seed.
    """

    nu: float = 4.0
    noise_dbm: float = -50.0
    beta_db: float = 2.5
    p_tmax_dbm: float = 27.0
    p_rmin_dbm: float = -63.0
    bandwidth_hz: float = 125e3
    gain_sigma_db: float = 0.0
    gain_seed: int = 0

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("pathloss exponent must be positive")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.p_tmax_dbm <= self.p_rmin_dbm:
            raise ValueError("transmit cap must exceed receiver sensitivity")

    @property
    def noise_mw(self) -> float:
        return dbm_to_mw(self.noise_dbm)

    @property
    def beta_linear(self) -> float:
        return 10.0 ** (self.beta_db / 10.0)

    def gain(self, i: int, j: int) -> float:
        """Symmetric per-pair channel gain h_ij (linear)."""
        if self.gain_sigma_db <= 0:
            return 1.0
        a, b = (i, j) if i < j else (j, i)
        seq = np.random.SeedSequence(entropy=self.gain_seed, spawn_key=(a, b))
        z = np.random.default_rng(seq).standard_normal()
        return 10.0 ** (self.gain_sigma_db * z / 10.0)

    def replace(self, **kw) -> "RadioParams":
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(kw)
        return RadioParams(**data)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @staticmethod
    def from_json(obj: dict) -> "RadioParams":
        return RadioParams(**obj)


@dataclass(frozen=True)
class PowerAssignment:
    """Per-node transmit power in dBm; OFF (-inf) marks a silent node."""

    p_dbm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_dbm", np.asarray(self.p_dbm, dtype=float))

    def total_mw(self) -> float:
        finite = self.p_dbm[np.isfinite(self.p_dbm)]
        return float(np.sum(10.0 ** (finite / 10.0)))

    def to_json(self) -> list:
        return [None if not np.isfinite(p) else float(p) for p in self.p_dbm]


def link_snr(d_km: float, p_t_dbm: float, h: float, params: RadioParams) -> float:
    """SNR in dB of a link at distance d_km driven at p_t_dbm."""
    if d_km <= 0:
        raise ZeroDistance(f"distance must be positive, got {d_km}")
    lin = h * dbm_to_mw(p_t_dbm) * d_km ** (-params.nu) / params.noise_mw
    if lin <= 0:
        return OFF
    return 10.0 * math.log10(lin)


def received_dbm(d_km: float, p_t_dbm: float, h: float, params: RadioParams) -> float:
    lin = h * dbm_to_mw(p_t_dbm) * d_km ** (-params.nu)
    if lin <= 0:
        return OFF
    return 10.0 * math.log10(lin)


DB_TOL = 1e-9  # absorbs dBm <-> mW round-trip rounding at binding constraints


def is_detectable(d_km: float, p_t_dbm: float, h: float, params: RadioParams) -> bool:
    """SNR clears beta and received power clears the sensitivity floor.

    A link driven at exactly its minimum-power solution sits right on
    the constraint; the tolerance keeps the float round trip through
    dBm from flipping such edges.
    """
    return (
        link_snr(d_km, p_t_dbm, h, params) >= params.beta_db - DB_TOL
        and received_dbm(d_km, p_t_dbm, h, params) >= params.p_rmin_dbm - DB_TOL
    )


def transmission_range_km(params: RadioParams) -> float:
    """Largest distance detectable at the transmit cap with unit gain."""
    p_mw = dbm_to_mw(params.p_tmax_dbm)
    by_snr = (p_mw / (params.beta_linear * params.noise_mw)) ** (1.0 / params.nu)
    by_floor = (p_mw / dbm_to_mw(params.p_rmin_dbm)) ** (1.0 / params.nu)
    return min(by_snr, by_floor)


def required_power_mw(d_km: float, h: float, params: RadioParams) -> float:
    """Minimum transmit power (mW) serving one link of length d_km.

    Two constraints: the SNR threshold (gain-aware) and the received
    power floor (written without gain, mirroring the power-assignment
    program; the asymmetry with the detectability predicate is noted in
    the README).
    """
    if d_km <= 0:
        raise ZeroDistance(f"distance must be positive, got {d_km}")
    dn = d_km**params.nu
    by_snr = params.beta_linear * params.noise_mw * dn / h
    by_floor = dbm_to_mw(params.p_rmin_dbm) * dn
    return max(by_snr, by_floor)


def assign_power_lp(edges, n: int, params: RadioParams, method: str = "closed_form") -> PowerAssignment:
    """Minimum total transmit power serving every required edge.

    edges: iterable of (i, j, d_km) or (i, j, d_km, h) undirected
    required links; each constrains both endpoints.  The program is
    separable by node, so the default path evaluates the per-node closed
    form; method="simplex" solves the same program with a generic dense
    LP for cross-validation.

    Raises Infeasible naming the first offending edge whose requirement
    exceeds the transmit cap.
    """
    cap_mw = dbm_to_mw(params.p_tmax_dbm)
    req = [0.0] * n
    has_edge = [False] * n
    norm_edges = []
    for e in edges:
        if len(e) == 3:
            i, j, d = e
            h = params.gain(i, j)
        else:
            i, j, d, h = e
        p = required_power_mw(d, h, params)
        if p > cap_mw * (1 + 1e-12):
            raise Infeasible(i, j, mw_to_dbm(p), params.p_tmax_dbm)
        norm_edges.append((i, j, d, h, p))
        for u in (i, j):
            has_edge[u] = True
            if p > req[u]:
                req[u] = p

    if method == "simplex":
        req = _solve_simplex(norm_edges, n, has_edge, cap_mw, params)

    p_dbm = np.full(n, OFF)
    for u in range(n):
        if has_edge[u]:
            p_dbm[u] = mw_to_dbm(req[u])
    return PowerAssignment(p_dbm=p_dbm)


def _solve_simplex(norm_edges, n, has_edge, cap_mw, params):
    """Generic LP route built from the raw per-edge constraint rows.

    Variables are scaled so the solver works near unit magnitude; the
    constraint matrix is assembled straight from the edge list (one SNR
    row per direction plus one floor row per endpoint), independent of
    the closed-form reduction.
    """
    active = [u for u in range(n) if has_edge[u]]
    if not active:
        return [0.0] * n
    col = {u: k for k, u in enumerate(active)}
    m = len(active)
    floor_mw = dbm_to_mw(params.p_rmin_dbm)
    rows, rhs = [], []

    def ge_row(u, value):
        r = np.zeros(m)
        r[col[u]] = -1.0
        rows.append(r)
        rhs.append(-value)

    scale = 0.0
    for i, j, d, h, _ in norm_edges:
        dn = d**params.nu
        scale = max(scale, params.beta_linear * params.noise_mw * dn / h, floor_mw * dn)
    for i, j, d, h, _ in norm_edges:
        dn = d**params.nu
        for u in (i, j):
            ge_row(u, params.beta_linear * params.noise_mw * dn / h / scale)
            ge_row(u, floor_mw * dn / scale)
    res = linprog(
        c=np.ones(m),
        A_ub=np.array(rows),
        b_ub=np.array(rhs),
        bounds=[(0.0, cap_mw / scale)] * m,
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"LP solver failed: {res.message}")
    req = [0.0] * n
    for u in active:
        req[u] = float(res.x[col[u]]) * scale
    return req
