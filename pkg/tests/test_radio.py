"""Link model and power assignment tests.

The LP closed form is cross-checked against the generic simplex route;
hand values below were computed from the link-budget definitions with
mpmath-precision arithmetic.
"""

import math

import numpy as np
import pytest

from iotopo.errors import Infeasible, NonPositivePower, ZeroDistance
from iotopo.radio import (
    OFF,
    RadioParams,
    assign_power_lp,
    dbm_to_mw,
    is_detectable,
    link_snr,
    mw_to_dbm,
    required_power_mw,
    transmission_range_km,
)

PARAMS = RadioParams()


def test_dbm_mw_definitions():
    assert dbm_to_mw(0.0) == 1.0
    assert abs(dbm_to_mw(-50.0) - 1e-5) < 1e-17
    # 10^2.7 evaluated at high precision
    assert abs(dbm_to_mw(27.0) - 501.187233627) < 1e-3


def test_dbm_mw_round_trip():
    for x in (-120.0, -63.0, 0.0, 27.0, 41.5):
        assert abs(mw_to_dbm(dbm_to_mw(x)) - x) < 1e-12 * max(1.0, abs(x))
    for m in (1e-9, 1.0, 501.187):
        assert abs(dbm_to_mw(mw_to_dbm(m)) / m - 1.0) < 1e-12


def test_mw_to_dbm_rejects_nonpositive():
    with pytest.raises(NonPositivePower):
        mw_to_dbm(0.0)
    with pytest.raises(NonPositivePower):
        mw_to_dbm(-3.0)


def test_link_snr_unit_distance_collapses_to_db_subtraction():
    # d = 1 km kills the pathloss term: SNR = p_dbm - noise_dbm
    assert abs(link_snr(1.0, 27.0, 1.0, PARAMS) - 77.0) < 1e-9


def test_link_snr_half_km():
    # linear: 501.187... * 16 / 1e-5
    lin = dbm_to_mw(27.0) * 0.5 ** (-4.0) / 1e-5
    assert abs(lin - 8.019e8) < 1e6
    got = link_snr(0.5, 27.0, 1.0, PARAMS)
    assert abs(got - 10.0 * math.log10(lin)) < 1e-12
    assert abs(got - 89.04) < 5e-3


def test_dead_channel():
    assert link_snr(1.0, 27.0, 0.0, PARAMS) == OFF
    assert not is_detectable(1.0, 27.0, 0.0, PARAMS)


def test_zero_distance_rejected():
    with pytest.raises(ZeroDistance):
        link_snr(0.0, 27.0, 1.0, PARAMS)


def test_transmission_range_matches_hand_solution():
    # SNR bound: (p_max / (beta_lin * noise))^(1/nu)
    want = (dbm_to_mw(27.0) / (10**0.25 * 1e-5)) ** 0.25
    assert abs(transmission_range_km(PARAMS) - want) < 1e-9
    # and just inside / outside the range flips detectability at the cap
    r = transmission_range_km(PARAMS)
    assert is_detectable(r * 0.999, 27.0, 1.0, PARAMS)
    assert not is_detectable(r * 1.001, 27.0, 1.0, PARAMS)


def test_single_edge_closed_form():
    # requirement at d = 0.5: max(beta_lin*noise*d^nu, floor*d^nu)
    pa = assign_power_lp([(0, 1, 0.5)], 2, PARAMS)
    want_mw = max(10**0.25 * 1e-5 * 0.0625, dbm_to_mw(-63.0) * 0.0625)
    assert abs(want_mw - 1.111e-6) < 1e-9
    for u in (0, 1):
        assert abs(dbm_to_mw(pa.p_dbm[u]) - want_mw) < 1e-15
        assert abs(pa.p_dbm[u] - (-59.5412)) < 1e-3


def test_infeasible_edge_reported():
    with pytest.raises(Infeasible) as exc:
        assign_power_lp([(0, 1, 100.0)], 2, PARAMS)
    assert (exc.value.i, exc.value.j) == (0, 1)
    # requirement 1.778e3 mW exceeds the 501.2 mW cap
    assert exc.value.required_dbm > PARAMS.p_tmax_dbm


def test_isolated_node_off():
    pa = assign_power_lp([(0, 1, 0.5)], 3, PARAMS)
    assert pa.p_dbm[2] == OFF
    assert pa.total_mw() == pytest.approx(2 * 1.1114e-6, rel=1e-3)


def test_assignment_makes_required_edges_detectable():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = rng.integers(3, 12)
        edges = []
        for i in range(n - 1):
            edges.append((i, i + 1, float(rng.uniform(0.05, 2.0))))
        pa = assign_power_lp(edges, n, PARAMS)
        for i, j, d in edges:
            assert is_detectable(d, pa.p_dbm[i], 1.0, PARAMS)
            assert is_detectable(d, pa.p_dbm[j], 1.0, PARAMS)


def test_monotone_in_required_set():
    base = [(0, 1, 0.4), (1, 2, 0.7)]
    pa0 = assign_power_lp(base, 4, PARAMS)
    pa1 = assign_power_lp(base + [(1, 3, 1.3)], 4, PARAMS)
    assert np.all(pa1.p_dbm >= pa0.p_dbm - 1e-12)


def _random_instance(rng, n):
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.4:
                edges.append((i, j, float(rng.uniform(0.05, 3.0))))
    if not edges:
        edges.append((0, 1, 0.5))
    return edges


def test_closed_form_matches_simplex():
    rng = np.random.default_rng(17)
    for _ in range(100):
        n = int(rng.integers(2, 21))
        edges = _random_instance(rng, n)
        a = assign_power_lp(edges, n, PARAMS)
        b = assign_power_lp(edges, n, PARAMS, method="simplex")
        for u in range(n):
            if a.p_dbm[u] == OFF:
                assert b.p_dbm[u] == OFF
                continue
            va, vb = dbm_to_mw(a.p_dbm[u]), dbm_to_mw(b.p_dbm[u])
            assert abs(va - vb) <= 1e-9 * max(va, vb)


def test_required_power_uses_gain_for_snr_only():
    # halving the gain doubles the SNR-driven requirement but leaves the
    # received-power floor untouched
    d = 1.5
    lo = required_power_mw(d, 1.0, PARAMS)
    hi = required_power_mw(d, 0.5, PARAMS)
    assert hi == pytest.approx(2 * lo)
    floor = dbm_to_mw(PARAMS.p_rmin_dbm) * d**PARAMS.nu
    assert required_power_mw(d, 1e9, PARAMS) == pytest.approx(floor)


def test_gain_model_symmetric_and_seeded():
    p = RadioParams(gain_sigma_db=6.0, gain_seed=42)
    assert p.gain(3, 9) == p.gain(9, 3)
    assert p.gain(3, 9) == RadioParams(gain_sigma_db=6.0, gain_seed=42).gain(3, 9)
    assert p.gain(3, 9) != p.gain(3, 10)
    assert RadioParams().gain(3, 9) == 1.0
