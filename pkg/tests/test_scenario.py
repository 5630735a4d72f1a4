"""Deployment generators and distance measurement."""

import json
import math

import numpy as np
import pytest

from iotopo.errors import InvalidCount, InvalidRegion
from iotopo.scenario import (
    Deployment,
    MeasurementGraph,
    generate_annulus,
    generate_rectangle,
    measure,
)


def test_annulus_radii_and_gateway():
    dep = generate_annulus(50, 0.2, 1.0, seed=7)
    assert dep.node_count == 50
    assert np.allclose(dep.positions[0], [0.0, 0.0])  # gateway at center
    radii = np.linalg.norm(dep.positions[1:], axis=1)
    assert np.all(radii >= 0.2 - 1e-12)
    assert np.all(radii <= 1.0 + 1e-12)


def test_annulus_single_node_is_gateway_only():
    dep = generate_annulus(1, 0.2, 1.0, seed=0)
    assert dep.positions.shape == (1, 2)
    assert np.allclose(dep.positions, 0.0)


def test_generators_deterministic():
    a = generate_annulus(50, 0.2, 1.0, seed=7)
    b = generate_annulus(50, 0.2, 1.0, seed=7)
    assert np.array_equal(a.positions, b.positions)
    c = generate_rectangle(80, 4.0, 4.0, seed=3)
    d = generate_rectangle(80, 4.0, 4.0, seed=3)
    assert np.array_equal(c.positions, d.positions)
    assert not np.array_equal(
        generate_annulus(50, 0.2, 1.0, seed=8).positions, a.positions
    )


def test_annulus_area_uniformity():
    # radius^2 of an area-uniform draw is uniform on [r0^2, R^2]
    dep = generate_annulus(20001, 0.2, 1.0, seed=11)
    r2 = np.sum(dep.positions[1:] ** 2, axis=1)
    u = (r2 - 0.04) / (1.0 - 0.04)
    assert abs(u.mean() - 0.5) < 3 * (1 / math.sqrt(12 * 20000))


def test_rectangle_bounds():
    dep = generate_rectangle(80, 4.0, 4.0, seed=3)
    assert dep.positions.shape == (80, 2)
    assert np.all(dep.positions >= 0.0)
    assert np.all(dep.positions <= 4.0)
    two = generate_rectangle(2, 1.0, 1.0, seed=1)
    assert np.all((two.positions >= 0) & (two.positions <= 1))


def test_region_validation():
    with pytest.raises(InvalidRegion):
        generate_annulus(5, 1.0, 1.0, seed=0)
    with pytest.raises(InvalidRegion):
        generate_annulus(5, 2.0, 1.0, seed=0)
    with pytest.raises(InvalidCount):
        generate_annulus(0, 0.2, 1.0, seed=0)
    with pytest.raises(InvalidRegion):
        generate_rectangle(5, 0.0, 1.0, seed=0)
    with pytest.raises(InvalidCount):
        generate_rectangle(0, 1.0, 1.0, seed=0)


def _collinear(xs_km):
    pos = np.array([[x, 0.0] for x in xs_km])
    return Deployment(
        node_count=len(xs_km), positions=pos,
        region={"shape": "rectangle", "width_km": 10.0, "height_km": 1.0},
        seed=0,
    )


def test_measure_threshold_semantics():
    dep = _collinear([0.0, 1.0, 3.0])
    mg = measure(dep, 1.5, 0.0, 0)
    # (0,1) at 1.0 km in range; (1,2) at 2.0 km and (0,2) at 3.0 km out
    assert mg.edges == ((0, 1, 1.0),)


def test_measure_complete_graph_exact():
    dep = generate_rectangle(30, 2.0, 2.0, seed=9)
    mg = measure(dep, 1e9, 0.0, 0)
    assert len(mg.edges) == 30 * 29 // 2
    for i, j, d in mg.edges:
        assert i < j  # one record per unordered pair
        true = np.linalg.norm(dep.positions[i] - dep.positions[j])
        assert d == pytest.approx(true, rel=1e-14)  # zero noise: machine precision


def test_measure_deterministic_with_noise():
    dep = generate_rectangle(20, 2.0, 2.0, seed=1)
    a = measure(dep, 1.0, 0.05, seed=11)
    b = measure(dep, 1.0, 0.05, seed=11)
    assert a.edges == b.edges
    c = measure(dep, 1.0, 0.05, seed=12)
    assert a.edges != c.edges


def test_noise_law_monte_carlo():
    # |d/true - 1| = |eta * g|, whose mean is eta * sqrt(2/pi); check the
    # sample mean over >= 1e4 edges within 3 sigma
    dep = generate_rectangle(150, 2.0, 2.0, seed=2)
    truth = dep.positions
    mg = measure(dep, 1e9, 0.05, seed=11)
    m = len(mg.edges)
    assert m >= 10_000
    rel = []
    for i, j, d in mg.edges:
        rel.append(abs(d / np.linalg.norm(truth[i] - truth[j]) - 1.0))
    rel = np.array(rel)
    want = 0.05 * math.sqrt(2.0 / math.pi)
    sigma_mean = 0.05 * math.sqrt(1.0 - 2.0 / math.pi) / math.sqrt(m)
    assert abs(rel.mean() - want) <= 3.0 * sigma_mean
    assert np.all([d > 0 for _, _, d in mg.edges])


def test_measurement_graph_json_round_trip(tmp_path):
    dep = generate_annulus(10, 0.2, 1.0, seed=5)
    mg = measure(dep, 0.8, 0.0, 0)
    dep2 = Deployment.from_json(json.loads(json.dumps(dep.to_json())))
    assert np.allclose(dep2.positions, dep.positions)
    assert dep2.region == dep.region
    mg2 = MeasurementGraph.from_json(json.loads(json.dumps(mg.to_json())))
    assert mg2.edges == mg.edges
    assert mg2.sensing_range == mg.sensing_range


def test_neighbor_lookup():
    dep = _collinear([0.0, 1.0, 1.9])
    mg = measure(dep, 1.0, 0.0, 0)
    assert set(mg.neighbors(1)) == {0, 2}
    assert mg.degree(0) == 1
    assert mg.distance(1, 2) == pytest.approx(0.9)
    assert mg.distance(0, 2) is None
