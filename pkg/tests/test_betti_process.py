"""Betti-curve and component-census tests, including the decomposition
identities between the two pipelines."""
import math

import numpy as np
import pytest

from cechbetti.betti_process import (
    BettiCurve,
    betti_curve,
    census,
    census_grid,
    census_to_csv,
    restrict_lmp,
)
from cechbetti.pointproc import PointCloud, UniformCube, sample_poisson_process, stream

SQRT3 = math.sqrt(3)


def _cloud(n=60, seed=3, scale=1.0):
    return sample_poisson_process(UniformCube(d=2), n, seed, scale=scale)


def test_curve_census_identity_random():
    cloud = _cloud()
    curve = betti_curve(cloud, k=1, t_max=0.4)
    for t in (0.05, 0.15, 0.25, 0.35, 0.4):
        cen = census(cloud, 1, t)
        assert cen.betti == curve.value(t)
        # 3-point components cannot carry more than one 1-cycle, so the
        # census never reports (i=3, j>1) and beta = S + R exactly
        assert all(j == 1 for (i, j) in cen.counts if i == 3)
        assert cen.betti == cen.smallest_cycle_count + cen.remainder
        assert cen.betti == cen.truncated_betti(math.inf)


def test_census_grid_matches_pointwise():
    cloud = _cloud(seed=8)
    grid = np.array([0.1, 0.2, 0.3])
    multi = census_grid(cloud, 1, grid)
    for cen, t in zip(multi, grid):
        single = census(cloud, 1, float(t))
        assert cen.counts == single.counts
        assert cen.trivial_components == single.trivial_components


def test_truncated_betti_monotone():
    cloud = _cloud(seed=5)
    cen = census(cloud, 1, 0.3)
    vals = [cen.truncated_betti(m) for m in (3, 4, 6, 10, math.inf)]
    assert vals == sorted(vals)
    assert vals[-1] == cen.betti
    with pytest.raises(ValueError):
        cen.truncated_betti(2)


def test_curve_scale_mapping():
    # scale 0.5: geometric radius = 0.5 * t, so the triangle loop at
    # geometric diameter [1, 2/sqrt(3)) lives at t in [2, 4/sqrt(3))
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3 / 2]])
    cloud = PointCloud(points=tri, d=2, n=3, scale=0.5)
    curve = betti_curve(cloud, k=1, t_max=5.0)
    assert curve.value(2.0) == 1
    assert curve.value(4 / SQRT3) == 0
    assert curve.value(1.9) == 0


def test_lifetime_sum_is_curve_integral():
    cloud = _cloud(seed=11)
    curve = betti_curve(cloud, k=1, t_max=0.4)
    t = 0.37
    jumps = [float(x) for x in curve.jump_locations if x <= t]
    knots = [0.0] + jumps + [t]
    integral = sum(
        curve.value(a) * (b - a) for a, b in zip(knots, knots[1:])
    )
    assert curve.lifetime_sum(t) == pytest.approx(integral, abs=1e-10)


def test_lmp_restriction_partitions():
    cloud = _cloud(n=80, seed=13)
    t = 0.25
    left = restrict_lmp(cloud, 1, t, np.array([[0.0, 0.0], [0.5, 1.0]]))
    right = restrict_lmp(cloud, 1, t, np.array([[0.5 + 1e-12, 0.0], [1.0, 1.0]]))
    total = census(cloud, 1, t)
    assert left.betti + right.betti == total.betti


def test_empty_cloud_curves():
    cloud = PointCloud(points=np.empty((0, 2)), d=2, n=1, scale=1.0)
    curve = betti_curve(cloud, k=1, t_max=1.0)
    assert curve.value(0.5) == 0
    cen = census(cloud, 1, 0.5)
    assert cen.betti == 0 and cen.counts == {}


def test_curve_csv(tmp_path):
    cloud = _cloud(seed=19)
    curve = betti_curve(cloud, k=1, t_max=0.4)
    path = tmp_path / "curve.csv"
    curve.to_csv(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[1] == "t,beta"
    body = [ln.split(",") for ln in lines[2:]]
    for tstr, bstr in body:
        assert curve.value(float(tstr)) == int(bstr)


def test_census_csv(tmp_path):
    cloud = _cloud(seed=23)
    cens = census_grid(cloud, 1, np.array([0.2, 0.3]))
    path = tmp_path / "census.csv"
    census_to_csv(cens, str(path), meta="k=1")
    lines = path.read_text().strip().splitlines()
    assert lines[1] == "t,i,j,count"
    total = {}
    for ln in lines[2:]:
        t, i, j, c = ln.split(",")
        total[float(t)] = total.get(float(t), 0) + int(j) * int(c)
    for cen in cens:
        if cen.counts:
            assert total[cen.t] == cen.betti


def test_out_of_range_raises():
    cloud = _cloud(seed=29)
    curve = betti_curve(cloud, k=1, t_max=0.2)
    with pytest.raises(ValueError):
        curve.value(0.25)
