"""Density and Poisson-sampling tests with quadrature / closed-form oracles."""
import math

import numpy as np
import pytest
from scipy import stats as sstats

from cechbetti.pointproc import (
    GridDensity,
    PointCloud,
    TruncatedGaussian,
    UniformCube,
    c_f_k,
    cloud_from_csv,
    cloud_to_csv,
    density_from_config,
    sample_density,
    sample_poisson_process,
    stream,
    unit_ball_volume,
)


def test_unit_ball_volume_closed_forms():
    assert unit_ball_volume(2) == pytest.approx(math.pi, abs=1e-12)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, abs=1e-12)
    assert unit_ball_volume(4) == pytest.approx(math.pi**2 / 2, abs=1e-12)


def test_c_f_k_uniform_closed_forms():
    assert c_f_k(UniformCube(d=2), 1) == pytest.approx(1 / 6, abs=1e-12)
    assert c_f_k(UniformCube(d=3), 2) == pytest.approx(1 / 24, abs=1e-12)
    with pytest.raises(ValueError):
        c_f_k(UniformCube(d=2), 2)


def test_c_f_k_gaussian_vs_mc_oracle():
    dens = TruncatedGaussian(d=2, scale=1.0)
    rng = stream(100)
    # MC oracle for (1/6) integral f^3 = (1/6) E_f[f^2]
    x = sample_density(dens, 10**6, rng)
    vals = dens.evaluate(x) ** 2
    est = vals.mean() / 6
    se = vals.std(ddof=1) / math.sqrt(len(vals)) / 6
    assert abs(c_f_k(dens, 1) - est) <= 3 * se


def test_density_normalization_quadrature():
    for dens in (UniformCube(d=2), TruncatedGaussian(d=2, scale=0.7),
                 GridDensity(d=2, box=np.array([[0., 0.], [1., 2.]]),
                             values=np.ones((5, 5)))):
        assert dens.integral_power(1) == pytest.approx(1.0, abs=1e-4)


def test_evaluate_bounded_by_sup_norm():
    dens = TruncatedGaussian(d=2, scale=0.5)
    x = stream(3).uniform(-2, 2, size=(5000, 2))
    assert np.all(dens.evaluate(x) <= dens.sup_norm + 1e-12)


def test_sampling_deterministic():
    dens = UniformCube(d=2)
    a = sample_poisson_process(dens, 500, 42)
    b = sample_poisson_process(dens, 500, 42)
    assert np.array_equal(a.points, b.points)


def test_near_zero_intensity_gives_empty_cloud():
    cloud = sample_poisson_process(UniformCube(d=2), 1e-9, 1)
    assert len(cloud) == 0


def test_poisson_counts_mean():
    dens = UniformCube(d=2)
    counts = [len(sample_poisson_process(dens, 1000, s)) for s in range(200)]
    assert abs(np.mean(counts) - 1000) <= 4 * math.sqrt(1000 / 200)


def test_index_of_dispersion():
    dens = UniformCube(d=2)
    counts = np.array([len(sample_poisson_process(dens, 200, s)) for s in range(500)])
    iod = counts.var(ddof=1) / counts.mean()
    assert 0.8 <= iod <= 1.2


def test_gaussian_central_box_mass():
    dens = TruncatedGaussian(d=2, scale=1.0)
    hw = dens.half_width / 2
    box = np.array([[-hw, -hw], [hw, hw]])
    target = dens.integral_power(1, box=box)
    pts = sample_density(dens, 200_000, stream(8))
    frac = np.all(np.abs(pts) <= hw, axis=1).mean()
    assert abs(frac - target) <= 0.02


def test_location_chi_square():
    dens = TruncatedGaussian(d=2, scale=0.8)
    pts = sample_density(dens, 120_000, stream(21))
    bins = 6
    lo, hi = dens.support_box
    edges = [np.linspace(lo[ax], hi[ax], bins + 1) for ax in range(2)]
    obs, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=edges)
    exp = np.empty((bins, bins))
    for a in range(bins):
        for b in range(bins):
            cell = np.array([[edges[0][a], edges[1][b]], [edges[0][a + 1], edges[1][b + 1]]])
            exp[a, b] = dens.integral_power(1, box=cell)
    exp *= len(pts)
    keep = exp.ravel() >= 5
    stat = (((obs.ravel() - exp.ravel()) ** 2 / exp.ravel())[keep]).sum()
    p = sstats.chi2.sf(stat, keep.sum() - 1)
    assert p > 0.001


def test_points_inside_support():
    dens = TruncatedGaussian(d=3, scale=0.5)
    cloud = sample_poisson_process(dens, 2000, 4)
    lo, hi = dens.support_box
    assert np.all(cloud.points >= lo) and np.all(cloud.points <= hi)


def test_cloud_csv_round_trip(tmp_path):
    cloud = sample_poisson_process(UniformCube(d=3), 100, 9, scale=0.25)
    path = tmp_path / "cloud.csv"
    cloud_to_csv(cloud, str(path))
    back = cloud_from_csv(str(path))
    assert np.array_equal(cloud.points, back.points)
    assert back.d == 3 and back.scale == 0.25 and back.seed == 9


def test_grid_density_interpolation_and_sampling():
    values = np.array([[1.0, 2.0], [3.0, 4.0]])
    dens = GridDensity(d=2, box=np.array([[0., 0.], [1., 1.]]), values=values)
    assert dens.integral_power(1) == pytest.approx(1.0, abs=1e-6)
    pts = sample_density(dens, 50_000, stream(2))
    # mass increases toward the (1,1) corner
    frac_hi = np.all(pts > 0.5, axis=1).mean()
    frac_lo = np.all(pts < 0.5, axis=1).mean()
    assert frac_hi > frac_lo


def test_density_from_config_and_strict_kinds():
    dens = density_from_config({"kind": "uniform-cube", "d": 2, "side": 2.0})
    assert isinstance(dens, UniformCube) and dens.side == 2.0
    with pytest.raises(ValueError):
        density_from_config({"kind": "nope", "d": 2})


def test_stream_independence():
    a = stream(1, 0).random(5)
    b = stream(1, 1).random(5)
    a2 = stream(1, 0).random(5)
    assert np.array_equal(a, a2)
    assert not np.array_equal(a, b)


def test_pointcloud_validation():
    with pytest.raises(ValueError):
        PointCloud(points=np.zeros((3, 2)), d=2, n=10, scale=0.0)
