"""Samplers for the three limit processes on a fixed t-grid: the sparse and
critical Gaussian limits, and the Poisson-regime difference of coupled
time-changed Poisson counting processes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cechcore import h_pm_batch
from .limit_constants import LimitCovariance, _configs_ball_product, mu_matrix, phi_truncated
from .pointproc import Density, c_f_k, stream, unit_ball_volume

PSD_CLIP_REL = 1e-10


@dataclass(frozen=True)
class ProcessSample:
    """One sampled path of a limit process on a grid.  For the Poisson-regime
    process, `plus` and `minus` hold the two coupled counting paths whose
    difference is `values`."""

    grid: np.ndarray
    values: np.ndarray
    tag: str
    replicate: int
    plus: np.ndarray | None = None
    minus: np.ndarray | None = None


def factor_covariance(matrix: np.ndarray, clip_rel: float = PSD_CLIP_REL) -> np.ndarray:
    """Symmetric factor L with L L^T = matrix, after clipping tiny negative
    eigenvalues.  Raises if an eigenvalue is more negative than clip_rel
    times the largest one (the matrix is then not a covariance up to noise).
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    sym = 0.5 * (matrix + matrix.T)
    w, v = np.linalg.eigh(sym)
    top = float(w.max(initial=0.0))
    if top <= 0.0:
        return np.zeros_like(sym)
    if w.min() < -clip_rel * top:
        raise ValueError(
            f"covariance has eigenvalue {w.min():.3e} below the clipping "
            f"threshold {-clip_rel * top:.3e}"
        )
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


def _gaussian_paths(
    cov: LimitCovariance, replicates: int, seed: int, tag: str
) -> list[ProcessSample]:
    factor = factor_covariance(cov.matrix)
    rng = stream(seed, 17)
    z = rng.standard_normal((replicates, factor.shape[1]))
    paths = z @ factor.T
    return [
        ProcessSample(grid=cov.grid, values=paths[r], tag=tag, replicate=r)
        for r in range(replicates)
    ]


def sample_G(
    k: int,
    grid: np.ndarray,
    density: Density,
    samples: int,
    replicates: int,
    seed: int,
    part: str = "full",
    region: np.ndarray | None = None,
    covariance: LimitCovariance | None = None,
) -> list[ProcessSample]:
    """Paths of the sparse-regime Gaussian limit on the grid.

    part="full" gives the limit of the centered, rescaled Betti process;
    "plus"/"minus" give the two time-changed Brownian coordinates whose
    covariance is the volume of the monotone indicator region at min(t1, t2).
    `samples` controls the Monte Carlo covariance estimate; a precomputed
    `covariance` (from mu_matrix) bypasses it.
    """
    if covariance is None:
        covariance = mu_matrix(k, grid, density, samples, seed, region=region, part=part)
    return _gaussian_paths(covariance, replicates, seed, tag=f"G_{part}")


def sample_H_truncated(
    M: int,
    k: int,
    grid: np.ndarray,
    density: Density,
    samples: int,
    replicates: int,
    seed: int,
    region: np.ndarray | None = None,
    covariance: LimitCovariance | None = None,
    exponent_form: str = "rescaled",
) -> list[ProcessSample]:
    """Paths of the truncated critical-regime Gaussian limit, with covariance
    Phi^{(M)} estimated by Monte Carlo unless supplied."""
    if covariance is None:
        covariance = phi_truncated(
            M, k, grid, density, samples, seed, region=region, exponent_form=exponent_form
        )
    return _gaussian_paths(covariance, replicates, seed, tag=f"H_{M}")


def sample_V(
    k: int,
    grid: np.ndarray,
    density: Density,
    replicates: int,
    seed: int,
) -> list[ProcessSample]:
    """Paths of the Poisson-regime limit: the difference of two coupled
    counting processes driven by one Poisson ensemble of (k+2)-point shapes.

    Atoms are drawn once per replicate: a Poisson number of configurations
    {0, y} with y uniform on B(0, T)^(k+1), T the largest grid value, with
    intensity C_{f,k} (theta_d T^d)^(k+1).  V^+(t) / V^-(t) count atoms whose
    positive / negative indicator holds at t; both are nondecreasing in t.
    """
    grid = np.asarray(grid, dtype=np.float64)
    d = density.d
    tmax = float(grid.max())
    lam = c_f_k(density, k) * (unit_ball_volume(d) * tmax**d) ** (k + 1)
    rng = stream(seed, 29)
    out = []
    m = len(grid)
    for r in range(replicates):
        natoms = int(rng.poisson(lam))
        plus = np.zeros(m, dtype=np.int64)
        minus = np.zeros(m, dtype=np.int64)
        if natoms:
            cfg = _configs_ball_product(rng, natoms, k, d, tmax)
            for a, t in enumerate(grid):
                hp, hm = h_pm_batch(cfg, float(t))
                plus[a] = int(hp.sum())
                minus[a] = int(hm.sum())
        out.append(
            ProcessSample(
                grid=grid, values=plus - minus, tag="V", replicate=r,
                plus=plus, minus=minus,
            )
        )
    return out


def paths_matrix(samples: list[ProcessSample]) -> np.ndarray:
    """Stack sample paths into an (replicates, grid) array."""
    return np.stack([s.values for s in samples])
