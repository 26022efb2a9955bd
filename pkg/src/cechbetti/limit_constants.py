"""Monte Carlo estimators for the limit constants and limit covariances:
volumes of the empty-simplex indicator regions, the sparse-regime covariance
mu, the critical-regime covariance pieces eta and nu, their truncated
assembly Phi, and union-of-balls volumes.

Every estimator is a pure function of an explicit seed and returns a value
with a standard error.  Sampling is uniform on explicit boxes (or balls)
for the cluster coordinates, and importance sampling by the density f for
the location coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import kernels
from .cechcore import h_pm_batch
from .homology import betti_k_of_points
from .pointproc import Density, sample_density, stream, unit_ball_volume

DEFAULT_INNER_SAMPLES = 20_000


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    samples: int
    seed: int

    def agrees(self, other: float, nsigma: float = 3.0, extra_se: float = 0.0) -> bool:
        tol = nsigma * math.hypot(self.std_error, extra_se)
        return abs(self.value - other) <= tol


@dataclass
class LimitCovariance:
    grid: np.ndarray
    matrix: np.ndarray
    std_errors: np.ndarray
    regime: str
    metadata: dict = field(default_factory=dict)


def uniform_ball(rng: np.random.Generator, count: int, d: int, radius: float = 1.0) -> np.ndarray:
    """Uniform points in the d-ball of the given radius."""
    x = rng.standard_normal((count, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / d)
    return x * r[:, None]


def _configs_ball_product(rng: np.random.Generator, count: int, k: int, d: int, radius: float) -> np.ndarray:
    """(count, k+2, d) configurations: origin plus k+1 points uniform in
    B(0, radius) each."""
    y = uniform_ball(rng, count * (k + 1), d, radius).reshape(count, k + 1, d)
    return np.concatenate([np.zeros((count, 1, d)), y], axis=1)


def _mc(values: np.ndarray, samples: int, seed: int) -> McEstimate:
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return McEstimate(value=mean, std_error=se, samples=samples, seed=seed)


def d_volume(k: int, d: int, t: float, sign: str, samples: int, seed: int) -> McEstimate:
    """Volume of D_t^+/-/diff = {y : h_t(0, y) indicator = 1}, by uniform
    sampling on B(0, t)^(k+1)."""
    if not 1 <= k < d:
        raise ValueError("require 1 <= k < d")
    rng = stream(seed)
    box_vol = (unit_ball_volume(d) * t**d) ** (k + 1)
    vals = np.empty(samples)
    done = 0
    while done < samples:
        chunk = min(samples - done, 1_000_000)
        cfg = _configs_ball_product(rng, chunk, k, d, t)
        hp, hm = h_pm_batch(cfg, t)
        if sign == "+":
            ind = hp
        elif sign == "-":
            ind = hm
        elif sign == "diff":
            ind = hp & ~hm
        else:
            raise ValueError("sign must be '+', '-' or 'diff'")
        vals[done : done + chunk] = box_vol * ind
        done += chunk
    return _mc(vals, samples, seed)


def volume_D1(k: int, d: int, sign: str, samples: int, seed: int) -> McEstimate:
    """The geometric constants m_k(D_1^+/-)."""
    return d_volume(k, d, 1.0, sign, samples, seed)


def mu(
    k: int,
    t1: float,
    t2: float,
    density: Density,
    samples: int,
    seed: int,
    region: np.ndarray | None = None,
) -> McEstimate:
    """Sparse-regime limit covariance mu(t1, t2): the density factor
    (integral of f^(k+2) over the region, over (k+2)!) times the volume of
    {h_{t1} = h_{t2} = 1}."""
    if t1 < 0 or t2 < 0:
        raise ValueError("t1, t2 must be nonnegative")
    d = density.d
    factor = density.integral_power(k + 2, box=region) / math.factorial(k + 2)
    tmax = max(t1, t2)
    if tmax == 0.0 or factor == 0.0:
        return McEstimate(0.0, 0.0, samples, seed)
    rng = stream(seed)
    box_vol = (unit_ball_volume(d) * tmax**d) ** (k + 1)
    vals = np.empty(samples)
    done = 0
    while done < samples:
        chunk = min(samples - done, 1_000_000)
        cfg = _configs_ball_product(rng, chunk, k, d, tmax)
        hp1, hm1 = h_pm_batch(cfg, t1)
        hp2, hm2 = h_pm_batch(cfg, t2)
        ind = (hp1 & ~hm1) & (hp2 & ~hm2)
        vals[done : done + chunk] = factor * box_vol * ind
        done += chunk
    return _mc(vals, samples, seed)


def mu_matrix(
    k: int,
    grid: np.ndarray,
    density: Density,
    samples: int,
    seed: int,
    region: np.ndarray | None = None,
    part: str = "full",
) -> LimitCovariance:
    """Covariance matrix mu(t_a, t_b) on a t-grid from one shared sample set
    (a Gram matrix of indicator vectors, hence PSD by construction).
    `part` selects the h / h+ / h- indicator family."""
    grid = np.asarray(grid, dtype=np.float64)
    d = density.d
    factor = density.integral_power(k + 2, box=region) / math.factorial(k + 2)
    tmax = float(grid.max())
    m = len(grid)
    gram = np.zeros((m, m))
    rng = stream(seed)
    box_vol = (unit_ball_volume(d) * tmax**d) ** (k + 1)
    done = 0
    while done < samples:
        chunk = min(samples - done, 500_000)
        cfg = _configs_ball_product(rng, chunk, k, d, tmax)
        ind = np.empty((m, chunk))
        for a, t in enumerate(grid):
            hp, hm = h_pm_batch(cfg, float(t))
            if part == "full":
                ind[a] = hp & ~hm
            elif part == "plus":
                ind[a] = hp
            elif part == "minus":
                ind[a] = hm
            else:
                raise ValueError("part must be 'full', 'plus' or 'minus'")
        gram += ind @ ind.T
        done += chunk
    matrix = factor * box_vol * gram / samples
    # binomial-type errors per entry
    p = gram / samples
    se = factor * box_vol * np.sqrt(np.clip(p * (1 - p), 0.0, None) / samples)
    return LimitCovariance(
        grid=grid,
        matrix=matrix,
        std_errors=se,
        regime="sparse",
        metadata={"part": part, "samples": samples, "seed": seed},
    )


def union_ball_volume(
    centers: np.ndarray, r: float, samples: int, seed: int
) -> McEstimate:
    """Monte Carlo volume of the union of balls B(c, r) over the bounding box."""
    if r <= 0:
        raise ValueError("r must be positive")
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    rng = stream(seed)
    vals = union_volume_batch(centers[None, :, :], r, samples, rng)
    # per-point indicator variance for the std error
    lo = centers.min(axis=0) - r
    hi = centers.max(axis=0) + r
    box_vol = float(np.prod(hi - lo))
    p = vals[0] / box_vol
    se = box_vol * math.sqrt(max(p * (1 - p), 0.0) / samples)
    return McEstimate(value=float(vals[0]), std_error=se, samples=samples, seed=seed)


def union_volume_batch(
    centers: np.ndarray,
    r: float | np.ndarray,
    inner_samples: int,
    rng: np.random.Generator,
    chunk_bytes: int = 2 * 10**8,
) -> np.ndarray:
    """MC volumes of unions of balls for a batch of center sets.

    centers: (K, m, d); r scalar or (K,).  One inner uniform sample cloud per
    set, drawn on that set's bounding box.
    """
    c = np.asarray(centers, dtype=np.float64)
    kk, m, d = c.shape
    r = np.broadcast_to(np.asarray(r, dtype=np.float64), (kk,))
    out = np.empty(kk)
    lo = c.min(axis=1) - r[:, None]
    hi = c.max(axis=1) + r[:, None]
    box_vol = np.prod(hi - lo, axis=1)
    step = max(1, int(chunk_bytes / (inner_samples * d * 8)))
    for s in range(0, kk, step):
        e = min(kk, s + step)
        u = rng.random((e - s, inner_samples, d))
        pts = lo[s:e, None, :] + u * (hi[s:e] - lo[s:e])[:, None, :]
        # (B, Q, m) distances to each center
        d2 = ((pts[:, :, None, :] - c[s:e, None, :, :]) ** 2).sum(axis=3)
        covered = (d2 <= (r[s:e, None, None] ** 2)).any(axis=2)
        out[s:e] = box_vol[s:e] * covered.mean(axis=1)
    return out


def connected_batch(y: np.ndarray, t: float) -> np.ndarray:
    """Connectivity of the distance-<=t graph for configs y: (N, m, d)."""
    n, m, _ = y.shape
    d2 = ((y[:, :, None, :] - y[:, None, :, :]) ** 2).sum(axis=3)
    reach = (d2 <= t * t).astype(np.uint8)
    hops = max(1, math.ceil(math.log2(m)))
    for _ in range(hops):
        reach = ((reach @ reach) > 0).astype(np.uint8)
    return reach[:, 0, :].astype(bool).all(axis=1)


@lru_cache(maxsize=None)
def _triangle_edge_masks(m: int) -> tuple[list[int], list[tuple[int, int, int]]]:
    """Edge-incidence bitmasks of every 3-subset of m points, for GF(2)
    boundary ranks."""
    tris = list(combinations(range(m), 3))
    edge_index = {e: i for i, e in enumerate(combinations(range(m), 2))}
    masks = []
    for a, b, c in tris:
        masks.append(
            (1 << edge_index[(a, b)]) | (1 << edge_index[(a, c)]) | (1 << edge_index[(b, c)])
        )
    return masks, tris


def _rank_basis(bits: int, masks: list[int]) -> list[int]:
    basis: list[int] = []
    i = 0
    while bits:
        if bits & 1:
            row = masks[i]
            for b in basis:
                row = min(row, row ^ b)
            if row:
                basis.append(row)
                basis.sort(reverse=True)
        bits >>= 1
        i += 1
    return basis


def betti1_batch(y: np.ndarray, t: float) -> np.ndarray:
    """First Betti number of the Cech complex on each small config in y
    ((N, m, d), m <= 6), at diameter parameter t.  Vectorized."""
    n, m, _ = y.shape
    if m < 3:
        return np.zeros(n, dtype=np.int64)
    if m > 6:
        return np.array([betti_k_of_points(y[i], t, 1) for i in range(n)], dtype=np.int64)
    d2 = ((y[:, :, None, :] - y[:, None, :, :]) ** 2).sum(axis=3)
    adj = d2 <= t * t
    iu = np.triu_indices(m, k=1)
    edges = adj[:, iu[0], iu[1]].sum(axis=1)
    reach = adj.astype(np.uint8)
    for _ in range(max(1, math.ceil(math.log2(m)))):
        reach = ((reach @ reach) > 0).astype(np.uint8)
    first = np.argmax(reach, axis=2)
    comps = (first == np.arange(m)[None, :]).sum(axis=1)
    masks, tris = _triangle_edge_masks(m)
    tri_mask = np.zeros(n, dtype=np.int64)
    for bit, tri in enumerate(tris):
        filled = 2.0 * kernels.meb_radius_batch(y[:, tri, :]) <= t
        tri_mask |= filled.astype(np.int64) << bit
    uniq, inverse = np.unique(tri_mask, return_inverse=True)
    rank_of = np.array([len(_rank_basis(int(b), masks)) for b in uniq], dtype=np.int64)
    rank = rank_of[inverse]
    return edges - m + comps - rank


def betti_k_batch(y: np.ndarray, t: float, k: int) -> np.ndarray:
    """beta_k for each small config in y: vectorized for k=1, generic loop
    otherwise."""
    if k == 1:
        return betti1_batch(y, t)
    return np.array([betti_k_of_points(cfg, t, k) for cfg in y], dtype=np.int64)


@dataclass
class ClusterEnsemble:
    """Uniform-box cluster configurations {0, y} of size i, filtered to be
    connected at t_connect, with their Betti numbers at t1 and t2 and the
    exact acceptance bookkeeping of the rejection run."""

    i: int
    k: int
    t1: float
    t2: float
    configs: np.ndarray  # (K, i, d): accepted configs, first point at 0
    beta1: np.ndarray  # beta_k at t1, (K,)
    beta2: np.ndarray  # beta_k at t2, (K,)
    n_proposals: int
    box_volume: float

    @property
    def accept_count(self) -> int:
        return len(self.configs)


def sample_clusters(
    i: int,
    k: int,
    d: int,
    t1: float,
    t2: float,
    samples: int,
    seed: int,
    require_cycles: bool = True,
) -> ClusterEnsemble:
    """Uniform sampling of y on [-(i-1)tmax, (i-1)tmax]^(d(i-1)), keeping
    configs {0, y} connected at min(t1, t2); beta_k is evaluated at t1 and
    t2.  With require_cycles, configs with beta_k = 0 at either t are also
    dropped (they contribute zero to every eta/nu cell)."""
    tmin, tmax = min(t1, t2), max(t1, t2)
    half = (i - 1) * tmax
    box_volume = (2.0 * half) ** (d * (i - 1))
    rng = stream(seed)
    kept: list[np.ndarray] = []
    b1s: list[np.ndarray] = []
    b2s: list[np.ndarray] = []
    done = 0
    while done < samples:
        chunk = min(samples - done, 200_000)
        y = rng.uniform(-half, half, size=(chunk, i - 1, d))
        cfg = np.concatenate([np.zeros((chunk, 1, d)), y], axis=1)
        ok = connected_batch(cfg, tmin)
        cfg = cfg[ok]
        if len(cfg):
            b1 = betti_k_batch(cfg, t1, k)
            b2 = b1 if t1 == t2 else betti_k_batch(cfg, t2, k)
            if require_cycles:
                keep = (b1 > 0) & (b2 > 0)
                cfg, b1, b2 = cfg[keep], b1[keep], b2[keep]
            if len(cfg):
                kept.append(cfg)
                b1s.append(b1)
                b2s.append(b2)
        done += chunk
    if kept:
        configs = np.concatenate(kept)
        beta1 = np.concatenate(b1s)
        beta2 = np.concatenate(b2s)
    else:
        configs = np.empty((0, i, d))
        beta1 = beta2 = np.empty(0, dtype=np.int64)
    return ClusterEnsemble(
        i=i, k=k, t1=t1, t2=t2, configs=configs, beta1=beta1, beta2=beta2,
        n_proposals=samples, box_volume=box_volume,
    )


def _void_volumes(
    configs: np.ndarray,
    radius: float,
    inner_samples: int,
    rng: np.random.Generator,
    exponent_form: str,
) -> np.ndarray:
    """Union-of-balls volume entering the exponential void factor.

    "rescaled" (default): m(B({0,y}; t_max)), consistent with the covariance
    derivation; "literal": t_max^d * m(B({0,y}; 1))."""
    if exponent_form == "rescaled":
        return union_volume_batch(configs, radius, inner_samples, rng)
    if exponent_form == "literal":
        d = configs.shape[2]
        return radius**d * union_volume_batch(configs, 1.0, inner_samples, rng)
    raise ValueError("exponent_form must be 'rescaled' or 'literal'")


@dataclass
class EtaTable:
    """Per-cell eta estimates from one sampling run: cell (j1, j2) ->
    McEstimate, plus the j1*j2-weighted total used by Phi."""

    i: int
    t1: float
    t2: float
    cells: dict[tuple[int, int], McEstimate]
    weighted: McEstimate

    def cell(self, j1: int, j2: int) -> McEstimate:
        zero = McEstimate(0.0, 0.0, self.weighted.samples, self.weighted.seed)
        return self.cells.get((j1, j2), zero)

    def weighted_diag_sum(self) -> float:
        """Sum over j of j * eta^{(i,j,j)}: the per-size mean-curve weight."""
        return sum(j1 * est.value for (j1, j2), est in self.cells.items() if j1 == j2)


def eta_table(
    i: int,
    t1: float,
    t2: float,
    density: Density,
    k: int,
    samples: int,
    seed: int,
    region: np.ndarray | None = None,
    inner_samples: int = DEFAULT_INNER_SAMPLES,
    exponent_form: str = "rescaled",
) -> EtaTable:
    """All eta^{(i, j1, j2)}(t1, t2) cells from one run.

    eta integrates, over cluster shapes {0, y} connected at t1^t2 carrying
    j1 / j2 cycles at t1 / t2, the void factor exp(-f(x) V) against
    f(x)^i dx restricted to the region."""
    if i < k + 2:
        raise ValueError("require i >= k+2")
    if exponent_form not in ("rescaled", "literal"):
        raise ValueError("exponent_form must be 'rescaled' or 'literal'")
    d = density.d
    ens = sample_clusters(i, k, d, t1, t2, samples, seed)
    mass = density.integral_power(1, box=region)
    kcount = ens.accept_count
    cells: dict[tuple[int, int], McEstimate] = {}
    if kcount == 0 or mass == 0.0:
        zero = McEstimate(0.0, 0.0, samples, seed)
        return EtaTable(i=i, t1=t1, t2=t2, cells={}, weighted=zero)
    rng = stream(seed, 1)
    x = sample_density_region(density, kcount, rng, region)
    fx = density.evaluate(x)
    vols = _void_volumes(ens.configs, max(t1, t2), inner_samples, stream(seed, 2), exponent_form)
    w = mass * ens.box_volume * fx ** (i - 1) * np.exp(-fx * vols)

    def estimate(mask_or_weight: np.ndarray) -> McEstimate:
        contrib = w * mask_or_weight
        total = float(contrib.sum())
        sq = float((contrib**2).sum())
        mean = total / samples
        var = sq / samples - mean**2
        se = math.sqrt(max(var, 0.0) / samples)
        return McEstimate(value=mean, std_error=se, samples=samples, seed=seed)

    jmax = math.comb(i, k + 1)
    for j1 in range(1, jmax + 1):
        for j2 in range(1, jmax + 1):
            mask = (ens.beta1 == j1) & (ens.beta2 == j2)
            if mask.any():
                cells[(j1, j2)] = estimate(mask.astype(np.float64))
    weighted = estimate((ens.beta1 * ens.beta2).astype(np.float64))
    return EtaTable(i=i, t1=t1, t2=t2, cells=cells, weighted=weighted)


def eta(
    i: int,
    j1: int,
    j2: int,
    t1: float,
    t2: float,
    density: Density,
    k: int,
    samples: int,
    seed: int,
    region: np.ndarray | None = None,
    inner_samples: int = DEFAULT_INNER_SAMPLES,
    exponent_form: str = "rescaled",
) -> McEstimate:
    """eta^{(i, j1, j2)}(t1, t2) for one cell."""
    jmax = math.comb(i, k + 1)
    if j1 > jmax or j2 > jmax:
        return McEstimate(0.0, 0.0, samples, seed)
    table = eta_table(i, t1, t2, density, k, samples, seed, region, inner_samples, exponent_form)
    return table.cell(j1, j2)


def sample_density_region(
    density: Density, count: int, rng: np.random.Generator, region: np.ndarray | None
) -> np.ndarray:
    """i.i.d. points from f conditioned on the region box."""
    if region is None:
        return sample_density(density, count, rng)
    region = np.asarray(region, dtype=np.float64)
    out = np.empty((0, density.d))
    lo, hi = region
    sup = density.sup_norm
    guard = 0
    while len(out) < count:
        chunk = max(2048, 2 * (count - len(out)))
        x = rng.uniform(lo, hi, size=(chunk, density.d))
        u = rng.uniform(0.0, sup, size=chunk)
        out = np.concatenate([out, x[u < density.evaluate(x)]])
        guard += chunk
        if guard > 10**7 and len(out) == 0:
            raise RuntimeError("density has no mass in the requested region")
    return out[:count]


@dataclass
class NuTable:
    """Per-cell nu estimates from one paired-cluster run."""

    i1: int
    i2: int
    t1: float
    t2: float
    cells: dict[tuple[int, int], McEstimate]
    weighted: McEstimate

    def cell(self, j1: int, j2: int) -> McEstimate:
        zero = McEstimate(0.0, 0.0, self.weighted.samples, self.weighted.seed)
        return self.cells.get((j1, j2), zero)


def nu_table(
    i1: int,
    i2: int,
    t1: float,
    t2: float,
    density: Density,
    k: int,
    samples: int,
    seed: int,
    region: np.ndarray | None = None,
    inner_samples: int = DEFAULT_INNER_SAMPLES,
    anchors_per_pair: int = 16,
) -> NuTable:
    """All nu^{(i1, i2, j1, j2)}(t1, t2) cells from one run.

    The second cluster is parametrized as an anchor z plus offsets w
    (unit Jacobian), so its shape is sampled exactly like a cluster of size
    i2 and only the anchor carries the interaction with the first cluster.
    Cluster shapes come from conditional rejection runs whose acceptance
    fractions enter the estimate exactly, keeping the estimator unbiased
    for the uniform-box integral.
    """
    d = density.d
    ens1 = sample_clusters(i1, k, d, t1, t1, samples, seed)
    ens2 = sample_clusters(i2, k, d, t2, t2, samples, _subseed(seed, 11))
    p1 = ens1.accept_count / ens1.n_proposals
    p2 = ens2.accept_count / ens2.n_proposals
    npairs = min(ens1.accept_count, ens2.accept_count)
    zero = McEstimate(0.0, 0.0, samples, seed)
    if npairs == 0:
        return NuTable(i1=i1, i2=i2, t1=t1, t2=t2, cells={}, weighted=zero)
    cfg1 = ens1.configs[:npairs]
    b1 = ens1.beta1[:npairs]
    cfg2 = ens2.configs[:npairs]
    b2 = ens2.beta1[:npairs]

    rng = stream(seed, 3)
    half_z = (i1 - 1) * t1 + t1 + t2 + (i2 - 1) * t2
    vol_z = (2.0 * half_z) ** d
    tmax = max(t1, t2)

    # cluster-only union volumes (translation invariant)
    v1 = union_volume_batch(cfg1, t1, inner_samples, stream(seed, 4))
    v2 = union_volume_batch(cfg2, t2, inner_samples, stream(seed, 5))

    mass = density.integral_power(1, box=region)
    x = sample_density_region(density, npairs * anchors_per_pair, stream(seed, 6), region)
    fx = density.evaluate(x).reshape(npairs, anchors_per_pair)

    # anchors for the second cluster, per pair
    z = rng.uniform(-half_z, half_z, size=(npairs, anchors_per_pair, d))
    # bracket terms need pairwise distances between the two vertex sets
    # dmin[p, a]: min distance between cluster-1 points and anchored cluster-2
    c2 = cfg2[:, None, :, :] + z[:, :, None, :]  # (P, A, i2, d)
    diff = cfg1[:, None, :, None, :] - c2[:, :, None, :, :]  # (P, A, i1, i2, d)
    dmin = np.sqrt((diff**2).sum(axis=4)).min(axis=(2, 3))  # (P, A)
    alpha_t1t2 = dmin <= t1 + t2
    alpha_half = dmin <= tmax  # radius (t1 v t2)/2 on both sides

    # joint union volume for pairs/anchors where the wide alpha holds
    bracket = np.zeros((npairs, anchors_per_pair))
    need = alpha_t1t2
    if need.any():
        pi, ai = np.nonzero(need)
        v12 = _union_volume_tworadius(
            cfg1[pi], c2[pi, ai], t1, t2, inner_samples, stream(seed, 7)
        )
        f_need = fx[pi, ai]
        term1 = (1.0 - alpha_half[pi, ai]) * np.exp(-f_need * v12)
        term2 = np.exp(-f_need * (v1[pi] + v2[pi]))
        bracket[pi, ai] = term1 - term2

    weight = mass * ens1.box_volume * ens2.box_volume * vol_z
    per_anchor = fx ** (i1 + i2 - 1) * bracket  # (P, A)
    per_pair = per_anchor.mean(axis=1)  # z/x integral averaged per pair

    def estimate(mask_or_weight: np.ndarray) -> McEstimate:
        vals = weight * per_pair * mask_or_weight
        mean_cond = float(vals.mean())
        se_cond = float(vals.std(ddof=1) / math.sqrt(npairs)) if npairs > 1 else 0.0
        value = p1 * p2 * mean_cond
        # acceptance-fraction noise, folded in quadrature
        rel_p = 0.0
        if ens1.accept_count:
            rel_p += (1 - p1) / ens1.accept_count
        if ens2.accept_count:
            rel_p += (1 - p2) / ens2.accept_count
        se = math.hypot(p1 * p2 * se_cond, abs(value) * math.sqrt(rel_p))
        return McEstimate(value=value, std_error=se, samples=samples, seed=seed)

    cells: dict[tuple[int, int], McEstimate] = {}
    jmax1 = math.comb(i1, k + 1)
    jmax2 = math.comb(i2, k + 1)
    for j1 in range(1, jmax1 + 1):
        for j2 in range(1, jmax2 + 1):
            mask = (b1 == j1) & (b2 == j2)
            if mask.any():
                cells[(j1, j2)] = estimate(mask.astype(np.float64))
    weighted = estimate((b1 * b2).astype(np.float64))
    return NuTable(i1=i1, i2=i2, t1=t1, t2=t2, cells=cells, weighted=weighted)


def _union_volume_tworadius(
    c1: np.ndarray, c2: np.ndarray, r1: float, r2: float,
    inner_samples: int, rng: np.random.Generator, chunk_bytes: int = 2 * 10**8,
) -> np.ndarray:
    """MC volume of B(c1; r1) union B(c2; r2) per batch row."""
    q, i1, d = c1.shape
    i2 = c2.shape[1]
    lo = np.minimum(c1.min(axis=1) - r1, c2.min(axis=1) - r2)
    hi = np.maximum(c1.max(axis=1) + r1, c2.max(axis=1) + r2)
    box_vol = np.prod(hi - lo, axis=1)
    out = np.empty(q)
    step = max(1, int(chunk_bytes / (inner_samples * d * 8)))
    for s in range(0, q, step):
        e = min(q, s + step)
        u = rng.random((e - s, inner_samples, d))
        pts = lo[s:e, None, :] + u * (hi[s:e] - lo[s:e])[:, None, :]
        d2a = ((pts[:, :, None, :] - c1[s:e, None, :, :]) ** 2).sum(axis=3)
        d2b = ((pts[:, :, None, :] - c2[s:e, None, :, :]) ** 2).sum(axis=3)
        covered = (d2a <= r1 * r1).any(axis=2) | (d2b <= r2 * r2).any(axis=2)
        out[s:e] = box_vol[s:e] * covered.mean(axis=1)
    return out


def nu(
    i1: int,
    i2: int,
    j1: int,
    j2: int,
    t1: float,
    t2: float,
    density: Density,
    k: int,
    samples: int,
    seed: int,
    region: np.ndarray | None = None,
    inner_samples: int = DEFAULT_INNER_SAMPLES,
) -> McEstimate:
    """nu^{(i1, i2, j1, j2)}(t1, t2) for one cell."""
    table = nu_table(i1, i2, t1, t2, density, k, samples, seed, region, inner_samples)
    return table.cell(j1, j2)


def _subseed(seed: int, salt: int) -> int:
    return (seed * 1_000_003 + salt) % (2**63)


def phi_truncated(
    M: int,
    k: int,
    grid: np.ndarray,
    density: Density,
    samples: int,
    seed: int,
    region: np.ndarray | None = None,
    inner_samples: int = DEFAULT_INNER_SAMPLES,
    exponent_form: str = "rescaled",
    include_nu: bool = True,
    nu_samples: int | None = None,
) -> LimitCovariance:
    """Truncated critical-regime limit covariance Phi^{(M)}(t_a, t_b):
    sum over i of the j1*j2-weighted eta / i!, plus the weighted nu terms
    over cluster-size pairs / (i1! i2!)."""
    if M < k + 2:
        raise ValueError("require M >= k+2")
    if nu_samples is None:
        # the cross-cluster terms are two orders of magnitude below the
        # single-cluster terms; a coarser run suffices
        nu_samples = max(10_000, samples // 4)
    grid = np.asarray(grid, dtype=np.float64)
    m = len(grid)
    matrix = np.zeros((m, m))
    errs = np.zeros((m, m))
    for a in range(m):
        for b in range(a, m):
            t1, t2 = float(grid[a]), float(grid[b])
            val = 0.0
            var = 0.0
            for i in range(k + 2, M + 1):
                est = eta_table(
                    i, t1, t2, density, k, samples, _subseed(seed, 100 + i),
                    region, inner_samples, exponent_form,
                ).weighted
                val += est.value / math.factorial(i)
                var += (est.std_error / math.factorial(i)) ** 2
            if include_nu:
                for i1 in range(k + 2, M + 1):
                    for i2 in range(k + 2, M + 1):
                        est = nu_table(
                            i1, i2, t1, t2, density, k, nu_samples,
                            _subseed(seed, 1000 + 31 * i1 + i2),
                            region, inner_samples,
                        ).weighted
                        denom = math.factorial(i1) * math.factorial(i2)
                        val += est.value / denom
                        var += (est.std_error / denom) ** 2
            matrix[a, b] = matrix[b, a] = val
            errs[a, b] = errs[b, a] = math.sqrt(var)
    return LimitCovariance(
        grid=grid,
        matrix=matrix,
        std_errors=errs,
        regime="critical",
        metadata={
            "M": M, "k": k, "samples": samples, "seed": seed,
            "exponent_form": exponent_form, "include_nu": include_nu,
        },
    )
