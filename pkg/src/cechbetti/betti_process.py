"""The t-indexed Betti process and its component decompositions.

All curves are exact step functions derived from persistence barcodes;
grids are only a presentation device.  The component census recomputes
homology per component with union-find, giving an independent pipeline
whose totals must match the persistence route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cechcore import SimplexBudgetError, enumerate_simplices, neighborhood_graph
from .homology import Barcode, betti_k_of_points, connected_components, persistence
from .pointproc import PointCloud


@dataclass
class BettiCurve:
    """beta_{k}(t) as an exact cadlag step function in process time t
    (geometric radius scale * t)."""

    k: int
    scale: float
    t_max: float
    bars: tuple[tuple[float, float], ...]  # (birth, death) in t-units

    @classmethod
    def from_barcode(cls, barcode: Barcode, scale: float, t_max: float) -> "BettiCurve":
        bars = tuple(
            (b / scale, d / scale if math.isfinite(d) else math.inf)
            for b, d in barcode.intervals
        )
        return cls(k=barcode.dimension, scale=scale, t_max=t_max, bars=bars)

    def value(self, t: float) -> int:
        if t > self.t_max:
            raise ValueError(f"t={t} beyond curve range {self.t_max}")
        return sum(1 for b, d in self.bars if b <= t < d)

    def values(self, grid: np.ndarray) -> np.ndarray:
        return np.array([self.value(float(t)) for t in np.asarray(grid).ravel()], dtype=np.int64)

    @property
    def jump_locations(self) -> np.ndarray:
        pts = {b for b, _ in self.bars} | {d for _, d in self.bars if math.isfinite(d)}
        return np.array(sorted(p for p in pts if p <= self.t_max))

    def lifetime_sum(self, t: float) -> float:
        """Integral of the curve from 0 to t (sum of clipped bar lengths)."""
        if t > self.t_max:
            raise ValueError(f"t={t} beyond curve range {self.t_max}")
        return float(sum(min(d, t) - min(b, t) for b, d in self.bars))

    def to_csv(self, path: str, meta: str = "") -> None:
        with open(path, "w") as fh:
            fh.write(f"# k={self.k} scale={self.scale} t_max={self.t_max} {meta}".rstrip() + "\n")
            fh.write("t,beta\n")
            fh.write(f"0.0,{self.value(0.0)}\n")
            for t in self.jump_locations:
                fh.write(f"{float(t)!r},{self.value(float(t))}\n")
            fh.write(f"{float(self.t_max)!r},{self.value(self.t_max)}\n")


def betti_curve(cloud: PointCloud, k: int, t_max: float, budget: int | None = None) -> BettiCurve:
    """Exact beta_k(t) for t <= t_max via persistence of the filtration up
    to dimension k+1 with cutoff scale * t_max."""
    if not 1 <= k < cloud.d:
        raise ValueError("require 1 <= k < d")
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if len(cloud) == 0:
        return BettiCurve(k=k, scale=cloud.scale, t_max=t_max, bars=())
    kwargs = {} if budget is None else {"budget": budget}
    fc = enumerate_simplices(cloud.points, max_dim=k + 1, cutoff=cloud.scale * t_max, **kwargs)
    barcode = persistence(fc, max_q=k)[k]
    return BettiCurve.from_barcode(barcode, scale=cloud.scale, t_max=t_max)


@dataclass
class ComponentCensus:
    """Counts U_{i,j} of connected components with i vertices and beta_k = j
    (j > 0), plus the number of topologically trivial components."""

    k: int
    t: float
    counts: dict[tuple[int, int], int] = field(default_factory=dict)
    trivial_components: int = 0

    @property
    def betti(self) -> int:
        return sum(j * c for (_, j), c in self.counts.items())

    @property
    def smallest_cycle_count(self) -> int:
        """S: components on k+2 points carrying one cycle."""
        return self.counts.get((self.k + 2, 1), 0)

    @property
    def remainder(self) -> int:
        """R: cycle count carried by components larger than k+2 points."""
        return sum(j * c for (i, j), c in self.counts.items() if i > self.k + 2)

    def truncated_betti(self, m: float) -> int:
        """Partial Betti sum over components of size <= m (m may be inf)."""
        if m < self.k + 2:
            raise ValueError("truncation must be >= k+2")
        return sum(j * c for (i, j), c in self.counts.items() if i <= m)


def census(cloud: PointCloud, k: int, t: float) -> ComponentCensus:
    """Component census of the Cech complex at radius scale*t."""
    if not 1 <= k < cloud.d:
        raise ValueError("require 1 <= k < d")
    return _census_from_components(cloud, k, t, region=None)


def restrict_lmp(cloud: PointCloud, k: int, t: float, region: np.ndarray) -> ComponentCensus:
    """Census restricted to components whose dictionary-order minimal vertex
    (left-most point) lies in the axis-aligned box `region` ((2, d))."""
    return _census_from_components(cloud, k, t, region=np.asarray(region, dtype=np.float64))


def _lmp(points: np.ndarray) -> np.ndarray:
    order = np.lexsort(points.T[::-1])
    return points[order[0]]


def _census_from_components(
    cloud: PointCloud, k: int, t: float, region: np.ndarray | None
) -> ComponentCensus:
    r = cloud.scale * t
    out = ComponentCensus(k=k, t=t)
    n = len(cloud)
    if n == 0:
        return out
    edges, _ = neighborhood_graph(cloud.points, r) if r > 0 else (np.empty((0, 2), dtype=np.int64), None)
    for comp in connected_components(n, edges):
        pts = cloud.points[comp]
        if region is not None:
            lmp = _lmp(pts)
            if np.any(lmp < region[0]) or np.any(lmp > region[1]):
                continue
        size = len(comp)
        j = betti_k_of_points(pts, r, k) if size >= k + 2 else 0
        if j > 0:
            key = (size, j)
            out.counts[key] = out.counts.get(key, 0) + 1
        else:
            out.trivial_components += 1
    return out


def census_grid(cloud: PointCloud, k: int, t_grid: np.ndarray) -> list[ComponentCensus]:
    """Component censuses at several t values, sharing one neighborhood graph
    built at the largest radius and filtering edges per t."""
    if not 1 <= k < cloud.d:
        raise ValueError("require 1 <= k < d")
    t_grid = np.asarray(t_grid, dtype=np.float64)
    n = len(cloud)
    if n == 0:
        return [ComponentCensus(k=k, t=float(t)) for t in t_grid]
    r_max = cloud.scale * float(t_grid.max())
    edges, lengths = neighborhood_graph(cloud.points, r_max)
    out = []
    for t in t_grid:
        r = cloud.scale * float(t)
        cen = ComponentCensus(k=k, t=float(t))
        sel = edges[lengths <= r] if len(edges) else edges
        for comp in connected_components(n, sel):
            size = len(comp)
            j = betti_k_of_points(cloud.points[comp], r, k) if size >= k + 2 else 0
            if j > 0:
                key = (size, j)
                cen.counts[key] = cen.counts.get(key, 0) + 1
            else:
                cen.trivial_components += 1
        out.append(cen)
    return out


def census_to_csv(censuses: list[ComponentCensus], path: str, meta: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(f"# {meta}".rstrip() + "\n")
        fh.write("t,i,j,count\n")
        for c in censuses:
            for (i, j), cnt in sorted(c.counts.items()):
                fh.write(f"{c.t!r},{i},{j},{cnt}\n")
