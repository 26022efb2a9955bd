"""Cech geometry: enclosing balls, filtration values, neighborhood graphs,
simplex enumeration, and the empty-simplex indicators.

Convention: a simplex is present at parameter t iff its filtration value
(twice the minimum-enclosing-ball radius of its vertices) is <= t.  This
closed convention makes the Betti process cadlag; it differs from the
open-ball membership test only on a measure-zero set of t.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from . import kernels

DEFAULT_SIMPLEX_BUDGET = 10**7


class SimplexBudgetError(RuntimeError):
    """Enumeration would exceed the configured simplex budget."""


def min_enclosing_ball(points: Sequence[Sequence[float]] | np.ndarray) -> tuple[np.ndarray, float]:
    """Exact minimum enclosing ball of a finite point set."""
    return kernels.meb_ball(np.asarray(points, dtype=np.float64))


def filtration_value(points: np.ndarray, vertices: Sequence[int]) -> float:
    """Smallest t at which the simplex on `vertices` enters the complex."""
    vertices = list(vertices)
    if len(set(vertices)) != len(vertices):
        raise ValueError("duplicate vertex indices")
    sub = np.asarray(points, dtype=np.float64)[vertices]
    if len(sub) == 1:
        return 0.0
    if len(sub) == 2:
        return float(np.linalg.norm(sub[0] - sub[1]))
    return 2.0 * kernels.meb_radius(sub)


def neighborhood_graph(points: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    """All pairs (i < j) with |x_i - x_j| <= r (closed), via a spatial grid
    with cell side r.  Returns (edges (E,2) int array, lengths (E,))."""
    pts = np.asarray(points, dtype=np.float64)
    if r <= 0:
        raise ValueError("r must be positive")
    n = len(pts)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64), np.empty(0)
    d = pts.shape[1]
    cells = np.floor(pts / r).astype(np.int64)
    order = np.lexsort(cells.T[::-1])
    cells_sorted = cells[order]
    # group ranges of identical cells
    change = np.any(np.diff(cells_sorted, axis=0) != 0, axis=1)
    starts = np.concatenate([[0], np.nonzero(change)[0] + 1])
    ends = np.concatenate([starts[1:], [n]])
    cell_index = {tuple(cells_sorted[s]): gi for gi, s in enumerate(starts)}
    offsets = np.array(np.meshgrid(*([[-1, 0, 1]] * d), indexing="ij")).reshape(d, -1).T

    edges: list[np.ndarray] = []
    lengths: list[np.ndarray] = []
    for gi, (s, e) in enumerate(zip(starts, ends)):
        base = tuple(cells_sorted[s])
        mine = order[s:e]
        for off in offsets:
            key = tuple(base + off)
            gj = cell_index.get(key)
            if gj is None or gj < gi:
                continue
            if gj == gi:
                if len(mine) < 2:
                    continue
                ii, jj = np.triu_indices(len(mine), k=1)
                a, b = mine[ii], mine[jj]
            else:
                theirs = order[starts[gj] : ends[gj]]
                a = np.repeat(mine, len(theirs))
                b = np.tile(theirs, len(mine))
            dist = np.linalg.norm(pts[a] - pts[b], axis=1)
            keep = dist <= r
            if np.any(keep):
                a, b = a[keep], b[keep]
                lo, hi = np.minimum(a, b), np.maximum(a, b)
                edges.append(np.stack([lo, hi], axis=1))
                lengths.append(dist[keep])
    if not edges:
        return np.empty((0, 2), dtype=np.int64), np.empty(0)
    edge_arr = np.concatenate(edges)
    len_arr = np.concatenate(lengths)
    key = np.lexsort((edge_arr[:, 1], edge_arr[:, 0]))
    return edge_arr[key], len_arr[key]


@dataclass(frozen=True)
class FilteredSimplex:
    vertices: tuple[int, ...]  # sorted
    value: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


@dataclass
class FilteredComplex:
    """Cech filtration up to `max_dim`, simplices sorted by (value, dim)."""

    points: np.ndarray
    max_dim: int
    cutoff: float
    simplices: list[FilteredSimplex] = field(default_factory=list)

    def sort(self) -> None:
        self.simplices.sort(key=lambda s: (s.value, s.dim, s.vertices))

    def __len__(self) -> int:
        return len(self.simplices)

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("dim,value,vertices\n")
            for s in self.simplices:
                fh.write(f"{s.dim},{s.value!r}," + ",".join(map(str, s.vertices)) + "\n")

    @classmethod
    def from_csv(cls, path: str, max_dim: int | None = None, cutoff: float = np.inf) -> "FilteredComplex":
        simplices = []
        with open(path) as fh:
            fh.readline()
            for line in fh:
                parts = line.strip().split(",")
                if not parts or parts == [""]:
                    continue
                value = float(parts[1])
                verts = tuple(int(v) for v in parts[2:])
                simplices.append(FilteredSimplex(verts, value))
        md = max_dim if max_dim is not None else max((s.dim for s in simplices), default=0)
        fc = cls(points=np.empty((0, 0)), max_dim=md, cutoff=cutoff, simplices=simplices)
        fc.sort()
        return fc


def enumerate_simplices(
    points: np.ndarray,
    max_dim: int,
    cutoff: float,
    budget: int = DEFAULT_SIMPLEX_BUDGET,
) -> FilteredComplex:
    """Cech filtration: cliques of the cutoff-radius neighborhood graph,
    valued by twice the minimum-enclosing-ball radius, pruned at `cutoff`."""
    if max_dim < 1:
        raise ValueError("max_dim must be >= 1")
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    fc = FilteredComplex(points=pts, max_dim=max_dim, cutoff=cutoff)
    sims = fc.simplices
    for v in range(n):
        sims.append(FilteredSimplex((v,), 0.0))
    if n < 2:
        return fc
    edges, lengths = neighborhood_graph(pts, cutoff)
    nbrs: dict[int, set[int]] = {v: set() for v in range(n)}
    value_of: dict[tuple[int, ...], float] = {}
    for (a, b), length in zip(edges, lengths):
        key = (int(a), int(b))
        sims.append(FilteredSimplex(key, float(length)))
        value_of[key] = float(length)
        nbrs[int(a)].add(int(b))
        nbrs[int(b)].add(int(a))
    if len(sims) > budget:
        raise SimplexBudgetError(f"simplex budget {budget} exceeded at dimension 1")

    frontier = [tuple(e) for e in edges.tolist()]
    for dim in range(2, max_dim + 1):
        nxt: list[tuple[int, ...]] = []
        nxt_values: dict[tuple[int, ...], float] = {}
        for clique in frontier:
            common = nbrs[clique[0]]
            for v in clique[1:]:
                common = common & nbrs[v]
            for w in sorted(common):
                if w <= clique[-1]:
                    continue
                cand = clique + (w,)
                # clamp to the facet maximum so round-off in the MEB radius
                # can never place a simplex strictly before one of its faces
                facet_max = 0.0
                missing = False
                for omit in range(len(cand)):
                    fv = value_of.get(cand[:omit] + cand[omit + 1 :])
                    if fv is None:
                        missing = True
                        break
                    if fv > facet_max:
                        facet_max = fv
                if missing:
                    continue
                value = max(2.0 * kernels.meb_radius(pts[list(cand)]), facet_max)
                if value <= cutoff:
                    sims.append(FilteredSimplex(cand, value))
                    nxt.append(cand)
                    nxt_values[cand] = value
                    if len(sims) > budget:
                        raise SimplexBudgetError(
                            f"simplex budget {budget} exceeded at dimension {dim}"
                        )
        frontier = nxt
        value_of = nxt_values
        if not frontier:
            break
    fc.sort()
    return fc


def _check_cardinality(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 3:
        raise ValueError("expected k+2 >= 3 points as an (m, d) array")
    return pts


def h_plus(points: np.ndarray, t: float) -> int:
    """1 iff every (m-1)-point subset has filtration value <= t."""
    pts = _check_cardinality(points)
    m = len(pts)
    for omit in range(m):
        sub = np.delete(pts, omit, axis=0)
        if 2.0 * kernels.meb_radius(sub) > t:
            return 0
    return 1


def h_minus(points: np.ndarray, t: float) -> int:
    """1 iff the full point set has filtration value <= t."""
    pts = _check_cardinality(points)
    return int(2.0 * kernels.meb_radius(pts) <= t)


def h(points: np.ndarray, t: float) -> int:
    """Empty-top-simplex indicator: h_plus - h_minus."""
    return h_plus(points, t) - h_minus(points, t)


def h_pm_batch(configs: np.ndarray, t: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (h_plus, h_minus) over configs of shape (N, m, d)."""
    y = np.asarray(configs, dtype=np.float64)
    n, m, _ = y.shape
    t = np.asarray(t, dtype=np.float64)
    hminus = 2.0 * kernels.meb_radius_batch(y) <= t
    hplus = np.ones(n, dtype=bool)
    for omit in range(m):
        sub = np.delete(y, omit, axis=1)
        hplus &= 2.0 * kernels.meb_radius_batch(sub) <= t
    return hplus, hminus
