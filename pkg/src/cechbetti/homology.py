"""Simplicial homology over GF(2): Betti numbers at a fixed parameter,
persistence barcodes of a filtration, and per-component Betti numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import kernels
from .cechcore import FilteredComplex, FilteredSimplex, enumerate_simplices, neighborhood_graph
from .pointproc import PointCloud


@dataclass(frozen=True)
class Barcode:
    dimension: int
    intervals: tuple[tuple[float, float], ...]  # (birth, death), death may be inf

    def betti_at(self, t: float) -> int:
        return sum(1 for b, d in self.intervals if b <= t < d)

    def lifetime_sum(self, t: float) -> float:
        return sum(min(d, t) - min(b, t) for b, d in self.intervals)


@dataclass(frozen=True)
class BettiVector:
    betti: tuple[int, ...]

    def __getitem__(self, q: int) -> int:
        return self.betti[q] if q < len(self.betti) else 0


class UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def _gf2_rank(rows: list[int]) -> int:
    """Rank of a GF(2) matrix whose rows are int bitmasks."""
    rank = 0
    basis: list[int] = []
    for row in rows:
        for b in basis:
            row = min(row, row ^ b)
        if row:
            basis.append(row)
            basis.sort(reverse=True)
            rank += 1
    return rank


def _boundary_rank(sub_lower: list[tuple[int, ...]], sub_upper: list[tuple[int, ...]]) -> int:
    """Rank over GF(2) of the boundary map from span(sub_upper) to
    span(sub_lower)."""
    if not sub_upper or not sub_lower:
        return 0
    index = {s: i for i, s in enumerate(sub_lower)}
    rows = []
    for s in sub_upper:
        mask = 0
        for omit in range(len(s)):
            face = s[:omit] + s[omit + 1 :]
            pos = index.get(face)
            if pos is not None:
                mask |= 1 << pos
        rows.append(mask)
    return _gf2_rank(rows)


def betti_at(complex_: FilteredComplex, t: float, max_q: int) -> BettiVector:
    """Exact Betti numbers of the subcomplex at parameter t, by direct GF(2)
    rank computation (independent of the persistence pipeline)."""
    if t > complex_.cutoff:
        raise ValueError(f"t={t} exceeds the complex cutoff {complex_.cutoff}")
    if max_q >= complex_.max_dim:
        raise ValueError("max_q must be < max_dim of the complex")
    by_dim: dict[int, list[tuple[int, ...]]] = {}
    for s in complex_.simplices:
        if s.value <= t:
            by_dim.setdefault(s.dim, []).append(s.vertices)
    betti = []
    for q in range(max_q + 1):
        nq = len(by_dim.get(q, []))
        rank_dq = _boundary_rank(by_dim.get(q - 1, []), by_dim.get(q, [])) if q > 0 else 0
        rank_dq1 = _boundary_rank(by_dim.get(q, []), by_dim.get(q + 1, []))
        betti.append(nq - rank_dq - rank_dq1)
    return BettiVector(tuple(betti))


def persistence(complex_: FilteredComplex, max_q: int) -> list[Barcode]:
    """Barcodes of the filtration by GF(2) boundary-matrix column reduction.
    Zero-length intervals are dropped."""
    sims = complex_.simplices
    for a, b in zip(sims, sims[1:]):
        if (a.value, a.dim) > (b.value, b.dim):
            raise ValueError("complex is not sorted as a filtration")
    index = {s.vertices: i for i, s in enumerate(sims)}
    offsets = np.zeros(len(sims) + 1, dtype=np.int64)
    faces: list[int] = []
    for i, s in enumerate(sims):
        if s.dim > 0:
            for omit in range(len(s.vertices)):
                face = s.vertices[:omit] + s.vertices[omit + 1 :]
                faces.append(index[face])
        offsets[i + 1] = len(faces)
    positive, death_of = kernels.gf2_reduce(offsets, np.asarray(faces, dtype=np.int64))

    intervals: dict[int, list[tuple[float, float]]] = {q: [] for q in range(max_q + 1)}
    for i, s in enumerate(sims):
        if not positive[i] or s.dim > max_q:
            continue
        j = death_of[i]
        death = math.inf if j < 0 else sims[j].value
        if death > s.value:
            intervals[s.dim].append((s.value, death))
    return [Barcode(q, tuple(sorted(intervals[q]))) for q in range(max_q + 1)]


def barcodes_to_csv(barcodes: list[Barcode], path: str) -> None:
    with open(path, "w") as fh:
        fh.write("q,birth,death\n")
        for bc in barcodes:
            for b, d in bc.intervals:
                fh.write(f"{bc.dimension},{b!r},{'inf' if math.isinf(d) else repr(d)}\n")


def barcodes_from_csv(path: str) -> list[Barcode]:
    per_q: dict[int, list[tuple[float, float]]] = {}
    with open(path) as fh:
        fh.readline()
        for line in fh:
            if not line.strip():
                continue
            q, b, d = line.strip().split(",")
            per_q.setdefault(int(q), []).append((float(b), float(d)))
    return [Barcode(q, tuple(sorted(iv))) for q, iv in sorted(per_q.items())]


def connected_components(n: int, edges: np.ndarray) -> list[list[int]]:
    uf = UnionFind(n)
    for a, b in edges:
        uf.union(int(a), int(b))
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(uf.find(v), []).append(v)
    return [groups[r] for r in sorted(groups)]


def betti_k_of_points(points: np.ndarray, radius: float, k: int) -> int:
    """Betti number beta_k of the Cech complex on `points` at diameter
    parameter `radius`, building simplices up to dimension k+1 only
    (higher simplices cannot change beta_k)."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < k + 2:
        return 0
    fc = enumerate_simplices(pts, max_dim=k + 1, cutoff=radius)
    by_dim: dict[int, list[tuple[int, ...]]] = {}
    for s in fc.simplices:
        by_dim.setdefault(s.dim, []).append(s.vertices)
    nk = len(by_dim.get(k, []))
    if nk == 0:
        return 0
    rank_dk = _boundary_rank(by_dim.get(k - 1, []), by_dim.get(k, []))
    rank_dk1 = _boundary_rank(by_dim.get(k, []), by_dim.get(k + 1, []))
    return nk - rank_dk - rank_dk1


def component_betti(cloud: PointCloud, t: float, k: int) -> list[tuple[int, int]]:
    """Per connected component at radius scale*t: (vertex count, beta_k).

    Components are found by union-find over the length-<=scale*t edges; each
    component's Cech subcomplex is built up to dimension k+1.
    """
    if not 1 <= k < cloud.d:
        raise ValueError("require 1 <= k < d")
    r = cloud.scale * t
    n = len(cloud)
    if n == 0:
        return []
    edges, _ = neighborhood_graph(cloud.points, r)
    out = []
    for comp in connected_components(n, edges):
        size = len(comp)
        bk = betti_k_of_points(cloud.points[comp], r, k) if size >= k + 2 else 0
        out.append((size, bk))
    return out
