"""Pure NumPy/Python implementations of the hot kernels.

Selected by :mod:`cechbetti.kernels` when the compiled extension is missing
or when CECHBETTI_PURE=1 is set.  Same contracts as the compiled versions:
exact minimum enclosing balls, GF(2) boundary reduction, batch enclosing-ball
radii for Monte Carlo indicator evaluation.
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure"


def _ball_from_boundary(pts: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest ball with all of `pts` on its boundary (circumsphere of the
    affine hull).  `pts` has shape (m, d) with m <= d+1."""
    p0 = pts[0]
    if len(pts) == 1:
        return p0.copy(), 0.0
    q = pts[1:] - p0
    a = 2.0 * q @ q.T
    b = np.einsum("ij,ij->i", q, q)
    try:
        lam = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        lam = np.linalg.lstsq(a, b, rcond=None)[0]
    center = p0 + lam @ q
    radius = float(np.linalg.norm(center - p0))
    return center, radius


def meb_ball(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact minimum enclosing ball (Welzl, deterministic input order)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("expected a nonempty (m, d) array of points")
    d = pts.shape[1]
    # scale-aware containment tolerance
    span = float(np.max(np.abs(pts))) + 1.0
    tol = 1e-10 * span

    def welzl(idx: list[int], boundary: list[int]) -> tuple[np.ndarray, float]:
        if not idx or len(boundary) == d + 1:
            if not boundary:
                return pts[0].copy(), -1.0  # empty ball, contains nothing
            return _ball_from_boundary(pts[boundary])
        p = idx[0]
        c, r = welzl(idx[1:], boundary)
        if r >= 0.0 and np.linalg.norm(pts[p] - c) <= r + tol:
            return c, r
        return welzl(idx[1:], boundary + [p])

    c, r = welzl(list(range(len(pts))), [])
    return c, max(r, 0.0)


def meb_radius(points: np.ndarray) -> float:
    return meb_ball(points)[1]


def _radius_batch_3pt(y: np.ndarray) -> np.ndarray:
    """Enclosing-ball radius for triangles, vectorized.  y: (N, 3, d)."""
    a = np.linalg.norm(y[:, 1] - y[:, 2], axis=1)
    b = np.linalg.norm(y[:, 0] - y[:, 2], axis=1)
    c = np.linalg.norm(y[:, 0] - y[:, 1], axis=1)
    sides = np.stack([a, b, c], axis=1)
    smax = sides.max(axis=1)
    acute = 2.0 * smax**2 < (sides**2).sum(axis=1)
    # circumradius R = abc / (4 * area), Heron for the area
    s = sides.sum(axis=1) / 2.0
    area2 = np.clip(s * (s - a) * (s - b) * (s - c), 0.0, None)
    area = np.sqrt(area2)
    with np.errstate(divide="ignore", invalid="ignore"):
        circum = (a * b * c) / (4.0 * area)
    return np.where(acute & (area > 0), circum, smax / 2.0)


def meb_radius_batch(configs: np.ndarray) -> np.ndarray:
    """Minimum enclosing ball radii for a batch of small point sets.

    configs: (N, m, d).  Closed forms for m <= 3, Welzl loop otherwise.
    """
    y = np.asarray(configs, dtype=np.float64)
    n, m, _ = y.shape
    if m == 1:
        return np.zeros(n)
    if m == 2:
        return np.linalg.norm(y[:, 0] - y[:, 1], axis=1) / 2.0
    if m == 3:
        return _radius_batch_3pt(y)
    return np.array([meb_radius(y[i]) for i in range(n)])


def gf2_reduce(offsets: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column reduction of a GF(2) boundary matrix in filtration order.

    Column j has row indices faces[offsets[j]:offsets[j+1]] (strictly below j).
    Returns (positive, death_of): positive[j] is 1 iff column j reduces to
    zero (j creates a cycle); death_of[i] = j if column j kills simplex i,
    else -1.
    """
    ncols = len(offsets) - 1
    positive = np.zeros(ncols, dtype=np.uint8)
    death_of = np.full(ncols, -1, dtype=np.int64)
    reduced: dict[int, frozenset[int]] = {}
    low_inv: dict[int, int] = {}
    for j in range(ncols):
        col = set(faces[offsets[j] : offsets[j + 1]].tolist())
        while col:
            i = max(col)
            j2 = low_inv.get(i)
            if j2 is None:
                break
            col ^= reduced[j2]
        if col:
            i = max(col)
            low_inv[i] = j
            death_of[i] = j
            reduced[j] = frozenset(col)
        else:
            positive[j] = 1
    return positive, death_of
