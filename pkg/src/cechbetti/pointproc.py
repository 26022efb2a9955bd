"""Probability densities on R^d and Poisson point-process sampling.

Densities are immutable; every sampler is a pure function of an explicit
seed so replications can run on disjoint, reproducible streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, stats
from scipy.interpolate import RegularGridInterpolator


class RejectionBudgetError(RuntimeError):
    """Rejection sampler exhausted its attempt budget (bad sup_norm?)."""


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible RNG stream addressed by (seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d: pi^(d/2) / Gamma(d/2 + 1)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class Density:
    """Bounded density with box support. Subclasses fill in the specifics."""

    d: int

    kind = "abstract"

    @property
    def support_box(self) -> np.ndarray:  # (2, d): lower row, upper row
        raise NotImplementedError

    @property
    def sup_norm(self) -> float:
        raise NotImplementedError

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Density at points x of shape (N, d)."""
        raise NotImplementedError

    def integral_power(self, p: int, box: np.ndarray | None = None) -> float:
        """Integral of f^p over `box` (default: the whole support box)."""
        raise NotImplementedError

    def box_volume(self) -> float:
        lo, hi = self.support_box
        return float(np.prod(hi - lo))

    def _clip_box(self, box: np.ndarray | None) -> np.ndarray:
        if box is None:
            return self.support_box
        box = np.asarray(box, dtype=np.float64)
        lo = np.maximum(box[0], self.support_box[0])
        hi = np.minimum(box[1], self.support_box[1])
        return np.stack([lo, np.maximum(hi, lo)])


@dataclass(frozen=True)
class UniformCube(Density):
    side: float = 1.0
    origin: float = 0.0

    kind = "uniform-cube"

    @property
    def support_box(self) -> np.ndarray:
        lo = np.full(self.d, self.origin)
        return np.stack([lo, lo + self.side])

    @property
    def sup_norm(self) -> float:
        return self.side ** (-self.d)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        lo, hi = self.support_box
        inside = np.all((x >= lo) & (x <= hi), axis=1)
        return np.where(inside, self.sup_norm, 0.0)

    def integral_power(self, p: int, box: np.ndarray | None = None) -> float:
        lo, hi = self._clip_box(box)
        return float(np.prod(hi - lo)) * self.sup_norm**p


@dataclass(frozen=True)
class TruncatedGaussian(Density):
    """Isotropic N(0, scale^2 I) truncated to [-half_width, half_width]^d and
    renormalized.  With half_width=None the box is chosen so the discarded
    gaussian mass is below 1e-12."""

    scale: float = 1.0
    half_width: float | None = None

    kind = "truncated-gaussian"

    def __post_init__(self) -> None:
        if self.half_width is None:
            # per-axis mass 1 - eps/d keeps total discarded mass <= 1e-12
            eps = 1e-12 / self.d
            hw = float(self.scale * stats.norm.ppf(1.0 - eps / 2.0))
            object.__setattr__(self, "half_width", hw)

    @property
    def _z1(self) -> float:
        # per-axis normalizer of the truncated 1-d gaussian
        return float(
            stats.norm.cdf(self.half_width / self.scale)
            - stats.norm.cdf(-self.half_width / self.scale)
        )

    @property
    def support_box(self) -> np.ndarray:
        hw = np.full(self.d, self.half_width)
        return np.stack([-hw, hw])

    @property
    def sup_norm(self) -> float:
        peak1d = stats.norm.pdf(0.0, scale=self.scale) / self._z1
        return float(peak1d**self.d)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        inside = np.all(np.abs(x) <= self.half_width, axis=1)
        vals = np.prod(stats.norm.pdf(x, scale=self.scale), axis=1) / self._z1**self.d
        return np.where(inside, vals, 0.0)

    def integral_power(self, p: int, box: np.ndarray | None = None) -> float:
        lo, hi = self._clip_box(box)
        z1 = self._z1
        out = 1.0
        for ax in range(self.d):
            g = lambda u: (stats.norm.pdf(u, scale=self.scale) / z1) ** p  # noqa: E731
            val, _ = integrate.quad(g, lo[ax], hi[ax], limit=200)
            out *= val
        return float(out)


@dataclass(frozen=True)
class GridDensity:
    """Density given as a table on a regular grid with multilinear
    interpolation, normalized to integrate to one over the box."""

    d: int
    box: np.ndarray  # (2, d)
    values: np.ndarray  # shape (m_1, ..., m_d), nonnegative
    _interp: RegularGridInterpolator = field(init=False, repr=False)
    _norm: float = field(init=False, repr=False)

    kind = "custom-grid"

    def __post_init__(self) -> None:
        box = np.asarray(self.box, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        if np.any(vals < 0):
            raise ValueError("grid values must be nonnegative")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "values", vals)
        axes = [np.linspace(box[0, ax], box[1, ax], vals.shape[ax]) for ax in range(self.d)]
        interp = RegularGridInterpolator(axes, vals, bounds_error=False, fill_value=0.0)
        object.__setattr__(self, "_interp", interp)
        object.__setattr__(self, "_norm", 1.0)
        object.__setattr__(self, "_norm", self._raw_integral_power(1))

    @property
    def support_box(self) -> np.ndarray:
        return self.box

    @property
    def sup_norm(self) -> float:
        return float(self.values.max() / self._norm)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self._interp(x) / self._norm

    def box_volume(self) -> float:
        lo, hi = self.box
        return float(np.prod(hi - lo))

    def _clip_box(self, box: np.ndarray | None) -> np.ndarray:
        return Density._clip_box(self, box)  # type: ignore[arg-type]

    def _raw_integral_power(self, p: int, box: np.ndarray | None = None, refine: int = 4) -> float:
        lo, hi = self._clip_box(box)
        npts = [max(2, (self.values.shape[ax] - 1) * refine + 1) for ax in range(self.d)]
        axes = [np.linspace(lo[ax], hi[ax], npts[ax]) for ax in range(self.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = (self._interp(pts) / self._norm) ** p
        vals = vals.reshape([len(a) for a in axes])
        for a in reversed(axes):
            vals = np.trapezoid(vals, a, axis=-1)
        return float(vals)

    def integral_power(self, p: int, box: np.ndarray | None = None) -> float:
        return self._raw_integral_power(p, box)


@dataclass(frozen=True)
class PointCloud:
    """Realization of the intensity-nf Poisson process, with the scale s_n
    used to map process time t to the geometric radius s_n * t."""

    points: np.ndarray  # (N, d)
    d: int
    n: float
    scale: float = 1.0
    seed: int | None = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, self.d)
        object.__setattr__(self, "points", pts)
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def __len__(self) -> int:
        return len(self.points)


def sample_density(density: Density, count: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. points from `density` by rejection against the uniform law on
    the support box with envelope sup_norm."""
    if count == 0:
        return np.empty((0, density.d))
    lo, hi = density.support_box
    sup = density.sup_norm
    ratio = max(sup * density.box_volume(), 1.0)
    budget = int(200 * ratio * (count + 16))
    out: list[np.ndarray] = []
    got = 0
    spent = 0
    while got < count:
        chunk = min(budget - spent, max(1024, int(1.5 * ratio * (count - got))))
        if chunk <= 0:
            raise RejectionBudgetError(
                f"rejection sampling exceeded {budget} proposals; check sup_norm"
            )
        x = rng.uniform(lo, hi, size=(chunk, density.d))
        u = rng.uniform(0.0, sup, size=chunk)
        acc = x[u < density.evaluate(x)]
        spent += chunk
        out.append(acc)
        got += len(acc)
    return np.concatenate(out)[:count]


def sample_poisson_process(
    density: Density,
    n: float,
    seed: int | np.random.Generator,
    scale: float = 1.0,
) -> PointCloud:
    """Poisson process with intensity n*f: Poisson(n) many i.i.d. f-points."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    count = int(rng.poisson(n))
    pts = sample_density(density, count, rng)
    return PointCloud(
        points=pts,
        d=density.d,
        n=n,
        scale=scale,
        seed=None if isinstance(seed, np.random.Generator) else int(seed),
    )


def c_f_k(density: Density, k: int) -> float:
    """The constant (1/(k+2)!) * integral of f^(k+2)."""
    if not 1 <= k < density.d:
        raise ValueError("require 1 <= k < d")
    return density.integral_power(k + 2) / math.factorial(k + 2)


def cloud_to_csv(cloud: PointCloud, path: str) -> None:
    header = f"# d={cloud.d} n={cloud.n} scale={cloud.scale} seed={cloud.seed}"
    cols = ",".join(f"x_{i + 1}" for i in range(cloud.d))
    with open(path, "w") as fh:
        fh.write(header + "\n" + cols + "\n")
        for row in cloud.points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def cloud_from_csv(path: str) -> PointCloud:
    with open(path) as fh:
        meta_line = fh.readline().strip()
        fh.readline()  # column header
        rows = [
            [float(v) for v in line.strip().split(",")] for line in fh if line.strip()
        ]
    meta = dict(item.split("=") for item in meta_line.lstrip("# ").split())
    d = int(meta["d"])
    pts = np.asarray(rows, dtype=np.float64).reshape(-1, d)
    seed = None if meta.get("seed") in (None, "None") else int(meta["seed"])
    return PointCloud(points=pts, d=d, n=float(meta["n"]), scale=float(meta["scale"]), seed=seed)


def density_from_config(cfg: dict) -> Density | GridDensity:
    """Build a density from its JSON config block."""
    kind = cfg.get("kind")
    d = int(cfg["d"])
    if kind == "uniform-cube":
        return UniformCube(d=d, side=float(cfg.get("side", 1.0)), origin=float(cfg.get("origin", 0.0)))
    if kind == "truncated-gaussian":
        hw = cfg.get("half_width")
        return TruncatedGaussian(d=d, scale=float(cfg.get("scale", 1.0)), half_width=None if hw is None else float(hw))
    if kind == "custom-grid":
        return GridDensity(d=d, box=np.asarray(cfg["box"], dtype=np.float64), values=np.asarray(cfg["values"], dtype=np.float64))
    raise ValueError(f"unknown density kind: {kind!r}")
