"""Regime harness: radius schedules for the sparse / critical / Poisson
regimes, replicated simulation with reproducible per-replicate streams, and
the statistical checks of the limit theorems.

All randomness is addressed by (base seed, n-index, replicate index), so
results are independent of the worker-thread count and reproducible
bit-for-bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .betti_process import census_grid
from .limit_constants import (
    EtaTable,
    LimitCovariance,
    McEstimate,
    connected_batch,
)
from .pointproc import (
    Density,
    PointCloud,
    c_f_k,
    sample_density,
    sample_poisson_process,
    stream,
    unit_ball_volume,
)

REGIMES = ("sparse", "critical", "poisson")

# default relative tolerances and moment windows for the checks; callers can
# override any of them per run
DEFAULT_TOLERANCES = {
    "mean_rel": 0.15,
    "var_rel": 0.15,
    "critical_mean_rel": 0.10,
    "critical_var_rel": 0.20,
    "poisson_mean_rel": 0.10,
    "skewness_max": 0.25,
    "excess_kurtosis_max": 0.5,
    "chi_square_p_min": 0.01,
}


@dataclass
class RegimeConfig:
    regime: str
    d: int
    k: int
    density: Density
    n_list: list[float]
    t_grid: np.ndarray
    replicates: int
    base_seed: int
    truncation: int  # M: component-size cap for beta^{(M)}
    gamma: float | None = None  # sparse radius exponent: s_n = n^-gamma
    threads: int = 1

    def __post_init__(self) -> None:
        self.t_grid = np.asarray(self.t_grid, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not 1 <= self.k < self.d:
            raise ValueError("require 1 <= k < d")
        if self.density.d != self.d:
            raise ValueError("density dimension mismatch")
        if self.replicates < 1 or not self.n_list:
            raise ValueError("need replicates >= 1 and a nonempty n list")
        if self.truncation < self.k + 2:
            raise ValueError("truncation must be >= k+2")
        if np.any(self.t_grid <= 0) or np.any(np.diff(self.t_grid) <= 0):
            raise ValueError("t_grid must be positive and increasing")
        if self.regime == "sparse":
            if self.gamma is None:
                raise ValueError("sparse regime requires gamma")
            lo = 1.0 / self.d
            hi = (self.k + 2) / (self.d * (self.k + 1))
            # symbolic schedule check: n s_n^d -> 0 and rho_n -> infinity
            if not lo < self.gamma < hi:
                raise ValueError(f"gamma must lie in ({lo}, {hi})")
        elif self.gamma is not None:
            raise ValueError("gamma is only meaningful in the sparse regime")

    def scale(self, n: float) -> float:
        if self.regime == "sparse":
            return n ** (-self.gamma)
        if self.regime == "critical":
            return n ** (-1.0 / self.d)
        return n ** (-(self.k + 2) / (self.d * (self.k + 1)))

    def rho(self, n: float) -> float:
        return n ** (self.k + 2) * self.scale(n) ** (self.d * (self.k + 1))

    @property
    def clt_t_bound(self) -> float:
        """Critical-regime CLT validity bound (e ||f||_inf theta_d)^(-1/d)."""
        return (math.e * self.density.sup_norm * unit_ball_volume(self.d)) ** (-1.0 / self.d)


@dataclass
class NStats:
    """Raw per-replicate statistics at one intensity n."""

    n: float
    scale: float
    rho: float
    t_grid: np.ndarray
    beta: np.ndarray  # (R, m) ints
    smallest: np.ndarray  # S_{k,n}
    remainder: np.ndarray  # R_{k,n}
    truncated: np.ndarray  # beta^{(M)}
    u_totals: dict[tuple[int, int, int], int]  # (t-index, i, j) -> total count

    @property
    def replicates(self) -> int:
        return len(self.beta)

    def mean_beta(self) -> np.ndarray:
        return self.beta.mean(axis=0)

    def cov_beta(self) -> np.ndarray | None:
        if self.replicates < 2:
            return None
        return np.cov(self.beta.T, ddof=1).reshape(len(self.t_grid), len(self.t_grid))

    def var_truncated(self) -> np.ndarray | None:
        if self.replicates < 2:
            return None
        return self.truncated.var(axis=0, ddof=1)

    def standardized_moments(self, which: str = "beta") -> tuple[np.ndarray, np.ndarray]:
        """(skewness, excess kurtosis) per grid point."""
        x = getattr(self, which).astype(np.float64)
        mu = x.mean(axis=0)
        sd = x.std(axis=0, ddof=0)
        sd = np.where(sd == 0, np.nan, sd)
        z = (x - mu) / sd
        return (z**3).mean(axis=0), (z**4).mean(axis=0) - 3.0

    def u_mean(self, t_index: int, i: int, j: int) -> float:
        return self.u_totals.get((t_index, i, j), 0) / self.replicates

    def pmf(self, t_index: int) -> dict[int, int]:
        vals, counts = np.unique(self.beta[:, t_index], return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


@dataclass
class RegimeSummary:
    regime: str
    d: int
    k: int
    t_grid: np.ndarray
    truncation: int
    base_seed: int
    per_n: dict[float, NStats] = field(default_factory=dict)
    clt_t_bound: float = math.inf

    @property
    def n_list(self) -> list[float]:
        return sorted(self.per_n)

    @property
    def largest(self) -> NStats:
        return self.per_n[self.n_list[-1]]

    def to_jsonable(self) -> dict:
        out = {
            "regime": self.regime,
            "d": self.d,
            "k": self.k,
            "t_grid": self.t_grid.tolist(),
            "truncation": self.truncation,
            "base_seed": self.base_seed,
            "clt_t_bound": self.clt_t_bound,
            "per_n": {},
        }
        for n, st in sorted(self.per_n.items()):
            cov = st.cov_beta()
            skew, kurt = st.standardized_moments()
            out["per_n"][repr(n)] = {
                "n": st.n,
                "scale": st.scale,
                "rho": st.rho,
                "replicates": st.replicates,
                "mean_beta": st.mean_beta().tolist(),
                "cov_beta": None if cov is None else cov.tolist(),
                "mean_smallest": st.smallest.mean(axis=0).tolist(),
                "mean_remainder": st.remainder.mean(axis=0).tolist(),
                "mean_truncated": st.truncated.mean(axis=0).tolist(),
                "var_truncated": (
                    None if st.var_truncated() is None else st.var_truncated().tolist()
                ),
                "skewness": skew.tolist(),
                "excess_kurtosis": kurt.tolist(),
                "u_totals": {
                    f"{ti},{i},{j}": c for (ti, i, j), c in sorted(st.u_totals.items())
                },
            }
        return out


def _replicate_stats(args: tuple) -> tuple:
    """One replicate: sample a cloud, run the multi-t census, return the
    per-t counts.  Module-level so process pools can pickle it."""
    density, n, scale, k, t_grid, truncation, base_seed, n_index, rep = args
    rng = stream(base_seed, n_index, rep)
    cloud = sample_poisson_process(density, n, rng, scale=scale)
    censuses = census_grid(cloud, k, t_grid)
    beta = np.array([c.betti for c in censuses], dtype=np.int64)
    smallest = np.array([c.smallest_cycle_count for c in censuses], dtype=np.int64)
    remainder = np.array([c.remainder for c in censuses], dtype=np.int64)
    truncated = np.array([c.truncated_betti(truncation) for c in censuses], dtype=np.int64)
    counts = [sorted(c.counts.items()) for c in censuses]
    return beta, smallest, remainder, truncated, counts


def run_regime(config: RegimeConfig) -> RegimeSummary:
    """R replicates per n; deterministic per-replicate streams and an
    index-ordered aggregation fold, so thread count never changes results."""
    config.validate()
    summary = RegimeSummary(
        regime=config.regime,
        d=config.d,
        k=config.k,
        t_grid=config.t_grid,
        truncation=config.truncation,
        base_seed=config.base_seed,
        clt_t_bound=config.clt_t_bound,
    )
    m = len(config.t_grid)
    for n_index, n in enumerate(config.n_list):
        scale = config.scale(n)
        tasks = [
            (
                config.density, n, scale, config.k, config.t_grid,
                config.truncation, config.base_seed, n_index, rep,
            )
            for rep in range(config.replicates)
        ]
        if config.threads > 1:
            with ProcessPoolExecutor(max_workers=config.threads) as pool:
                results = list(
                    pool.map(_replicate_stats, tasks, chunksize=max(1, len(tasks) // (8 * config.threads)))
                )
        else:
            results = [_replicate_stats(t) for t in tasks]
        beta = np.zeros((config.replicates, m), dtype=np.int64)
        smallest = np.zeros_like(beta)
        remainder = np.zeros_like(beta)
        truncated = np.zeros_like(beta)
        u_totals: dict[tuple[int, int, int], int] = {}
        for rep, (b, s, r, tm, counts) in enumerate(results):
            beta[rep] = b
            smallest[rep] = s
            remainder[rep] = r
            truncated[rep] = tm
            for ti, items in enumerate(counts):
                for (i, j), c in items:
                    key = (ti, i, j)
                    u_totals[key] = u_totals.get(key, 0) + c
        summary.per_n[float(n)] = NStats(
            n=float(n), scale=scale, rho=config.rho(n), t_grid=config.t_grid,
            beta=beta, smallest=smallest, remainder=remainder,
            truncated=truncated, u_totals=u_totals,
        )
    return summary


def _rel_err(value: float, target: float) -> float:
    if target == 0:
        return math.inf if value != 0 else 0.0
    return abs(value - target) / abs(target)


def check_sparse_clt(
    summary: RegimeSummary,
    mu_hat: LimitCovariance,
    tolerances: dict | None = None,
) -> dict:
    """Sparse-regime report: rho^-1-scaled mean and covariance of beta against
    the mu-hat matrix, negligibility of the remainder, and normality
    diagnostics of the standardized Betti numbers at the largest n."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    if not np.allclose(summary.t_grid, mu_hat.grid):
        raise ValueError("mu matrix grid does not match the summary grid")
    st = summary.largest
    mean_scaled = st.mean_beta() / st.rho
    cov = st.cov_beta()
    report: dict = {"regime": "sparse", "n": st.n, "rho": st.rho, "checks": {}}
    diag = np.diag(mu_hat.matrix)
    report["checks"]["mean_vs_mu"] = {
        "scaled_mean": mean_scaled.tolist(),
        "mu_diagonal": diag.tolist(),
        "rel_err": [_rel_err(a, b) for a, b in zip(mean_scaled, diag)],
        "passed": all(_rel_err(a, b) <= tol["mean_rel"] for a, b in zip(mean_scaled, diag)),
    }
    if cov is not None:
        cov_scaled = cov / st.rho
        report["checks"]["cov_symmetric"] = {
            "passed": bool(np.array_equal(cov_scaled, cov_scaled.T))
        }
        report["checks"]["cov_vs_mu"] = {
            "scaled_cov": cov_scaled.tolist(),
            "mu_matrix": mu_hat.matrix.tolist(),
            "rel_err_diag": [
                _rel_err(a, b) for a, b in zip(np.diag(cov_scaled), diag)
            ],
            "passed": all(
                _rel_err(a, b) <= tol["var_rel"] for a, b in zip(np.diag(cov_scaled), diag)
            ),
        }
    rem = [summary.per_n[n].remainder.mean(axis=0) / summary.per_n[n].rho
           for n in summary.n_list]
    rem = np.array(rem)
    report["checks"]["remainder_negligible"] = {
        "scaled_mean_remainder_by_n": rem.tolist(),
        "passed": bool(np.all(np.diff(rem, axis=0) < 0)),
    }
    skew, kurt = st.standardized_moments()
    z = (st.beta - st.mean_beta()) / st.beta.std(axis=0, ddof=0)
    ks = [float(sstats.kstest(z[:, a], "norm").statistic) for a in range(z.shape[1])]
    report["checks"]["normality"] = {
        "skewness": skew.tolist(),
        "excess_kurtosis": kurt.tolist(),
        "ks_distance": ks,
        "passed": bool(
            np.all(np.abs(skew) <= tol["skewness_max"])
            and np.all(np.abs(kurt) <= tol["excess_kurtosis_max"])
        ),
    }
    report["passed"] = all(c["passed"] for c in report["checks"].values())
    return report


def check_critical(
    summary: RegimeSummary,
    eta_tables: dict[int, list[EtaTable]],
    phi_hat: LimitCovariance | None = None,
    tolerances: dict | None = None,
) -> dict:
    """Critical-regime report: per-class means n^-1 E U_{i,j} against
    eta-hat/i!, the truncated variance against Phi-hat, the SLLN trend, and
    (inside the CLT t-bound) normality diagnostics.

    eta_tables: cluster size i -> one EtaTable per grid point, estimated at
    (t, t)."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    st = summary.largest
    m = len(summary.t_grid)
    report: dict = {"regime": "critical", "n": st.n, "checks": {}}

    class_checks = []
    for i, tables in sorted(eta_tables.items()):
        for ti in range(m):
            tab = tables[ti]
            jmax = math.comb(i, summary.k + 1)
            for j in range(1, jmax + 1):
                target = tab.cell(j, j).value / math.factorial(i)
                observed = st.u_mean(ti, i, j) / st.n
                if target == 0.0 and observed == 0.0:
                    continue
                entry = {
                    "i": i, "j": j, "t": float(summary.t_grid[ti]),
                    "observed": observed, "target": target,
                    "rel_err": _rel_err(observed, target),
                    "passed": _rel_err(observed, target) <= tol["critical_mean_rel"],
                }
                class_checks.append(entry)
    report["checks"]["class_means"] = {
        "entries": class_checks,
        "passed": all(e["passed"] for e in class_checks),
    }

    if phi_hat is not None and st.var_truncated() is not None:
        var_scaled = st.var_truncated() / st.n
        diag = np.diag(phi_hat.matrix)
        report["checks"]["truncated_variance"] = {
            "scaled_var": var_scaled.tolist(),
            "phi_diagonal": diag.tolist(),
            "rel_err": [_rel_err(a, b) for a, b in zip(var_scaled, diag)],
            "passed": all(
                _rel_err(a, b) <= tol["critical_var_rel"]
                for a, b in zip(var_scaled, diag)
            ),
        }

    # SLLN: beta/n approaches the truncated eta-sum, deviation shrinking in n
    targets = np.zeros(m)
    for i, tables in sorted(eta_tables.items()):
        for ti in range(m):
            targets[ti] += tables[ti].weighted_diag_sum() / math.factorial(i)
    devs = np.array(
        [np.abs(summary.per_n[n].mean_beta() / n - targets) for n in summary.n_list]
    )
    report["checks"]["slln_trend"] = {
        "targets": targets.tolist(),
        "deviation_by_n": devs.tolist(),
        "passed": bool(np.all(devs[-1] <= devs[0])),
    }

    inside = summary.t_grid < summary.clt_t_bound
    if inside.any():
        skew, kurt = st.standardized_moments("truncated")
        report["checks"]["normality"] = {
            "t_in_bound": summary.t_grid[inside].tolist(),
            "skewness": skew[inside].tolist(),
            "excess_kurtosis": kurt[inside].tolist(),
            "passed": bool(
                np.all(np.abs(skew[inside]) <= tol["skewness_max"])
                and np.all(np.abs(kurt[inside]) <= tol["excess_kurtosis_max"])
            ),
        }
    if not inside.all():
        report["notices"] = [
            f"CLT diagnostics suppressed for t >= {summary.clt_t_bound:.4f}: "
            f"{summary.t_grid[~inside].tolist()}"
        ]
    report["passed"] = all(c["passed"] for c in report["checks"].values())
    return report


def poisson_lambda(
    t: float, d: int, k: int, cfk: float, vol_plus: McEstimate, vol_minus: McEstimate
) -> float:
    """lambda-hat(t) = C_{f,k} (m(D_1^+) - m(D_1^-)) t^{d(k+1)}."""
    return cfk * (vol_plus.value - vol_minus.value) * t ** (d * (k + 1))


def _pool_expected(probs: np.ndarray, total: float, min_expected: float = 5.0):
    """Pool adjacent categories until every expected count is >= 5.
    Returns a list of index groups."""
    groups: list[list[int]] = []
    cur: list[int] = []
    acc = 0.0
    for idx, p in enumerate(probs):
        cur.append(idx)
        acc += p * total
        if acc >= min_expected:
            groups.append(cur)
            cur = []
            acc = 0.0
    if cur:
        if groups:
            groups[-1].extend(cur)
        else:
            groups.append(cur)
    return groups


def poisson_gof(values: np.ndarray, lam: float, min_expected: float = 5.0) -> dict:
    """Chi-square goodness of fit of integer samples against Poisson(lam),
    with tail categories pooled to expected counts >= min_expected."""
    values = np.asarray(values, dtype=np.int64)
    total = len(values)
    vmax = int(values.max(initial=0))
    support = np.arange(vmax + 1)
    probs = sstats.poisson.pmf(support, lam)
    probs = np.append(probs, max(1.0 - probs.sum(), 0.0))  # tail > vmax
    observed = np.bincount(values, minlength=vmax + 1).astype(np.float64)
    observed = np.append(observed, 0.0)
    groups = _pool_expected(probs, total, min_expected)
    obs = np.array([observed[g].sum() for g in groups])
    exp = np.array([probs[g].sum() * total for g in groups])
    if len(groups) < 2:
        return {"statistic": 0.0, "p_value": 1.0, "bins": len(groups)}
    exp *= obs.sum() / exp.sum()
    stat = float(((obs - exp) ** 2 / exp).sum())
    p = float(sstats.chi2.sf(stat, len(groups) - 1))
    return {"statistic": stat, "p_value": p, "bins": len(groups)}


def two_sample_chi_square(a: list, b: list, min_count: int = 5) -> dict:
    """Two-sample chi-square comparison of category samples (hashable
    categories; rare categories pooled)."""
    cats: dict = {}
    for x in a:
        cats.setdefault(x, [0, 0])[0] += 1
    for x in b:
        cats.setdefault(x, [0, 0])[1] += 1
    items = sorted(cats.items(), key=lambda kv: -(kv[1][0] + kv[1][1]))
    pooled: list[list[int]] = []
    rare = [0, 0]
    for _, (ca, cb) in items:
        if ca + cb >= min_count:
            pooled.append([ca, cb])
        else:
            rare[0] += ca
            rare[1] += cb
    if rare[0] + rare[1] > 0:
        pooled.append(rare)
    table = np.array(pooled, dtype=np.float64)
    if len(table) < 2:
        return {"statistic": 0.0, "p_value": 1.0, "bins": len(table)}
    stat, p, _, _ = sstats.chi2_contingency(table.T)
    return {"statistic": float(stat), "p_value": float(p), "bins": len(table)}


def check_poisson(
    summary: RegimeSummary,
    cfk: float,
    vol_plus: McEstimate,
    vol_minus: McEstimate,
    v_samples: list | None = None,
    tolerances: dict | None = None,
) -> dict:
    """Poisson-regime report: per-t mean against lambda-hat(t), chi-square
    goodness of fit against Poisson(lambda-hat(t)), the exact scaling
    identity of lambda-hat, and (optionally) a joint two-sample comparison
    against limit-process paths."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    st = summary.largest
    d, k = summary.d, summary.k
    report: dict = {"regime": "poisson", "n": st.n, "checks": {}}
    per_t = []
    for ti, t in enumerate(summary.t_grid):
        lam = poisson_lambda(float(t), d, k, cfk, vol_plus, vol_minus)
        mean = float(st.beta[:, ti].mean())
        gof = poisson_gof(st.beta[:, ti], lam)
        per_t.append(
            {
                "t": float(t),
                "lambda_hat": lam,
                "mean": mean,
                "mean_rel_err": _rel_err(mean, lam),
                "mean_passed": _rel_err(mean, lam) <= tol["poisson_mean_rel"],
                "gof": gof,
                "gof_passed": gof["p_value"] > tol["chi_square_p_min"],
            }
        )
    report["checks"]["per_t"] = {
        "entries": per_t,
        "passed": all(e["mean_passed"] and e["gof_passed"] for e in per_t),
    }
    t0 = float(summary.t_grid[0])
    lam1 = poisson_lambda(t0, d, k, cfk, vol_plus, vol_minus)
    lam2 = poisson_lambda(2 * t0, d, k, cfk, vol_plus, vol_minus)
    report["checks"]["scaling_identity"] = {
        "ratio": lam2 / lam1,
        "expected": 2.0 ** (d * (k + 1)),
        "passed": lam2 / lam1 == 2.0 ** (d * (k + 1)),
    }
    if v_samples is not None:
        finite = [tuple(int(v) for v in st.beta[r]) for r in range(st.replicates)]
        limit = [tuple(int(v) for v in s.values) for s in v_samples]
        comp = two_sample_chi_square(finite, limit)
        report["checks"]["two_sample_vs_limit"] = {
            **comp,
            "passed": comp["p_value"] > tol["chi_square_p_min"],
        }
    report["passed"] = all(c["passed"] for c in report["checks"].values())
    return report


def check_connectivity_bound(
    d: int,
    k: int,
    i: int,
    radius: float,
    density: Density,
    replicates: int,
    seed: int,
) -> dict:
    """Empirical connection probability of i i.i.d. f-points at distance
    threshold `radius` against the spanning-tree bound
    i^(i-2) (r^d ||f||_inf theta_d)^(i-1), allowing 3 binomial std errors."""
    if i < 2:
        raise ValueError("i must be >= 2")
    rng = stream(seed, 41, i)
    pts = sample_density(density, replicates * i, rng).reshape(replicates, i, d)
    connected = connected_batch(pts, radius)
    p_hat = float(connected.mean())
    se = math.sqrt(p_hat * (1 - p_hat) / replicates)
    bound = i ** (i - 2) * (radius**d * density.sup_norm * unit_ball_volume(d)) ** (i - 1)
    return {
        "i": i,
        "radius": radius,
        "empirical": p_hat,
        "std_error": se,
        "bound": bound,
        "passed": p_hat <= bound + 3 * se,
    }
