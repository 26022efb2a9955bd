"""Command-line entry point.

Subcommands: sample, betti, constants, experiment.  Configuration is one
JSON document, strictly validated (unknown keys rejected) and echoed with
all defaults materialized into a manifest next to the outputs, so every run
is reproducible byte-for-byte.

Exit codes: 0 pass, 1 check failure, 2 config error, 3 resource/budget error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__, kernels
from .betti_process import BettiCurve, betti_curve, census_grid, census_to_csv
from .cechcore import SimplexBudgetError, enumerate_simplices
from .experiments import (
    RegimeConfig,
    check_connectivity_bound,
    check_critical,
    check_poisson,
    check_sparse_clt,
    run_regime,
)
from .homology import barcodes_to_csv, persistence
from .limit_constants import (
    eta,
    eta_table,
    mu,
    mu_matrix,
    nu,
    phi_truncated,
    union_ball_volume,
    volume_D1,
)
from .limit_process_sim import sample_V
from .pointproc import (
    RejectionBudgetError,
    c_f_k,
    cloud_from_csv,
    cloud_to_csv,
    density_from_config,
    sample_poisson_process,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3


class ConfigError(ValueError):
    pass


def _require(cfg: dict, allowed: dict, where: str) -> dict:
    """Strict config block validation: reject unknown keys, apply defaults,
    require keys whose default is the REQUIRED sentinel."""
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    out = {}
    for key, default in allowed.items():
        if key in cfg:
            out[key] = cfg[key]
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r} in {where}")
        else:
            out[key] = default
    return out


REQUIRED = object()

DENSITY_KEYS = {
    "kind": REQUIRED, "d": REQUIRED, "side": 1.0, "origin": 0.0,
    "scale": 1.0, "half_width": None, "box": None, "values": None,
}


def _density(cfg: dict):
    block = _require(cfg, DENSITY_KEYS, "density")
    clean = {k: v for k, v in block.items() if v is not None}
    try:
        return density_from_config(clean), block
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad density config: {exc}") from exc


def _write_manifest(outdir: str, command: str, resolved: dict) -> None:
    manifest = {
        "command": command,
        "config": resolved,
        "versions": {
            "cechbetti": __version__,
            "backend": kernels.BACKEND,
            "numpy": np.__version__,
        },
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _json_dump(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_sample(cfg: dict, outdir: str) -> int:
    allowed = {"density": REQUIRED, "n": REQUIRED, "scale": 1.0, "seed": 0}
    block = _require(cfg, allowed, "sample config")
    density, dblock = _density(block["density"])
    resolved = dict(block, density=dblock)
    cloud = sample_poisson_process(
        density, float(block["n"]), int(block["seed"]), scale=float(block["scale"])
    )
    cloud_to_csv(cloud, os.path.join(outdir, "cloud.csv"))
    _write_manifest(outdir, "sample", resolved)
    return EXIT_OK


def cmd_betti(cfg: dict, outdir: str) -> int:
    allowed = {
        "density": None, "n": None, "scale": 1.0, "seed": 0,
        "cloud_csv": None, "k": REQUIRED, "t_max": REQUIRED,
        "t_grid": None, "budget": None,
    }
    block = _require(cfg, allowed, "betti config")
    if block["cloud_csv"] is not None:
        cloud = cloud_from_csv(block["cloud_csv"])
        resolved = dict(block)
    else:
        if block["density"] is None or block["n"] is None:
            raise ConfigError("betti needs either cloud_csv or (density, n)")
        density, dblock = _density(block["density"])
        cloud = sample_poisson_process(
            density, float(block["n"]), int(block["seed"]), scale=float(block["scale"])
        )
        resolved = dict(block, density=dblock)
    k = int(block["k"])
    t_max = float(block["t_max"])
    t_grid = block["t_grid"] or [t_max]
    kwargs = {} if block["budget"] is None else {"budget": int(block["budget"])}
    fc = enumerate_simplices(cloud.points, max_dim=k + 1, cutoff=cloud.scale * t_max, **kwargs)
    barcodes = persistence(fc, max_q=k)
    barcodes_to_csv(barcodes, os.path.join(outdir, "barcode.csv"))
    curve = BettiCurve.from_barcode(barcodes[k], scale=cloud.scale, t_max=t_max)
    curve.to_csv(os.path.join(outdir, "curve.csv"))
    censuses = census_grid(cloud, k, np.asarray(t_grid, dtype=np.float64))
    for cen, t in zip(censuses, t_grid):
        if cen.betti != curve.value(float(t)):
            raise AssertionError(
                f"census/curve mismatch at t={t}: {cen.betti} != {curve.value(float(t))}"
            )
    census_to_csv(censuses, os.path.join(outdir, "census.csv"), meta=f"k={k}")
    with open(os.path.join(outdir, "lifetime.csv"), "w") as fh:
        fh.write("t,lifetime_sum\n")
        for t in t_grid:
            fh.write(f"{float(t)!r},{curve.lifetime_sum(float(t))!r}\n")
    _write_manifest(outdir, "betti", resolved)
    return EXIT_OK


ESTIMATOR_KEYS = {
    "name": REQUIRED, "k": None, "d": None, "sign": None, "samples": 100000,
    "seed": 0, "t1": None, "t2": None, "i": None, "i1": None, "i2": None,
    "j1": None, "j2": None, "centers": None, "r": None, "density": None,
    "region": None, "M": None, "t_grid": None, "exponent_form": "rescaled",
}


def _run_estimator(block: dict) -> dict:
    name = block["name"]
    samples = int(block["samples"])
    seed = int(block["seed"])
    density = None
    if block["density"] is not None:
        density, _ = _density(block["density"])
    region = None if block["region"] is None else np.asarray(block["region"], dtype=np.float64)

    def record(est, extra=None):
        params = {k: v for k, v in block.items() if k not in ("name",) and v is not None}
        params.pop("density", None)
        rec = {
            "name": name,
            "params": params,
            "value": est.value,
            "std_error": est.std_error,
            "samples": est.samples,
            "seed": est.seed,
        }
        if extra:
            rec.update(extra)
        return rec

    if name == "volume_d1":
        est = volume_D1(int(block["k"]), int(block["d"]), block["sign"], samples, seed)
        return record(est)
    if name == "c_f_k":
        val = c_f_k(density, int(block["k"]))
        return {
            "name": name, "params": {"k": block["k"]}, "value": val,
            "std_error": 0.0, "samples": 0, "seed": seed,
        }
    if name == "mu":
        est = mu(int(block["k"]), float(block["t1"]), float(block["t2"]),
                 density, samples, seed, region=region)
        return record(est)
    if name == "union_ball_volume":
        est = union_ball_volume(
            np.asarray(block["centers"], dtype=np.float64), float(block["r"]), samples, seed
        )
        return record(est)
    if name == "eta":
        est = eta(int(block["i"]), int(block["j1"]), int(block["j2"]),
                  float(block["t1"]), float(block["t2"]), density, int(block["k"]),
                  samples, seed, region=region, exponent_form=block["exponent_form"])
        return record(est)
    if name == "nu":
        est = nu(int(block["i1"]), int(block["i2"]), int(block["j1"]), int(block["j2"]),
                 float(block["t1"]), float(block["t2"]), density, int(block["k"]),
                 samples, seed, region=region)
        return record(est)
    if name == "phi_truncated":
        cov = phi_truncated(int(block["M"]), int(block["k"]),
                            np.asarray(block["t_grid"], dtype=np.float64),
                            density, samples, seed, region=region,
                            exponent_form=block["exponent_form"])
        return {
            "name": name,
            "params": {"M": block["M"], "k": block["k"], "t_grid": block["t_grid"]},
            "value": cov.matrix.tolist(),
            "std_error": cov.std_errors.tolist(),
            "samples": samples,
            "seed": seed,
        }
    raise ConfigError(f"unknown estimator {name!r}")


def cmd_constants(cfg: dict, outdir: str) -> int:
    allowed = {"estimators": REQUIRED}
    block = _require(cfg, allowed, "constants config")
    records = []
    resolved = {"estimators": []}
    for spec in block["estimators"]:
        est_block = _require(spec, ESTIMATOR_KEYS, f"estimator {spec.get('name')!r}")
        resolved["estimators"].append(est_block)
        records.append(_run_estimator(est_block))
    # validated ordering: a +/- volume pair must satisfy minus <= plus
    by_sign = {
        r["params"].get("sign"): r["value"] for r in records if r["name"] == "volume_d1"
    }
    if "+" in by_sign and "-" in by_sign and by_sign["-"] > by_sign["+"]:
        raise AssertionError("volume_d1: sign '-' estimate exceeds sign '+'")
    _json_dump(records, os.path.join(outdir, "constants.json"))
    _write_manifest(outdir, "constants", resolved)
    return EXIT_OK


EXPERIMENT_KEYS = {
    "regime": REQUIRED, "d": REQUIRED, "k": REQUIRED, "density": REQUIRED,
    "n_list": REQUIRED, "t_grid": REQUIRED, "replicates": REQUIRED,
    "base_seed": 0, "truncation": None, "gamma": None, "threads": 1,
    "constants_samples": 200000, "constants_seed": 1,
    "limit_replicates": 0, "tolerances": None, "include_phi": False,
    "connectivity": None,
}


def cmd_experiment(cfg: dict, outdir: str) -> int:
    block = _require(cfg, EXPERIMENT_KEYS, "experiment config")
    density, dblock = _density(block["density"])
    resolved = dict(block, density=dblock)
    k = int(block["k"])
    truncation = block["truncation"]
    if truncation is None:
        truncation = k + 3
        resolved["truncation"] = truncation
    config = RegimeConfig(
        regime=block["regime"], d=int(block["d"]), k=k, density=density,
        n_list=[float(n) for n in block["n_list"]],
        t_grid=np.asarray(block["t_grid"], dtype=np.float64),
        replicates=int(block["replicates"]), base_seed=int(block["base_seed"]),
        truncation=int(truncation),
        gamma=None if block["gamma"] is None else float(block["gamma"]),
        threads=int(block["threads"]),
    )
    summary = run_regime(config)
    _json_dump(summary.to_jsonable(), os.path.join(outdir, "summary.json"))

    samples = int(block["constants_samples"])
    cseed = int(block["constants_seed"])
    tol = block["tolerances"]
    if config.regime == "sparse":
        mu_hat = mu_matrix(k, config.t_grid, density, samples, cseed)
        report = check_sparse_clt(summary, mu_hat, tolerances=tol)
    elif config.regime == "critical":
        tables = {
            i: [
                eta_table(i, float(t), float(t), density, k, samples, cseed + i)
                for t in config.t_grid
            ]
            for i in range(k + 2, config.truncation + 1)
        }
        phi = None
        if block["include_phi"]:
            phi = phi_truncated(config.truncation, k, config.t_grid, density, samples, cseed)
        report = check_critical(summary, tables, phi_hat=phi, tolerances=tol)
    else:
        vp = volume_D1(k, config.d, "+", samples, cseed)
        vm = volume_D1(k, config.d, "-", samples, cseed)
        v_paths = None
        if int(block["limit_replicates"]) > 0:
            v_paths = sample_V(k, config.t_grid, density, int(block["limit_replicates"]), cseed)
        report = check_poisson(summary, c_f_k(density, k), vp, vm, v_samples=v_paths,
                               tolerances=tol)
    if block["connectivity"] is not None:
        conn_reports = []
        for item in block["connectivity"]:
            conn_block = _require(
                item,
                {"i": REQUIRED, "radius": REQUIRED, "replicates": 100000, "seed": 7},
                "connectivity check",
            )
            conn_reports.append(
                check_connectivity_bound(
                    config.d, k, int(conn_block["i"]), float(conn_block["radius"]),
                    density, int(conn_block["replicates"]), int(conn_block["seed"]),
                )
            )
        report["checks"]["connectivity_bound"] = {
            "entries": conn_reports,
            "passed": all(r["passed"] for r in conn_reports),
        }
        report["passed"] = all(c["passed"] for c in report["checks"].values())
    report["config"] = resolved
    _json_dump(report, os.path.join(outdir, "report.json"))
    _write_manifest(outdir, "experiment", resolved)
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cechbetti",
        description="Betti-number processes of random Cech complexes: "
        "simulation, limit constants, and limit-theorem checks.",
    )
    parser.add_argument("command", choices=["sample", "betti", "constants", "experiment"])
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="override worker count")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(cfg, dict):
        print("config error: top level must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        if args.command in ("sample", "betti"):
            cfg["seed"] = args.seed
        elif args.command == "experiment":
            cfg["base_seed"] = args.seed
    if args.threads is not None and args.command == "experiment":
        cfg["threads"] = args.threads
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.command == "sample":
            return cmd_sample(cfg, args.out)
        if args.command == "betti":
            return cmd_betti(cfg, args.out)
        if args.command == "constants":
            return cmd_constants(cfg, args.out)
        return cmd_experiment(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimplexBudgetError, RejectionBudgetError) as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
