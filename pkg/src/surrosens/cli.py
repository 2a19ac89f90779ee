"""Command-line entry points.

Five subcommands cover the workflows: ``simulate`` draws a benchmark
dataset, ``oracle-curve`` tabulates the exact effect against dependence
strength, ``bounds`` estimates the worst-case interval from data,
``sensitivity`` traces the estimated effect over a Kendall's-tau grid with
breakpoint detection, and ``estimate`` targets a single known copula.

Every run is driven by one JSON config (flags override), writes outputs
atomically, and emits a manifest carrying the seed and a digest of the
fully resolved configuration.  Exit codes: 0 success, 2 configuration
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .copulas import (
    DEFAULT_TAU_GRID,
    CopulaFamily,
    CopulaSpec,
    ParameterError,
    TauIsZeroError,
    TauRangeError,
    attainable_tau_range,
    spec_from_tau,
)
from .data import CombinedDataset, DataError, load_dataset, save_dataset, split_complete
from .dml import estimate_bounds, estimate_general, sensitivity_analysis
from .learners import LassoConfig, LogisticConfig, SieveConfig
from .nuisance import NuisanceConfig
from .oracle_dgp import DgpConfig, oracle_curve, simulate
from .qrf import ForestConfig, KnnConfig
from .data import _atomic_write

__all__ = ["main", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

MANIFEST_SCHEMA = "surrosens.manifest.v1"
DATASET_SCHEMA = "surrosens.dataset_csv.v1"
CURVE_SCHEMA = "surrosens.curve_csv.v1"


class ConfigError(ValueError):
    """Invalid or missing run configuration."""


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _copula_from_config(block, allow_frechet=True) -> CopulaSpec:
    if not isinstance(block, dict) or "family" not in block:
        raise ConfigError("copula block must specify a family")
    try:
        family = CopulaFamily(str(block["family"]).lower())
    except ValueError:
        raise ConfigError(f"unknown copula family {block['family']!r}") from None
    if not allow_frechet and family in (CopulaFamily.FRECHET_LOWER, CopulaFamily.FRECHET_UPPER):
        raise ConfigError(
            "frechet bounds are estimated with the bounds command, not estimate"
        )
    try:
        if "theta" in block:
            if family in (CopulaFamily.INDEPENDENCE, CopulaFamily.FRECHET_LOWER,
                          CopulaFamily.FRECHET_UPPER):
                raise ConfigError(f"{family.value} takes no parameter")
            return CopulaSpec(family, float(block["theta"]))
        if "tau" in block:
            return spec_from_tau(family, float(block["tau"]))
        if family in (CopulaFamily.INDEPENDENCE, CopulaFamily.FRECHET_LOWER,
                      CopulaFamily.FRECHET_UPPER):
            return CopulaSpec(family)
    except (ParameterError, TauRangeError, TauIsZeroError) as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError("copula block needs either tau or theta")


def _nuisance_config(cfg: dict, seed: int) -> NuisanceConfig:
    learners = cfg.get("learners", {})
    if not isinstance(learners, dict):
        raise ConfigError("learners block must be an object")
    forest = ForestConfig(**learners.get("forest", {})) if "forest" in learners else ForestConfig()
    knn = KnnConfig(**learners.get("knn", {})) if "knn" in learners else KnnConfig()
    logistic = (
        LogisticConfig(**learners.get("logistic", {}))
        if "logistic" in learners else LogisticConfig()
    )
    lasso = LassoConfig(**learners.get("lasso", {})) if "lasso" in learners else LassoConfig()
    sieve = SieveConfig(**learners.get("sieve", {})) if "sieve" in learners else SieveConfig()
    try:
        return NuisanceConfig(
            clip=float(cfg.get("clip", 0.01)),
            quad_nodes=int(cfg.get("quadrature_nodes", 256)),
            logistic=logistic,
            lasso=lasso,
            forest=forest,
            knn=knn,
            sieve=sieve,
            quantile_learner=str(learners.get("quantile_learner", "forest")),
            cond_mean_all_arms=bool(cfg.get("cond_mean_all_arms", False)),
            seed=seed,
        )
    except TypeError as exc:
        raise ConfigError(f"bad learner configuration: {exc}") from None


def _write_json(path: str, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: str, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    _atomic_write(path, buf.getvalue())


def _write_manifest(out_dir: str, command: str, seed: int, cfg: dict, outputs) -> str:
    path = os.path.join(out_dir, "manifest.json")
    _write_json(
        path,
        {
            "schema": MANIFEST_SCHEMA,
            "command": command,
            "seed": seed,
            "config_digest": _digest(cfg),
            "outputs": sorted(os.path.basename(p) for p in outputs),
            "file_schemas": {
                "dataset_csv": DATASET_SCHEMA,
                "curve_csv": CURVE_SCHEMA,
                "estimate_report": "surrosens.estimate_report.v1",
                "sensitivity_curve": "surrosens.sensitivity_curve.v1",
            },
        },
    )
    return path


def _load_data(args) -> CombinedDataset:
    if args.data is None:
        raise ConfigError("this command requires --data")
    ds = load_dataset(args.data)
    if args.split_seed is not None:
        raise DataError(
            "--split-seed applies to complete files loaded with --complete-data"
        )
    return ds


def _load_complete(path: str, seed: int) -> CombinedDataset:
    """Load a fully observed CSV (w and y on every row) and split it evenly."""
    import csv as _csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if len(header) < 4 or header[:2] != ["w", "y"]:
        raise DataError(f"{path}: complete files need header w,y,s1..sk,x1..xm")
    s_names = [h for h in header[2:] if h.startswith("s")]
    x_names = [h for h in header[2:] if h.startswith("x")]
    if list(header[2:]) != s_names + x_names or not s_names or not x_names:
        raise DataError(f"{path}: unrecognised columns {header[2:]}")
    try:
        arr = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    k = len(s_names)
    return split_complete(arr[:, 2 : 2 + k], arr[:, 2 + k :], arr[:, 0], arr[:, 1], seed)


def _resolve_data(args) -> CombinedDataset:
    if args.complete_data is not None:
        seed = args.split_seed if args.split_seed is not None else args.seed or 0
        return _load_complete(args.complete_data, seed)
    return _load_data(args)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(args, cfg: dict) -> int:
    block = cfg.get("simulate", {})
    if "n" not in block or "rho" not in block:
        raise ConfigError("simulate block must specify n and rho")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    copula = _copula_from_config(block.get("copula", {"family": "independence"}))
    dgp = DgpConfig(
        rho=float(block["rho"]),
        copula=copula,
        n=int(block["n"]),
        seed=seed,
        s_range=tuple(block.get("s_range", (-4.0, 6.0))),
        p_experimental=float(block.get("p_experimental", 0.5)),
        one_draw=bool(block.get("one_draw", False)),
    )
    ds = simulate(dgp)
    out = args.out
    data_path = os.path.join(out, "dataset.csv")
    save_dataset(ds, data_path)
    manifest = _write_manifest(out, "simulate", seed, cfg, [data_path])
    print(f"wrote {data_path} ({ds.n_rows} rows) and {manifest}")
    return EXIT_OK


def cmd_oracle_curve(args, cfg: dict) -> int:
    block = cfg.get("oracle_curve", {})
    families = [CopulaFamily(f) for f in block.get(
        "families", ["gaussian", "clayton", "gumbel", "frank"]
    )]
    rhos = [float(r) for r in block.get("rho_values", [0.1, 0.5, 0.9])]
    grid = [float(t) for t in block.get("grid", DEFAULT_TAU_GRID)]
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    outputs = []
    jobs = []
    for family in families:
        lo, hi = attainable_tau_range(family)
        # clayton and gumbel curves run on nonnegative dependence only
        if family in (CopulaFamily.GUMBEL, CopulaFamily.CLAYTON):
            lo = max(lo, 0.0)
        fam_grid = [t for t in grid if t == 0.0 or lo < t < hi]
        for rho in rhos:
            jobs.append((family, fam_grid, rho))

    def run(job):
        family, fam_grid, rho = job
        return job, oracle_curve(family, fam_grid, rho)

    workers = max(1, args.threads or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    for (family, _, rho), points in results:
        name = f"oracle_curve_{family.value}_rho{rho:g}.csv"
        path = os.path.join(args.out, name)
        _write_csv(path, ["tau_k", "ate"], [[p.tau_k, p.ate] for p in points])
        outputs.append(path)
    manifest = _write_manifest(args.out, "oracle-curve", seed, cfg, outputs)
    print(f"wrote {len(outputs)} curve files and {manifest}")
    return EXIT_OK


def cmd_bounds(args, cfg: dict) -> int:
    ds = _resolve_data(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    ncfg = _nuisance_config(cfg, seed)
    from .nuisance import WORST_CASE_KEYS, assemble_bundle, dump_nuisances

    bundle = assemble_bundle(ds, int(cfg.get("folds", 3)), WORST_CASE_KEYS, ncfg)
    rep = estimate_bounds(ds, int(cfg.get("folds", 3)), ncfg,
                          level=float(cfg.get("level", 0.95)), bundle=bundle)
    rep.config_digest = _digest(cfg)
    path = os.path.join(args.out, "bounds_report.json")
    _write_json(path, rep.to_json_dict())
    csv_path = os.path.join(args.out, "bounds_report.csv")
    _write_csv(csv_path, *rep.csv_rows())
    outputs = [path, csv_path]
    if args.dump_nuisances:
        dump_path = os.path.join(args.out, "nuisances.csv")
        dump_nuisances(bundle, dump_path)
        outputs.append(dump_path)
    manifest = _write_manifest(args.out, "bounds", seed, cfg, outputs)
    print(f"wrote {path} and {manifest}")
    print(
        f"bounds: [{rep.tau['lower']:.4f}, {rep.tau['upper']:.4f}]  "
        f"interval CI: [{rep.interval_ci[0]:.4f}, {rep.interval_ci[1]:.4f}]"
    )
    return EXIT_OK


def cmd_sensitivity(args, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    ncfg = _nuisance_config(cfg, seed)
    try:
        family = CopulaFamily(str(cfg.get("family", "frank")).lower())
    except ValueError:
        raise ConfigError(f"unknown copula family {cfg.get('family')!r}") from None
    grid = [float(t) for t in cfg.get("grid", DEFAULT_TAU_GRID)]
    lo, hi = attainable_tau_range(family)
    bad = [t for t in grid if t != 0.0 and not lo < t < hi]
    if bad:
        raise ConfigError(f"grid values {bad} outside {family.value} range")
    ds = _resolve_data(args)
    curve = sensitivity_analysis(
        ds, family, grid, int(cfg.get("folds", 3)), ncfg,
        level=float(cfg.get("level", 0.95)),
        include_worst_case=bool(cfg.get("worst_case", True)),
        breakpoint_tol=float(cfg.get("breakpoint_tol", 0.002)),
    )
    if curve.worst_case is not None:
        curve.worst_case.config_digest = _digest(cfg)
    header, rows = curve.csv_rows()
    csv_path = os.path.join(args.out, "sensitivity_curve.csv")
    _write_csv(csv_path, header, rows)
    json_path = os.path.join(args.out, "sensitivity_report.json")
    _write_json(json_path, curve.to_json_dict())
    manifest = _write_manifest(args.out, "sensitivity", seed, cfg, [csv_path, json_path])
    print(f"wrote {csv_path}, {json_path}, and {manifest}")
    print(f"breakpoint: {curve.breakpoint}")
    return EXIT_OK


def cmd_estimate(args, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    ncfg = _nuisance_config(cfg, seed)
    copula = _copula_from_config(cfg.get("copula", {}), allow_frechet=False)
    ds = _resolve_data(args)
    from .nuisance import assemble_bundle, dump_nuisances

    bundle = assemble_bundle(ds, int(cfg.get("folds", 3)), [copula], ncfg)
    rep = estimate_general(ds, copula, int(cfg.get("folds", 3)), ncfg,
                           level=float(cfg.get("level", 0.95)), bundle=bundle)
    rep.config_digest = _digest(cfg)
    path = os.path.join(args.out, "estimate_report.json")
    _write_json(path, rep.to_json_dict())
    csv_path = os.path.join(args.out, "estimate_report.csv")
    _write_csv(csv_path, *rep.csv_rows())
    outputs = [path, csv_path]
    if args.dump_nuisances:
        dump_path = os.path.join(args.out, "nuisances.csv")
        dump_nuisances(bundle, dump_path)
        outputs.append(dump_path)
    manifest = _write_manifest(args.out, "estimate", seed, cfg, outputs)
    print(f"wrote {path} and {manifest}")
    print(f"tau_hat: {rep.tau['tau']:.4f}  se: {rep.se['tau']:.4f}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "oracle-curve": cmd_oracle_curve,
    "bounds": cmd_bounds,
    "sensitivity": cmd_sensitivity,
    "estimate": cmd_estimate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surrosens",
        description="Sensitivity analysis of long-term treatment effects "
                    "under copula-modelled treatment-outcome dependence.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--data", help="combined-dataset CSV (sample,w,y,s*,x*)")
    parser.add_argument(
        "--complete-data",
        help="fully observed CSV (w,y,s*,x*) split evenly into the two samples",
    )
    parser.add_argument("--split-seed", type=int, default=None,
                        help="seed for the even split of --complete-data")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker pool cap")
    parser.add_argument("--dump-nuisances", action="store_true",
                        help="also write per-row nuisance values for audit")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _read_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ParameterError, TauRangeError, ValueError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
