"""Command-line interface: analyze real z scores, trace paths, run simulations.

Commands
--------
analyze   full pipeline on a z-score file; writes discoveries.csv, sites.json,
          path_trace.csv, densities.json
path      same pipeline, emitting only the per-lambda trace CSV
simulate  experiment runs driven by a declarative JSON config; writes
          per-replicate metrics.csv and an aggregated summary.csv

All randomness flows from the single seed in the effective configuration, and
every output file starts with a header block recording the package version,
a hash of that configuration, and the seed, so identical invocations produce
byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .densities import EstimationError
from .graphs import SiteGraph, build_grid_graph
from .path import default_lambda_grid
from .pipeline import AnalysisOptions, analyze_zscores
from .simulate import (ALTERNATIVES, DEFAULT_METHODS, aggregate_metrics, make_prior_image,
                       run_experiment)

__all__ = ["main"]

FULL_SCALE_GRID = (128, 128)
FULL_SCALE_REPLICATES = 100


class _CliError(Exception):
    """User-facing failure with a process exit code."""

    def __init__(self, message, code=2):
        super().__init__(message)
        self.code = code


def _fmt(value) -> str:
    """Numbers at 10 significant digits; bools as 0/1; text verbatim."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return str(value)


def _round10(value):
    if isinstance(value, float):
        return float(f"{value:.10g}")
    if isinstance(value, list):
        return [_round10(v) for v in value]
    if isinstance(value, dict):
        return {k: _round10(v) for k, v in value.items()}
    return value


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _meta(config: dict) -> dict:
    return {"version": __version__, "config_hash": _config_hash(config),
            "seed": config.get("seed", 0)}


def _header_lines(config: dict) -> list[str]:
    meta = _meta(config)
    return [f"# fdrsmooth {meta['version']}",
            f"# config_hash: {meta['config_hash']}",
            f"# seed: {meta['seed']}"]


def _write_csv(path: Path, config: dict, fieldnames: list[str], rows: list[dict]):
    with open(path, "w", newline="") as fh:
        for line in _header_lines(config):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fieldnames])


def _write_json(path: Path, config: dict, payload: dict):
    with open(path, "w") as fh:
        json.dump({"meta": _meta(config), **_round10(payload)}, fh,
                  sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# input parsing


def _read_grid_zscores(path: str, n_expected: int) -> np.ndarray:
    values = []
    try:
        fh = open(path)
    except OSError as err:
        raise _CliError(f"cannot read --input file: {err}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            for token in text.replace(",", " ").split():
                try:
                    values.append(float(token))
                except ValueError:
                    raise _CliError(
                        f"{path}:{lineno}: not a number: {token!r}") from None
    if len(values) != n_expected:
        raise _CliError(f"{path}: expected {n_expected} z values for the grid, "
                        f"found {len(values)}")
    return np.asarray(values)


def _read_site_zscores(path: str) -> np.ndarray:
    """CSV with columns (site_id, z); ids must be dense 0..n-1."""
    pairs = {}
    try:
        fh = open(path)
    except OSError as err:
        raise _CliError(f"cannot read --input file: {err}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p for p in text.replace(",", " ").split()]
            if lineno == 1 and parts and not _is_number(parts[0]):
                continue  # header row
            if len(parts) != 2:
                raise _CliError(f"{path}:{lineno}: expected 'site_id, z', got {text!r}")
            if not _is_number(parts[0]) or not _is_number(parts[1]):
                raise _CliError(f"{path}:{lineno}: expected 'site_id, z', got {text!r}")
            site = int(float(parts[0]))
            if site in pairs:
                raise _CliError(f"{path}:{lineno}: duplicate site id {site}")
            pairs[site] = float(parts[1])
    n = len(pairs)
    if n == 0:
        raise _CliError(f"{path}: no data rows")
    if sorted(pairs) != list(range(n)):
        raise _CliError(f"{path}: site ids must be dense integers 0..{n - 1}")
    return np.array([pairs[i] for i in range(n)])


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _read_edge_list(path: str, n_nodes: int) -> SiteGraph:
    edges = []
    try:
        fh = open(path)
    except OSError as err:
        raise _CliError(f"cannot read --edges file: {err}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.replace(",", " ").split()
            if len(parts) != 2:
                raise _CliError(f"{path}:{lineno}: expected 'j k', got {text!r}")
            try:
                j, k = int(parts[0]), int(parts[1])
            except ValueError:
                raise _CliError(f"{path}:{lineno}: expected integer ids, "
                                f"got {text!r}") from None
            if not (0 <= j < n_nodes and 0 <= k < n_nodes):
                raise _CliError(f"{path}:{lineno}: edge ({j}, {k}) outside 0..{n_nodes - 1}")
            if j == k:
                raise _CliError(f"{path}:{lineno}: self-loop at node {j}")
            edges.append((j, k))
    try:
        return SiteGraph.from_edges(n_nodes, edges)
    except ValueError as err:
        raise _CliError(f"{path}: {err}") from None


def _parse_grid_spec(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise _CliError(f"--grid must look like ROWSxCOLS, got {text!r}")
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise _CliError(f"--grid must look like ROWSxCOLS, got {text!r}") from None
    if rows < 1 or cols < 1:
        raise _CliError(f"--grid dimensions must be positive, got {text!r}")
    return rows, cols


def _parse_lambda_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise _CliError(f"--lambda-grid must look like MIN:MAX:COUNT, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise _CliError(f"--lambda-grid must look like MIN:MAX:COUNT, got {text!r}") from None
    if not 0 < lo <= hi or count < 1:
        raise _CliError(f"--lambda-grid needs 0 < MIN <= MAX and COUNT >= 1, got {text!r}")
    if count == 1 or lo == hi:
        return np.array([hi])
    return np.geomspace(hi, lo, count)


def _validate_q(q: float):
    if not 0.0 < q < 1.0:
        raise _CliError(f"--fdr must lie strictly between 0 and 1, got {q}")


# ---------------------------------------------------------------------------
# commands


def _load_analysis_inputs(args):
    if (args.grid is None) == (args.edges is None):
        raise _CliError("exactly one of --grid or --edges is required")
    _validate_q(args.fdr)
    if args.sigma0 <= 0:
        raise _CliError(f"--sigma0 must be positive, got {args.sigma0}")
    if args.pr_passes < 1:
        raise _CliError(f"--pr-passes must be >= 1, got {args.pr_passes}")
    if args.grid is not None:
        rows, cols = _parse_grid_spec(args.grid)
        graph = build_grid_graph(rows, cols)
        z = _read_grid_zscores(args.input, graph.n_nodes)
        graph_spec = {"grid": [rows, cols]}
    else:
        z = _read_site_zscores(args.input)
        graph = _read_edge_list(args.edges, z.size)
        graph_spec = {"edges": os.path.basename(args.edges), "n_nodes": z.size}
    lambdas = (_parse_lambda_grid(args.lambda_grid) if args.lambda_grid
               else default_lambda_grid())
    config = {
        "command": "analyze",
        "input": os.path.basename(args.input),
        "graph": graph_spec,
        "null": args.null,
        "mu0": args.mu0,
        "sigma0": args.sigma0,
        "fdr": args.fdr,
        "lambda_grid": [float(f"{v:.10g}") for v in lambdas],
        "pr_passes": args.pr_passes,
        "seed": args.seed,
    }
    options = AnalysisOptions(null_mode=args.null, mu0=args.mu0, sigma0=args.sigma0,
                              pr_passes=args.pr_passes, lambda_grid=lambdas,
                              q=args.fdr, seed=args.seed)
    return z, graph, options, config


def _run_pipeline(z, graph, options):
    try:
        return analyze_zscores(z, graph, options)
    except EstimationError as err:
        raise _CliError(f"estimation failed: {err}", code=3) from None


def _path_trace_rows(result):
    return result.path.trace_rows()


PATH_TRACE_FIELDS = ["lambda", "loglik", "plateaus", "aic", "bic", "selected"]


def cmd_analyze(args) -> int:
    z, graph, options, config = _load_analysis_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = _run_pipeline(z, graph, options)

    report = result.report
    site_rows = [{"site_id": i, "z": z[i], "w": report.w[i], "lfdr": report.lfdr[i],
                  "discovered": bool(report.discovered[i])} for i in range(z.size)]
    _write_csv(out / "discoveries.csv", config,
               ["site_id", "z", "w", "lfdr", "discovered"], site_rows)
    _write_csv(out / "path_trace.csv", config, PATH_TRACE_FIELDS,
               _path_trace_rows(result))
    _write_json(out / "sites.json", config, {
        "n_sites": int(z.size),
        "q": options.q,
        "n_discoveries": report.n_discoveries,
        "estimated_fdr": report.estimated_fdr,
        "selected_lambda": result.path.selected.lam,
        "z": z.tolist(),
        "beta": result.beta.tolist(),
        "prior_prob": result.prior_prob.tolist(),
        "w": report.w.tolist(),
        "lfdr": report.lfdr.tolist(),
        "discovered": report.discovered.astype(int).tolist(),
    })
    _write_json(out / "densities.json", config, {
        "pi0": result.pi0,
        "two_groups": result.two_groups.to_dict(),
    })
    return 0


def cmd_path(args) -> int:
    z, graph, options, config = _load_analysis_inputs(args)
    config["command"] = "path"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = _run_pipeline(z, graph, options)
    _write_csv(out / "path_trace.csv", config, PATH_TRACE_FIELDS,
               _path_trace_rows(result))
    return 0


def _as_list(value, name):
    if isinstance(value, str):
        return [value]
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return value
    raise _CliError(f"simulate config: {name!r} must be a string or list of strings")


def _load_experiment_config(args) -> dict:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise _CliError(f"cannot read --config file: {err}") from None
    except json.JSONDecodeError as err:
        raise _CliError(f"{args.config}:{err.lineno}: invalid JSON: {err.msg}") from None
    if not isinstance(raw, dict):
        raise _CliError(f"{args.config}: top level must be a JSON object")

    scenarios = _as_list(raw.get("scenarios", raw.get("scenario", "large")), "scenarios")
    alternatives = _as_list(raw.get("alternatives", raw.get("alternative", "alt1")),
                            "alternatives")
    methods = _as_list(raw.get("methods", list(DEFAULT_METHODS)), "methods")
    grid = raw.get("grid", [64, 64])
    replicates = int(raw.get("replicates", 20))
    q = float(raw.get("q", 0.10))
    seed = int(raw.get("seed", 0)) if args.seed is None else args.seed

    if args.full_scale:
        grid = list(FULL_SCALE_GRID)
        replicates = FULL_SCALE_REPLICATES
    if (not isinstance(grid, list)) or len(grid) != 2:
        raise _CliError(f"simulate config: 'grid' must be [rows, cols], got {grid!r}")
    rows, cols = int(grid[0]), int(grid[1])
    if replicates < 1:
        raise _CliError(f"simulate config: 'replicates' must be >= 1, got {replicates}")
    _validate_q(q)
    for scenario in scenarios:
        try:
            make_prior_image(scenario, rows, cols)
        except ValueError as err:
            raise _CliError(f"simulate config: {err}") from None
    for alt in alternatives:
        if alt not in ALTERNATIVES:
            raise _CliError(f"simulate config: unknown alternative {alt!r}; "
                            f"choose from {sorted(ALTERNATIVES)}")
    known_methods = set(DEFAULT_METHODS)
    for method in methods:
        if method not in known_methods:
            raise _CliError(f"simulate config: unknown method {method!r}; "
                            f"choose from {sorted(known_methods)}")
    return {"command": "simulate", "scenarios": scenarios,
            "alternatives": alternatives, "methods": methods,
            "grid": [rows, cols], "replicates": replicates, "q": q, "seed": seed}


def cmd_simulate(args) -> int:
    config = _load_experiment_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_jobs = args.threads if args.threads else (os.cpu_count() or 1)
    rows_out = run_experiment(config["scenarios"], config["alternatives"],
                              replicates=config["replicates"], q=config["q"],
                              methods=tuple(config["methods"]),
                              rows=config["grid"][0], cols=config["grid"][1],
                              seed=config["seed"], n_jobs=n_jobs)
    metric_rows = [{"scenario": r.scenario, "alternative": r.alternative,
                    "method": r.method, "replicate": r.replicate, "tpr": r.tpr,
                    "fdp": r.fdp, "n_discoveries": r.n_discoveries,
                    "error": r.error or ""} for r in rows_out]
    _write_csv(out / "metrics.csv", config,
               ["scenario", "alternative", "method", "replicate", "tpr", "fdp",
                "n_discoveries", "error"], metric_rows)
    summary = aggregate_metrics(rows_out)
    _write_csv(out / "summary.csv", config,
               ["scenario", "alternative", "method", "replicates", "failures",
                "mean_tpr", "mean_fdp"], summary)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdrsmooth",
        description="Spatially adaptive FDR control on graphs.")
    parser.add_argument("--version", action="version", version=f"fdrsmooth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_analysis_flags(p):
        p.add_argument("--input", required=True,
                       help="z-score file: row-major values for --grid, "
                            "or (site_id, z) CSV for --edges")
        p.add_argument("--grid", help="grid dimensions as ROWSxCOLS")
        p.add_argument("--edges", help="edge-list file, one 'j k' pair per line")
        p.add_argument("--null", choices=("theoretical", "empirical"),
                       default="theoretical")
        p.add_argument("--mu0", type=float, default=0.0,
                       help="theoretical null mean (default 0)")
        p.add_argument("--sigma0", type=float, default=1.0,
                       help="theoretical null scale (default 1)")
        p.add_argument("--fdr", type=float, default=0.10,
                       help="target global FDR level (default 0.10)")
        p.add_argument("--lambda-grid", dest="lambda_grid",
                       help="penalty grid as MIN:MAX:COUNT (default 0.02:2.0:20)")
        p.add_argument("--pr-passes", dest="pr_passes", type=int, default=50)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=0,
                       help="worker processes (0 = all cores); replicate-level only")

    p_analyze = sub.add_parser("analyze", help="fit the model and report discoveries")
    add_analysis_flags(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_path = sub.add_parser("path", help="emit the per-lambda diagnostic trace")
    add_analysis_flags(p_path)
    p_path.set_defaults(func=cmd_path)

    p_sim = sub.add_parser("simulate", help="run simulation experiments")
    p_sim.add_argument("--config", required=True,
                       help="JSON experiment config (scenarios, alternatives, grid, "
                            "replicates, q, seed, methods)")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_sim.add_argument("--threads", type=int, default=0,
                       help="worker processes (0 = all cores)")
    p_sim.add_argument("--full-scale", dest="full_scale", action="store_true",
                       help="128x128 grid with 100 replicates")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as err:
        print(f"fdrsmooth: error: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
