"""
Configuration-driven experiment runner.

    pathlsi constants --config table.yaml --out results/
    pathlsi verify    --config sphere_lsi.yaml --seed 7 --paths 20000
    pathlsi sweep     --config sweep.yaml --out results/
    pathlsi dump-paths --config ball.yaml --paths 5

Exit codes: 0 when no binding verdict is ``violated``, 1 otherwise, 2 for a
malformed configuration.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from . import constants, functions, heat, inequality, plots
from .errors import ConfigurationError, DomainError
from .geometry import CurvatureBounds, make_model
from .sampler import PathGrid, SamplerConfig, dump_paths_csv, simulate_batch

SCENARIOS = ("lsi", "poincare", "heat-lsi", "constants-table")
EXIT_OK, EXIT_VIOLATED, EXIT_CONFIG = 0, 1, 2

SWEEP_COLUMNS = ["cell", "seed", "params"] + inequality.InequalityReport.CSV_COLUMNS


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError("config must be a mapping")
    return cfg


def apply_overrides(cfg: dict, args) -> dict:
    cfg = copy.deepcopy(cfg)
    if getattr(args, "seed", None) is not None:
        cfg["base_seed"] = args.seed
    if getattr(args, "paths", None) is not None:
        cfg["n_paths"] = args.paths
    if getattr(args, "steps", None) is not None:
        cfg.setdefault("grid", {})["n_steps"] = args.steps
    if getattr(args, "factor2", None) is not None:
        cfg["factor2"] = args.factor2 == "on"
    if getattr(args, "out", None) is not None:
        cfg.setdefault("output", {})["dir"] = args.out
    return cfg


def _require(cfg, key):
    if key not in cfg:
        raise ConfigurationError(f"missing config key {key!r}")
    return cfg[key]


def build_bounds(cfg, model) -> CurvatureBounds:
    spec = cfg.get("bounds", "exact")
    if spec == "exact":
        return model.curvature_bounds()
    if not isinstance(spec, dict):
        raise ConfigurationError("bounds must be 'exact' or a mapping of K1, K2, sigma1, sigma2")
    unknown = set(spec) - {"K1", "K2", "sigma1", "sigma2"}
    if unknown:
        raise ConfigurationError(f"unknown bounds keys {sorted(unknown)}")
    return CurvatureBounds(**{k: float(v) for k, v in spec.items()})


def build_sampler(cfg) -> SamplerConfig:
    grid = _require(cfg, "grid")
    return SamplerConfig(
        grid=PathGrid(float(_require(grid, "T")), int(grid.get("n_steps", 256))),
        n_paths=int(cfg.get("n_paths", 10000)),
        base_seed=int(cfg.get("base_seed", 0)),
        chunk_size=int(cfg.get("chunk_size", 4096)),
        workers=int(cfg.get("workers", 1)),
    )


def build_function(spec, model, integral_kind: bool):
    if not isinstance(spec, dict):
        raise ConfigurationError("function must be a mapping with a 'name'")
    spec = dict(spec)
    name = spec.pop("name", None)
    if integral_kind:
        if name not in functions.INTEGRAL_NAMES:
            raise ConfigurationError(f"heat-lsi needs an integral function, one of {functions.INTEGRAL_NAMES}")
        return functions.integral(name, model.ambient_dim, **spec)
    if name not in functions.POINTWISE_NAMES:
        raise ConfigurationError(f"needs a pointwise function, one of {functions.POINTWISE_NAMES}")
    times = spec.pop("times", None)
    if not times:
        raise ConfigurationError("pointwise function needs 'times'")
    return functions.pointwise(name, times, model.ambient_dim, **spec)


def _values(v):
    return [float(a) for a in (v if isinstance(v, (list, tuple)) else [v])]


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def constants_rows(cfg) -> list:
    spec = _require(cfg, "constants")
    grid = itertools.product(_values(spec.get("K1", 0.0)), _values(spec.get("K2", 0.0)),
                             _values(_require(spec, "T")), _values(spec.get("sigma1", 0.0)),
                             _values(spec.get("sigma2", 0.0)))
    rows = []
    for K1, K2, T, s1, s2 in grid:
        if K2 > K1:
            raise ConfigurationError(f"K2={K2} exceeds K1={K1}")
        b = CurvatureBounds(K1=K1, K2=K2, sigma1=max(s1, s2), sigma2=min(s1, s2))
        rows.append(constants.closed_form_constants(b, T).as_row())
    return rows


def run_scenario(cfg) -> inequality.InequalityReport:
    kind = _require(cfg, "scenario")
    if kind not in SCENARIOS or kind == "constants-table":
        raise ConfigurationError(f"scenario must be one of {SCENARIOS[:3]}")
    model = make_model(_require(cfg, "model"))
    x = cfg.get("x")
    x = model.origin() if x is None else np.asarray(x, dtype=float)
    scfg = build_sampler(cfg)
    F = build_function(_require(cfg, "function"), model, kind == "heat-lsi")
    rhs_scale = float(cfg.get("rhs_scale", 1.0))
    projection = cfg.get("projection", "every")
    if kind == "heat-lsi":
        exact = model.curvature_bounds()
        h = cfg.get("heat", {}) or {}
        return heat.verify_heat_lsi(model, x, F, float(h.get("K", exact.K2)),
                                    float(h.get("sigma", exact.sigma2)), scfg,
                                    closed_form=bool(h.get("closed_form", True)),
                                    projection=projection, rhs_scale=rhs_scale)
    bounds = build_bounds(cfg, model)
    if kind == "lsi":
        return inequality.verify_lsi(model, x, F, bounds, scfg,
                                     factor2=bool(cfg.get("factor2", True)),
                                     projection=projection, rhs_scale=rhs_scale)
    return inequality.verify_poincare(model, x, F, bounds, scfg, rhs_scale=rhs_scale)


def _out_dir(cfg) -> str:
    d = (cfg.get("output") or {}).get("dir", ".")
    os.makedirs(d, exist_ok=True)
    return d


def _write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _report_svg(report, cfg) -> str:
    bars = {"lhs": (report.lhs.value, report.lhs.std_error),
            "rhs": (report.rhs.value, report.rhs.std_error)}
    for c in report.checks:
        if c.rhs.value != 0.0:
            bars[c.name[:14]] = (c.rhs.value, c.rhs.std_error)
    return plots.bar_chart(bars, title=f"{report.kind}: {report.verdict}", ylabel="estimate")


def _curve_svg(cfg, report) -> str:
    T = report.metadata["T"]
    t = np.linspace(0.0, T, 201)
    if report.kind == "heat-lsi":
        K = report.metadata["K"]
        return plots.line_chart({f"A(s), K={K:g}": (t, constants.heat_A(t, T, K))},
                                title="heat weight A(s)", xlabel="s", ylabel="A")
    b = report.metadata["bounds"]
    lam = constants.lambda_fn(t, T, b["K1"], b["K2"])
    return plots.line_chart({f"K1={b['K1']:g}, K2={b['K2']:g}": (t, lam)},
                            title="Lambda(t, T)", xlabel="t", ylabel="Lambda")


def write_report(report, cfg) -> None:
    out = _out_dir(cfg)
    name = (cfg.get("output") or {}).get("name", "report")
    with open(os.path.join(out, f"{name}.json"), "w") as fh:
        fh.write(report.to_json())
    _write_csv(os.path.join(out, f"{name}.csv"), report.CSV_COLUMNS, [report.csv_row()])
    if (cfg.get("output") or {}).get("svg", True):
        with open(os.path.join(out, f"{name}.svg"), "w") as fh:
            fh.write(_report_svg(report, cfg))
        with open(os.path.join(out, f"{name}_curve.svg"), "w") as fh:
            fh.write(_curve_svg(cfg, report))


def _verdict_exit(report) -> int:
    return EXIT_VIOLATED if report.overall_verdict == inequality.VIOLATED else EXIT_OK


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _set_dotted(cfg, key, value):
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"sweep key {key!r} does not address a mapping")
    node[parts[-1]] = value


def cell_seed(base_seed: int, cell: int) -> int:
    ss = np.random.SeedSequence([int(base_seed) & ((1 << 64) - 1), int(cell)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sweep_cells(cfg) -> list:
    spec = cfg.get("sweep") or {}
    if not isinstance(spec, dict) or not spec:
        raise ConfigurationError("empty sweep")
    keys = sorted(spec)
    lists = [spec[k] if isinstance(spec[k], list) else [spec[k]] for k in keys]
    if any(len(v) == 0 for v in lists):
        raise ConfigurationError("empty sweep")
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    cells = []
    for i, combo in enumerate(itertools.product(*lists)):
        c = copy.deepcopy(base)
        for k, v in zip(keys, combo):
            _set_dotted(c, k, v)
        c["base_seed"] = cell_seed(cfg.get("base_seed", 0), i)
        cells.append((i, dict(zip(keys, combo)), c))
    return cells


def _run_cell(item):
    i, params, c = item
    if c.get("scenario") == "constants-table":
        return [dict(row, cell=i, seed=c["base_seed"], params=json.dumps(params, sort_keys=True))
                for row in constants_rows(c)], False
    report = run_scenario(c)
    row = dict(report.csv_row(), cell=i, seed=c["base_seed"],
               params=json.dumps(params, sort_keys=True))
    return [row], report.overall_verdict == inequality.VIOLATED


def run_sweep(cfg) -> int:
    cells = sweep_cells(cfg)
    for _, _, c in cells:
        c["workers"] = 1
    workers = max(1, int(cfg.get("sweep_workers", 1)))
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    rows = [r for rs, _ in results for r in rs]
    if cfg.get("scenario") == "constants-table":
        columns = ["cell", "seed", "params"] + constants.CONSTANTS_COLUMNS
    else:
        columns = SWEEP_COLUMNS
    name = (cfg.get("output") or {}).get("name", "sweep")
    _write_csv(os.path.join(_out_dir(cfg), f"{name}.csv"), columns, rows)
    return EXIT_VIOLATED if any(v for _, v in results) else EXIT_OK


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_constants(cfg) -> int:
    rows = constants_rows(cfg)
    out = _out_dir(cfg)
    name = (cfg.get("output") or {}).get("name", "constants")
    _write_csv(os.path.join(out, f"{name}.csv"), constants.CONSTANTS_COLUMNS, rows)
    if (cfg.get("output") or {}).get("svg", True):
        series = {}
        for r in rows[:6]:
            t = np.linspace(0.0, r["T"], 201)
            series[f"K1={r['K1']:g} K2={r['K2']:g} T={r['T']:g}"] = (
                t, constants.lambda_fn(t, r["T"], r["K1"], r["K2"]))
        with open(os.path.join(out, f"{name}.svg"), "w") as fh:
            fh.write(plots.line_chart(series, title="Lambda(t, T)", xlabel="t", ylabel="Lambda"))
    return EXIT_OK


def cmd_verify(cfg) -> int:
    report = run_scenario(cfg)
    write_report(report, cfg)
    print(f"{report.kind}: lhs={report.lhs.value:.6g} (se {report.lhs.std_error:.2g}) "
          f"rhs={report.rhs.value:.6g} (se {report.rhs.std_error:.2g}) "
          f"verdict={report.verdict} overall={report.overall_verdict}")
    return _verdict_exit(report)


def cmd_dump_paths(cfg) -> int:
    model = make_model(_require(cfg, "model"))
    x = cfg.get("x")
    x = model.origin() if x is None else np.asarray(x, dtype=float)
    scfg = build_sampler(cfg)
    batch = simulate_batch(model, x, scfg, np.arange(scfg.n_paths))
    name = (cfg.get("output") or {}).get("name", "paths")
    dump_paths_csv(batch, os.path.join(_out_dir(cfg), f"{name}.csv"))
    return EXIT_OK


COMMANDS = {"constants": cmd_constants, "verify": cmd_verify, "sweep": run_sweep,
            "dump-paths": cmd_dump_paths}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pathlsi", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="YAML experiment file")
        s.add_argument("--seed", type=int, help="override base_seed (unsigned 64-bit)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--factor2", choices=["on", "off"], help="factor 2 in the log-Sobolev bound")
        s.add_argument("--paths", type=int, help="override n_paths")
        s.add_argument("--steps", type=int, help="override grid.n_steps")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except (ConfigurationError, DomainError, ValueError, KeyError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
