"""Command-line front end: configs in, CSV and JSON out.

Ten subcommands, each a thin binding from flags (or a config file) to one
operation in graph, exact_oracle, or experiments.  A config file holds
``command.key = value`` lines; flags override file values, and the
effective configuration, seed included, is echoed to stdout before the
run.  Results land at the ``--out`` stem as ``<stem>.csv`` plus
``<stem>.json``; gen-graph writes its graph file at ``--out`` verbatim.
Output files are byte-identical across repeated runs of the same
command, so timing is reported on stdout only.

Exit codes: 0 on success, 2 on configuration or domain errors (one-line
diagnostic on stderr), 1 when a run trips a capacity or budget limit.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from typing import Any, Callable, NamedTuple

import numpy as np

from hypercp import __version__, experiments
from hypercp.contact import SimParams, batch_extinction, build_graphical, count_traces, simple_paths
from hypercp.errors import BudgetError, CapacityError
from hypercp.exact_oracle import exact_expected_extinction_time, exact_extinction_probability
from hypercp.graph import Graph, graph_from_edges, load_graph, save_graph
from hypercp.sampler import RngStream

__all__ = ["main", "run"]


# ---------------------------------------------------------------------------
# Option tables
# ---------------------------------------------------------------------------


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ValueError(f"expected a number, got {s!r}") from None


def _parse_int(s: str) -> int:
    try:
        return int(s, 10)
    except ValueError:
        raise ValueError(f"expected an integer, got {s!r}") from None


def _parse_str(s: str) -> str:
    return s


def _parse_floats(s: str) -> tuple[float, ...]:
    parts = [p for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError(f"expected a comma-separated list of numbers, got {s!r}")
    return tuple(_parse_float(p.strip()) for p in parts)


def _parse_ints(s: str) -> tuple[int, ...]:
    parts = [p for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError(f"expected a comma-separated list of integers, got {s!r}")
    return tuple(_parse_int(p.strip()) for p in parts)


def _parse_edges(s: str) -> tuple[tuple[int, int], ...]:
    edges = []
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        a, sep, b = part.partition("-")
        if not sep:
            raise ValueError(f"expected edges like 0-1,1-2, got {part!r}")
        edges.append((_parse_int(a.strip()), _parse_int(b.strip())))
    if not edges:
        raise ValueError(f"expected at least one edge, got {s!r}")
    return tuple(edges)


_REQUIRED = object()


class _Opt(NamedTuple):
    key: str
    conv: Callable[[str], Any]
    default: Any
    help: str


def _common() -> list[_Opt]:
    return [
        _Opt("seed", _parse_int, 0, "master seed for all randomness"),
        _Opt("threads", _parse_int, os.cpu_count() or 1, "trial worker pool size"),
        _Opt("out", _parse_str, None, "output stem; writes <stem>.csv and <stem>.json"),
    ]


_COMMANDS: dict[str, list[_Opt]] = {
    "gen-graph": [
        _Opt("alpha", _parse_float, _REQUIRED, "tail parameter in (1/2, 1)"),
        _Opt("n", _parse_float, _REQUIRED, "model scale; expected vertex count"),
        _Opt("seed", _parse_int, 0, "master seed for all randomness"),
        _Opt("threads", _parse_int, os.cpu_count() or 1, "unused here; accepted for uniformity"),
        _Opt("out", _parse_str, _REQUIRED, "path of the graph file to write"),
    ],
    "degree-fit": [
        _Opt("graph", _parse_str, None, "graph file to fit; omit to sample one"),
        _Opt("alpha", _parse_float, None, "tail parameter, when sampling"),
        _Opt("n", _parse_float, None, "model scale, when sampling"),
        _Opt("bootstrap", _parse_int, 100, "bootstrap resamples for the CI"),
        *_common(),
    ],
    "estimate-gamma": [
        _Opt("alpha", _parse_float, _REQUIRED, "tail parameter in (1/2, 1)"),
        _Opt("lambda", _parse_float, _REQUIRED, "infection rate"),
        _Opt("trials", _parse_int, 1000, "Monte Carlo trials"),
        _Opt("half-width", _parse_float, 30000.0, "truncation window half-width"),
        _Opt("h-cap", _parse_float, math.inf, "truncation window height cap"),
        _Opt("t-max", _parse_float, 1e4, "time horizon per trial"),
        _Opt("escape-radius", _parse_int, 20, "graph-distance survival proxy"),
        _Opt("mass-cap", _parse_int, 100000, "infected-count survival proxy"),
        *_common(),
    ],
    "fit-exponent": [
        _Opt("points", _parse_str, _REQUIRED, "CSV with lam and estimate columns"),
        _Opt("alpha", _parse_float, _REQUIRED, "tail parameter the points share"),
        *_common(),
    ],
    "extinction-scan": [
        _Opt("alpha", _parse_float, _REQUIRED, "tail parameter in (1/2, 1)"),
        _Opt("lambda", _parse_float, _REQUIRED, "infection rate"),
        _Opt("sizes", _parse_floats, _REQUIRED, "comma-separated model scales, ascending"),
        _Opt("trials", _parse_int, 200, "trials per size"),
        _Opt("cap", _parse_float, 1e4, "extinction-time cap"),
        _Opt("engine", _parse_str, "auto", "simulation engine: auto, dynamic, static"),
        *_common(),
    ],
    "density": [
        _Opt("n", _parse_float, _REQUIRED, "model scale; expected vertex count"),
        _Opt("alpha", _parse_float, _REQUIRED, "tail parameter in (1/2, 1)"),
        _Opt("lambda", _parse_float, _REQUIRED, "infection rate"),
        _Opt("t-n", _parse_float, _REQUIRED, "observation time"),
        _Opt("trials", _parse_int, 50, "Monte Carlo trials"),
        _Opt("gamma", _parse_float, None, "survival estimate to compare against"),
        _Opt("engine", _parse_str, "auto", "simulation engine: auto, dynamic, static"),
        *_common(),
    ],
    "bad-event": [
        _Opt("n", _parse_float, _REQUIRED, "model scale"),
        _Opt("a", _parse_float, _REQUIRED, "sparsity exponent in (1/2, 1)"),
        _Opt("epsilon", _parse_float, _REQUIRED, "strip-width exponent in (0, 1)"),
        _Opt("alpha", _parse_float, _REQUIRED, "tail parameter in (1/2, 1)"),
        _Opt("trials", _parse_int, 100, "conditioned samples to audit"),
        _Opt("confidence", _parse_float, 0.999, "joint confidence for the component bound"),
        *_common(),
    ],
    "tessellation-report": [
        _Opt("n", _parse_float, _REQUIRED, "model scale"),
        _Opt("epsilon", _parse_float, _REQUIRED, "box-height parameter"),
        _Opt("alpha", _parse_float, _REQUIRED, "tail parameter in (1/2, 1)"),
        _Opt("lambda", _parse_float, _REQUIRED, "infection rate for the good-box threshold"),
        _Opt("samples", _parse_int, 100, "independent point samples"),
        *_common(),
    ],
    "oracle-check": [
        _Opt("edges", _parse_edges, _REQUIRED, "edge list like 0-1,1-2,2-0"),
        _Opt("n-vertices", _parse_int, _REQUIRED, "vertex count of the small graph"),
        _Opt("lambda", _parse_float, _REQUIRED, "infection rate"),
        _Opt("t", _parse_float, _REQUIRED, "horizon for the extinction probability"),
        _Opt("trials", _parse_int, 100000, "Monte Carlo trials"),
        _Opt("time-cap", _parse_float, None, "also compare mean extinction time under this cap"),
        *_common(),
    ],
    "trace-check": [
        _Opt("edges", _parse_edges, _REQUIRED, "edge list like 0-1,1-2,2-0"),
        _Opt("n-vertices", _parse_int, _REQUIRED, "vertex count of the small graph"),
        _Opt("lambda", _parse_float, _REQUIRED, "infection rate"),
        _Opt("horizon", _parse_float, 10.0, "graphical-record horizon"),
        _Opt("records", _parse_int, 100000, "graphical records to draw"),
        _Opt("max-len", _parse_int, 4, "enumerate simple paths up to this many vertices"),
        _Opt("path", _parse_ints, None, "check a single comma-separated vertex path instead"),
        *_common(),
    ],
}

# attribute names that differ from the config keys
_ATTR = {"lambda": "lam"}


def _attr(key: str) -> str:
    return _ATTR.get(key, key.replace("-", "_"))


# ---------------------------------------------------------------------------
# Config resolution and echo
# ---------------------------------------------------------------------------


def _resolve(cmd: str, args: argparse.Namespace) -> dict[str, Any]:
    """Merge flags over config-file values over defaults."""
    table = _COMMANDS[cmd]
    file_values: dict[str, str] = {}
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = experiments.parse_config(fh.read())
        known = {opt.key for opt in table}
        for full_key, value in raw.items():
            section, sep, key = full_key.partition(".")
            if not sep or section not in _COMMANDS:
                raise ValueError(f"config key {full_key!r} does not name a command section")
            if section != cmd:
                continue
            if key not in known:
                raise ValueError(f"unknown config key {full_key!r} for {cmd}")
            file_values[key] = value

    cfg: dict[str, Any] = {}
    for opt in table:
        flag = getattr(args, _attr(opt.key))
        if flag is not None:
            cfg[opt.key] = opt.conv(flag)
        elif opt.key in file_values:
            cfg[opt.key] = opt.conv(file_values[opt.key])
        elif opt.default is _REQUIRED:
            raise ValueError(
                f"missing required option --{opt.key} (or {cmd}.{opt.key} in the config file)"
            )
        else:
            cfg[opt.key] = opt.default
    return cfg


def _show(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(_show(v) for v in value)
    return str(value)


def _echo(cmd: str, cfg: dict[str, Any]) -> None:
    for opt in _COMMANDS[cmd]:
        print(f"{cmd}.{opt.key} = {_show(cfg[opt.key])}")


def _scrub(obj: Any) -> Any:
    """Make a payload strictly JSON-serializable (non-finite floats included)."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _scrub(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_scrub(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _scrub(dataclasses.asdict(obj))
    return obj


def _cell(value: Any) -> Any:
    """Render one CSV cell; containers become compact JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, (dict, list, tuple)) or dataclasses.is_dataclass(value):
        return json.dumps(_scrub(value), sort_keys=True, separators=(",", ":"))
    return value


def _rows_from(results, fields: list[str]) -> list[dict[str, Any]]:
    rows = []
    for res in results:
        d = {f.name: getattr(res, f.name) for f in dataclasses.fields(res)}
        rows.append({k: _cell(d[k]) for k in fields})
    return rows


def _stem(out: str) -> str:
    root, ext = os.path.splitext(out)
    return root if ext.lower() in {".csv", ".json"} else out


def _emit(
    cmd: str,
    cfg: dict[str, Any],
    rows: list[dict[str, Any]],
    fields: list[str],
    summary: dict[str, Any],
) -> None:
    if cfg.get("out") is None:
        return
    stem = _stem(cfg["out"])
    experiments.write_csv(stem + ".csv", rows, fieldnames=fields)
    payload = {
        "command": cmd,
        "config": _scrub(cfg),
        "version": __version__,
        "results": _scrub(summary),
    }
    experiments.write_summary(stem + ".json", payload)


def _fields(cls) -> list[str]:
    return [f.name for f in dataclasses.fields(cls)]


# ---------------------------------------------------------------------------
# Command bodies
# ---------------------------------------------------------------------------


def _wrapped_graph(n: float, alpha: float, rng: RngStream) -> Graph:
    g = experiments.sample_wrapped_graph(n, alpha, rng)
    if g.n_vertices == 0:
        raise ValueError(f"sampled an empty graph at n={n}; increase n")
    return g


def _cmd_gen_graph(cfg: dict[str, Any]) -> None:
    rng = RngStream(cfg["seed"], 0)
    g = _wrapped_graph(cfg["n"], cfg["alpha"], rng)
    save_graph(g, cfg["out"])
    print(f"# wrote {cfg['out']}: {g.n_vertices} vertices, {g.n_edges} edges")


def _cmd_degree_fit(cfg: dict[str, Any]) -> None:
    rng = RngStream(cfg["seed"], 0)
    if cfg["graph"] is not None:
        g = load_graph(cfg["graph"])
    else:
        if cfg["alpha"] is None or cfg["n"] is None:
            raise ValueError("degree-fit needs either --graph or both --alpha and --n")
        g = _wrapped_graph(cfg["n"], cfg["alpha"], rng)
    fit = experiments.degree_tail_fit(g, rng, bootstrap=cfg["bootstrap"])
    fields = _fields(type(fit))
    rows = _rows_from([fit], fields)
    _emit("degree-fit", cfg, rows, fields, {"fit": fit, "n_vertices": g.n_vertices})
    print(f"# exponent = {fit.exponent:.4f}  ci = ({fit.ci_low:.4f}, {fit.ci_high:.4f})")


def _cmd_estimate_gamma(cfg: dict[str, Any]) -> None:
    rng = RngStream(cfg["seed"], 0)
    window = experiments.default_gamma_window(cfg["half-width"], cfg["h-cap"])
    stop = experiments.default_gamma_stop(cfg["t-max"], cfg["escape-radius"], cfg["mass-cap"])
    est = experiments.estimate_gamma(
        cfg["alpha"], cfg["lambda"], cfg["trials"], window, stop, rng, threads=cfg["threads"]
    )
    fields = _fields(type(est))
    rows = _rows_from([est], fields)
    _emit("estimate-gamma", cfg, rows, fields, {"estimate": est})
    print(
        f"# gamma = {est.estimate:.6f}  wilson = ({est.wilson_low:.6f}, {est.wilson_high:.6f})"
        f"  survivals = {est.survivals}/{est.trials}"
    )


def _cmd_fit_exponent(cfg: dict[str, Any]) -> None:
    with open(cfg["points"], "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"lam", "estimate"} <= set(reader.fieldnames):
            raise ValueError(f"{cfg['points']} needs lam and estimate columns")
        points = [(float(row["lam"]), float(row["estimate"])) for row in reader]
    fit = experiments.fit_exponent(points, cfg["alpha"])
    fields = _fields(type(fit))
    rows = _rows_from([fit], fields)
    _emit("fit-exponent", cfg, rows, fields, {"fit": fit})
    print(
        f"# plain slope = {fit.plain_slope:.4f}  corrected slope = {fit.corrected_slope:.4f}"
        f"  theory = {fit.theory_slope:.4f}"
    )


def _cmd_extinction_scan(cfg: dict[str, Any]) -> None:
    rng = RngStream(cfg["seed"], 0)
    scan = experiments.metastability_scan(
        cfg["alpha"],
        cfg["lambda"],
        cfg["sizes"],
        cfg["trials"],
        cfg["cap"],
        rng,
        engine=cfg["engine"],
        threads=cfg["threads"],
    )
    fields = _fields(experiments.ScanRow)
    rows = _rows_from(scan, fields)
    _emit("extinction-scan", cfg, rows, fields, {"rows": list(scan)})
    for row in scan:
        print(
            f"# n = {row.n:g}  median capped time = {row.median_capped_time:.4g}"
            f"  cap-hit fraction = {row.cap_hit_fraction:.3f}"
        )


def _cmd_density(cfg: dict[str, Any]) -> None:
    rng = RngStream(cfg["seed"], 0)
    res = experiments.density_experiment(
        cfg["n"],
        cfg["alpha"],
        cfg["lambda"],
        cfg["t-n"],
        cfg["trials"],
        rng,
        gamma_ref=cfg["gamma"],
        engine=cfg["engine"],
        threads=cfg["threads"],
    )
    fields = _fields(type(res))
    rows = _rows_from([res], fields)
    _emit("density", cfg, rows, fields, {"result": res})
    gap = "n/a" if res.gap is None else f"{res.gap:.6f}"
    print(f"# mean density = {res.mean_density:.6f}  gap = {gap}")


def _cmd_bad_event(cfg: dict[str, Any]) -> None:
    rng = RngStream(cfg["seed"], 0)
    report = experiments.bad_event_check(
        cfg["n"],
        cfg["a"],
        cfg["epsilon"],
        cfg["alpha"],
        cfg["trials"],
        rng,
        confidence=cfg["confidence"],
    )
    fields = _fields(type(report)) + ["masses_ok", "components_ok", "all_ok"]
    d = {f.name: getattr(report, f.name) for f in dataclasses.fields(report)}
    d.update(
        masses_ok=report.masses_ok, components_ok=report.components_ok, all_ok=report.all_ok
    )
    rows = [{k: _cell(d[k]) for k in fields}]
    _emit("bad-event", cfg, rows, fields, {"report": report, "all_ok": report.all_ok})
    print(
        f"# max component = {report.max_component_size} (bound {report.component_bound})"
        f"  cross-gap edges = {report.cross_gap_edges}  all_ok = {report.all_ok}"
    )


def _cmd_tessellation_report(cfg: dict[str, Any]) -> None:
    rng = RngStream(cfg["seed"], 0)
    survey = experiments.tessellation_survey(
        cfg["n"], cfg["epsilon"], cfg["alpha"], cfg["lambda"], cfg["samples"], rng
    )
    fields = _fields(experiments.TessRowStat)
    rows = _rows_from(survey.rows, fields)
    _emit("tessellation-report", cfg, rows, fields, {"survey": survey})
    print(
        f"# rows = {len(survey.rows)}  connected fraction = {survey.connected_fraction:.3f}"
        f"  mean backbone vertex fraction = {survey.mean_backbone_vertex_fraction:.4f}"
    )


def _small_graph(cfg: dict[str, Any]) -> Graph:
    return graph_from_edges(cfg["n-vertices"], cfg["edges"])


def _cmd_oracle_check(cfg: dict[str, Any]) -> None:
    rng = RngStream(cfg["seed"], 0)
    g = _small_graph(cfg)
    lam = cfg["lambda"]
    trials = cfg["trials"]
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    initial = np.arange(g.n_vertices)
    exact = exact_extinction_probability(g, initial, lam, cfg["t"])
    extinct, _ = batch_extinction(g, initial, SimParams(lam), cfg["t"], trials, rng)
    mc = extinct / trials
    se = math.sqrt(max(mc * (1.0 - mc), 1.0 / trials) / trials)
    rows = [
        {
            "check": "extinction_probability",
            "exact": exact,
            "mc": mc,
            "se": se,
            "deviation_se": abs(mc - exact) / se,
            "trials": trials,
        }
    ]
    if cfg["time-cap"] is not None:
        exact_t = exact_expected_extinction_time(g, initial, lam)
        n_ext, time_sum = batch_extinction(
            g, initial, SimParams(lam), cfg["time-cap"], trials, rng
        )
        capped_mean = (time_sum + (trials - n_ext) * cfg["time-cap"]) / trials
        rows.append(
            {
                "check": "expected_extinction_time",
                "exact": exact_t,
                "mc": capped_mean,
                "se": float("nan"),
                "deviation_se": float("nan"),
                "trials": trials,
            }
        )
    fields = ["check", "exact", "mc", "se", "deviation_se", "trials"]
    rows = [{k: _cell(r[k]) for k in fields} for r in rows]
    _emit("oracle-check", cfg, rows, fields, {"rows": rows})
    for row in rows:
        print(f"# {row['check']}: exact = {row['exact']:.6f}  mc = {row['mc']:.6f}")


def _cmd_trace_check(cfg: dict[str, Any]) -> None:
    rng = RngStream(cfg["seed"], 0)
    g = _small_graph(cfg)
    lam = cfg["lambda"]
    n_records = cfg["records"]
    if n_records <= 0:
        raise ValueError(f"records must be positive, got {n_records}")
    if cfg["path"] is not None:
        paths = [tuple(cfg["path"])]
    else:
        paths = simple_paths(g, cfg["max-len"])
    p = SimParams(lam)
    chunk = 10000
    hits = {path: 0 for path in paths}
    done = 0
    while done < n_records:
        take = min(chunk, n_records - done)
        records = [build_graphical(g, p, cfg["horizon"], rng) for _ in range(take)]
        for path in paths:
            hits[path] += count_traces(records, path)
        done += take
    rows = []
    for path in paths:
        k = len(path) - 1
        emp = hits[path] / n_records
        bound = (2.0 * lam) ** k
        se = math.sqrt(max(emp * (1.0 - emp), 1.0 / n_records) / n_records)
        rows.append(
            {
                "path": json.dumps(list(path), separators=(",", ":")),
                "length": k,
                "hits": hits[path],
                "records": n_records,
                "empirical": emp,
                "bound": bound,
                "se": se,
                "within_slack": emp <= bound + 3.0 * se,
            }
        )
    fields = ["path", "length", "hits", "records", "empirical", "bound", "se", "within_slack"]
    rows = [{k2: _cell(r[k2]) for k2 in fields} for r in rows]
    _emit("trace-check", cfg, rows, fields, {"rows": rows})
    bad = sum(1 for r in rows if not r["within_slack"])
    print(f"# paths = {len(rows)}  over bound beyond slack = {bad}")


_BODIES: dict[str, Callable[[dict[str, Any]], None]] = {
    "gen-graph": _cmd_gen_graph,
    "degree-fit": _cmd_degree_fit,
    "estimate-gamma": _cmd_estimate_gamma,
    "fit-exponent": _cmd_fit_exponent,
    "extinction-scan": _cmd_extinction_scan,
    "density": _cmd_density,
    "bad-event": _cmd_bad_event,
    "tessellation-report": _cmd_tessellation_report,
    "oracle-check": _cmd_oracle_check,
    "trace-check": _cmd_trace_check,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypercp",
        description="Contact process on random hyperbolic graphs: simulation and checks.",
    )
    subs = parser.add_subparsers(dest="command", metavar="command")
    for cmd, table in _COMMANDS.items():
        sub = subs.add_parser(cmd, help=f"run {cmd}")
        sub.add_argument("--config", default=None, help="config file with command.key = value lines")
        for opt in table:
            sub.add_argument(
                f"--{opt.key}", dest=_attr(opt.key), default=None, metavar="V", help=opt.help
            )
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error: a command is required", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        cfg = _resolve(args.command, args)
        _echo(args.command, cfg)
        _BODIES[args.command](cfg)
    except (CapacityError, BudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"# wall_time_seconds = {time.perf_counter() - start:.3f}")
    return 0


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
