"""Command-line front end: ``qvsec {solve,qv,scan,cluster,scatter,pipeline}``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import yaml

from . import report
from .clustering import ClusteringError, elbow, kmeans, model_to_document
from .config import ConfigError, RunConfig, load_config
from .network import SLACK, CaseError, Network, load_case
from .powerflow import PowerFlowSolution, power_balance, solve
from .qv import QvCurve, batch_qv
from .scenarios import ScenarioError, run_scan

log = logging.getLogger("qvsec")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_NONCONVERGED = 4


class NotConverged(RuntimeError):
    pass


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, newline="")
    return path


def _dump(doc) -> str:
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False, width=100)


def _load(cfg: RunConfig) -> Network:
    if not cfg.case:
        raise ConfigError("no case given (use --case or 'case:' in the config file)")
    return load_case(cfg.case)


def _base(cfg: RunConfig, net: Network) -> PowerFlowSolution:
    sol = solve(net, cfg.solver_options())
    if not sol.converged:
        raise NotConverged(f"base case did not converge: {sol.status} {sol.message}".strip())
    return sol


# -- solve ------------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> int:
    net = _load(cfg)
    sol = solve(net, cfg.solver_options())
    out = Path(cfg.out) / "solve"
    rows = [(b.id, b.kind, b.zone, sol.v_mag[i], math.degrees(sol.v_ang[i]))
            for i, b in enumerate(net.buses)]
    _write(out / "buses.csv", report.to_csv(("bus", "kind", "zone", "v_mag", "v_ang_deg"), rows))
    grows = []
    for i, g in enumerate(net.generators):
        if g.in_service:
            grows.append((i, g.bus, float(sol.gen_p[i]), float(sol.gen_q[i]), g.q_min, g.q_max,
                          i in sol.gen_at_limit))
    _write(out / "generators.csv", report.to_csv(
        ("generator", "bus", "p_mw", "q_mvar", "q_min", "q_max", "at_limit"), grows))
    summary = {
        "case": net.name,
        "converged": sol.converged,
        "status": sol.status,
        "iterations": sol.iterations,
        "switch_rounds": sol.switch_rounds,
        "max_mismatch_pu": float(sol.max_mismatch),
        "message": sol.message,
        "pinned_buses": {int(b): s for b, s in sorted(sol.pins.items())},
        "switch_log": [{"round": e.round, "bus": e.bus, "action": e.action, "q_mvar": float(e.q_mvar)}
                       for e in sol.switch_log],
    }
    if sol.converged:
        bal = power_balance(net, sol)
        summary["power_balance"] = {
            k: {"mw": float(complex(v).real), "mvar": float(complex(v).imag)}
            for k, v in [("generation", bal.generation), ("load", bal.load),
                         ("series_losses", bal.series_losses), ("shunt", bal.shunt_consumption),
                         ("residual", bal.residual)]}
    _write(out / "summary.yaml", _dump(summary))
    print(f"{net.name or 'case'}: {sol.status} after {sol.iterations} iterations, "
          f"max mismatch {sol.max_mismatch:.3e} p.u.")
    for bus, vm, va in zip(sol.bus_ids, sol.v_mag, sol.v_ang):
        print(f"  bus {bus:>4}  V = {vm:.6f} p.u.  angle = {math.degrees(va):9.4f} deg")
    if not sol.converged:
        print(f"power flow did not converge: {sol.status} {sol.message}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


# -- qv ---------------------------------------------------------------------

def _study_buses(cfg: RunConfig, net: Network) -> list[int]:
    if not cfg.buses:
        return cfg.zone_policy().study_buses(net)
    chosen = []
    for b in cfg.buses:
        b = int(b)
        if b not in net.bus_index:
            raise ConfigError(f"unknown study bus {b}")
        if net.bus(b).kind == SLACK:
            log.warning("bus %d is the slack bus; skipped", b)
            continue
        chosen.append(b)
    return chosen


def _run_qv(cfg: RunConfig, net: Network, sol: PowerFlowSolution) -> dict:
    return batch_qv(net, sol, _study_buses(cfg, net), cfg.sweep_options(), cfg.solver_options(),
                    workers=cfg.workers)


def cmd_qv(cfg: RunConfig) -> int:
    net = _load(cfg)
    sol = _base(cfg, net)
    curves = _run_qv(cfg, net, sol)
    out = Path(cfg.out) / "qv"
    h = cfg.hash()
    for bus, c in curves.items():
        if not isinstance(c, QvCurve):
            log.warning("bus %d: %s", bus, c.error)
            continue
        if "csv" in cfg.formats:
            _write(out / f"bus_{bus}.csv", report.curve_csv(c))
        if "svg" in cfg.formats:
            _write(out / f"bus_{bus}.svg", report.qv_curve_svg(bus, c.points, h))
        print(f"bus {bus}: q_margin {c.q_margin:.3f} MVAr, v_nose {c.v_nose:.4f} p.u."
              + (" (collapse)" if c.collapse_detected else ""))
    _write(out / "summary.csv", report.summary_csv(net, curves))
    return EXIT_OK


def cmd_scatter(cfg: RunConfig, summary: Optional[str] = None) -> int:
    if summary:
        entries = report.read_summary_csv(Path(summary).read_text())
    else:
        net = _load(cfg)
        curves = _run_qv(cfg, net, _base(cfg, net))
        entries = [(b, c.v_nose, c.q_margin) for b, c in curves.items() if isinstance(c, QvCurve)]
    _write(Path(cfg.out) / "scatter.svg", report.scatter_svg(entries, cfg.hash()))
    print(f"scatter: {len(entries)} points")
    return EXIT_OK


# -- scan -------------------------------------------------------------------

def select_branches(cfg: RunConfig, net: Network) -> list[int]:
    if cfg.branches == "all":
        chosen = [i for i, br in enumerate(net.branches) if br.in_service]
    else:
        chosen = sorted({int(i) for i in cfg.branches})
        bad = [i for i in chosen if not 0 <= i < len(net.branches)]
        if bad:
            raise ConfigError(f"unknown branch ids {bad}")
    floor = cfg.branch_kv_floor
    chosen = [i for i in chosen
              if min(net.bus(net.branches[i].from_bus).base_kv, net.bus(net.branches[i].to_bus).base_kv) >= floor]
    if not chosen:
        raise ConfigError("branch selection is empty")
    return chosen


def cmd_scan(cfg: RunConfig) -> int:
    net = _load(cfg)
    branches = select_branches(cfg, net)

    def progress(n, total, res):
        state = "ok" if res.feasible else f"infeasible: {res.error}"
        print(f"case {n}/{total} {res.label} {state}", file=sys.stderr, flush=True)

    try:
        scan = run_scan(net, branches, cfg.sweep_options(), cfg.zone_policy(), cfg.schemes,
                        cfg.solver_options(), cfg.pv_q_limit, progress, cfg.workers)
    except ScenarioError as exc:
        raise NotConverged(str(exc)) from exc
    out = Path(cfg.out) / "scan"
    _write(out / "scan.csv", report.scan_csv(net, scan))
    manifest = {
        "config_hash": cfg.hash(),
        "config": {k: v for k, v in cfg.as_dict().items() if k != "out"},
        "case": {"path": cfg.case, "name": net.name},
        "zone_policy": {"kv_floor": cfg.kv_floor},
        "base_zone_margin_mvar": {int(z): float(v) for z, v in scan.base_zone_margin.items()},
        "base_bus_margin_mvar": {int(b): float(v) for b, v in scan.base_margins.items()},
        "cases": [{"label": r.label, "branch": r.spec.branch, "scheme": r.spec.scheme,
                   "setpoint_policy": r.spec.setpoint_policy, "feasible": r.feasible,
                   "error": r.error} for r in scan.results],
        "notes": list(scan.notes),
    }
    _write(out / "manifest.yaml", _dump(manifest))
    feasible = sum(r.feasible for r in scan.results)
    print(f"scan: {len(scan.results)} cases, {feasible} feasible, "
          f"feature matrix {scan.features.shape[0]}x{scan.features.shape[1]}")
    return EXIT_OK


# -- cluster ----------------------------------------------------------------

def cmd_cluster(cfg: RunConfig, scan_path: Optional[str] = None) -> int:
    path = Path(scan_path) if scan_path else Path(cfg.out) / "scan" / "scan.csv"
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scan CSV {path}: {exc}") from exc
    features, _ = report.read_scan_csv(text)
    if cfg.joint:
        groups = {"joint": features.where(lambda r: r.rsplit(":", 1)[-1] in cfg.schemes)}
    else:
        groups = {s: features.where(lambda r, s=s: r.endswith(":" + s)) for s in cfg.schemes}
    h = cfg.hash()
    out = Path(cfg.out) / "cluster"
    for name, fm in groups.items():
        n = len(fm.rows)
        if n == 0:
            log.warning("%s: no usable cases to cluster", name)
            continue
        k = min(cfg.k, n)
        if k < cfg.k:
            log.warning("%s: only %d cases, clustering with k=%d", name, n, k)
        model = kmeans(fm, k, cfg.seed)
        _write(out / name / "membership.csv", report.membership_csv(model))
        _write(out / name / "centroids.csv", report.centroids_csv(model))
        _write(out / name / "elbow.csv", report.elbow_csv(elbow(fm, cfg.seed)))
        _write(out / name / "model.yaml", _dump(model_to_document(model)))
        if "svg" in cfg.formats:
            _write(out / name / "heatmap.svg",
                   report.heatmap_svg(fm, model, h, cfg.saturation,
                                      f"Zone Q-margin change (%), {name}"))
        print(f"{name}: {n} cases in {k} clusters, inertia {model.inertia:.6g}")
    return EXIT_OK


def cmd_pipeline(cfg: RunConfig) -> int:
    code = cmd_solve(cfg)
    if code:
        return code
    for step in (cmd_qv, cmd_scatter, cmd_scan, cmd_cluster):
        code = step(cfg)
        if code:
            return code
    return EXIT_OK


# -- argument handling --------------------------------------------------------

def _branch_list(text: str):
    if text == "all":
        return "all"
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("branches must be 'all' or comma-separated ids") from exc


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--case", help="case file (.m or native .yaml)")
    g.add_argument("--config", help="YAML run configuration; flags override its values")
    g.add_argument("--out", help="output directory (default: out)")
    g.add_argument("--seed", type=int, help="clustering seed")
    g.add_argument("--k", type=int, help="cluster count (default 5)")
    g.add_argument("--scheme", choices=["ppf", "pv", "both"], help="HVDC control scheme(s)")
    g.add_argument("--kv-floor", dest="kv_floor", type=float,
                   help="minimum base kV of study buses entering zone statistics")
    g.add_argument("--v-step", dest="v_step", type=float, help="Q-V sweep step (p.u.)")
    g.add_argument("--v-floor", dest="v_floor", type=float, help="lowest Q-V setpoint (p.u.)")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="qvsec", description="Q-V margin studies of AC-to-HVDC upgrades")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve the base power flow")
    p = sub.add_parser("qv", parents=[common], help="Q-V curves for study buses")
    p.add_argument("--buses", type=lambda s: [int(t) for t in s.split(",") if t], help="comma-separated bus ids")
    p = sub.add_parser("scatter", parents=[common], help="max extractable Q vs collapse voltage")
    p.add_argument("--summary", help="reuse a qv summary.csv instead of recomputing")
    p.add_argument("--buses", type=lambda s: [int(t) for t in s.split(",") if t])
    p = sub.add_parser("scan", parents=[common], help="per-branch HVDC upgrade scan")
    p.add_argument("--branches", type=_branch_list, help="'all' or comma-separated branch ids")
    p.add_argument("--branch-kv-floor", dest="branch_kv_floor", type=float)
    p.add_argument("--pv-q-limit", dest="pv_q_limit", type=float, help="P-V converter |Q| limit (MVAr)")
    p = sub.add_parser("cluster", parents=[common], help="k-means heatmaps from a scan CSV")
    p.add_argument("--scan", help="scan CSV (default: <out>/scan/scan.csv)")
    p.add_argument("--joint", action="store_true", default=None, help="cluster both schemes together")
    p = sub.add_parser("pipeline", parents=[common], help="solve, qv, scatter, scan, cluster")
    p.add_argument("--branches", type=_branch_list)
    p.add_argument("--pv-q-limit", dest="pv_q_limit", type=float)
    p.add_argument("--joint", action="store_true", default=None)
    return parser


_NON_CONFIG = {"command", "config", "verbose", "scan", "summary"}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    overrides = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "qv":
            return cmd_qv(cfg)
        if args.command == "scatter":
            return cmd_scatter(cfg, args.summary)
        if args.command == "scan":
            return cmd_scan(cfg)
        if args.command == "cluster":
            return cmd_cluster(cfg, args.scan)
        return cmd_pipeline(cfg)
    except (ConfigError, report.CsvSchemaError, ClusteringError) as exc:
        print(f"qvsec: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CaseError as exc:
        print(f"qvsec: cannot load case: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NotConverged as exc:
        print(f"qvsec: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
