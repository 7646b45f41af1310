"""HVDC upgrade scenarios: replace one AC branch by a VSC link, re-run Q-V, compare zones."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .clustering import FeatureMatrix
from .network import P_PF, P_V, SCHEMES, HvdcLink, Network
from .powerflow import (HvdcConfigError, PowerFlowSolution, SolverOptions, branch_flows, signed_pf,
                        solve)
from .qv import QvCurve, SweepOptions, batch_qv

log = logging.getLogger(__name__)

FROM_BASE_FLOW = "from_base_flow"
EXPLICIT = "explicit"
_OVERRIDES = ("p_set", "loss_factor", "pf_from", "pf_to", "v_set_from", "v_set_to",
              "q_min_from", "q_max_from", "q_min_to", "q_max_to")
# MW below which a branch is considered to carry no real power
ZERO_FLOW_MW = 1e-6


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    branch: int
    scheme: str
    setpoint_policy: str = FROM_BASE_FLOW
    p_set: Optional[float] = None
    loss_factor: Optional[float] = None
    pf_from: Optional[float] = None
    pf_to: Optional[float] = None
    v_set_from: Optional[float] = None
    v_set_to: Optional[float] = None
    q_min_from: Optional[float] = None
    q_max_from: Optional[float] = None
    q_min_to: Optional[float] = None
    q_max_to: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ScenarioError(f"unknown scheme {self.scheme!r}")
        if self.setpoint_policy not in (FROM_BASE_FLOW, EXPLICIT):
            raise ScenarioError(f"unknown setpoint policy {self.setpoint_policy!r}")
        given = [name for name in _OVERRIDES if getattr(self, name) is not None]
        if self.setpoint_policy == FROM_BASE_FLOW and given:
            raise ScenarioError(f"overrides {given} require setpoint_policy='explicit'")
        if self.setpoint_policy == EXPLICIT and self.p_set is None:
            raise ScenarioError("explicit policy needs at least p_set")


@dataclass(frozen=True)
class ZonePolicy:
    """Which buses enter zone statistics: in-service PQ buses at or above ``kv_floor``."""

    kv_floor: float = 0.0

    def study_buses(self, network: Network) -> list[int]:
        return [b for b in network.pq_buses() if network.bus(b).base_kv >= self.kv_floor]


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    spec: ScenarioSpec
    zone_margin: dict
    zone_delta_pct: dict  # None marks an undefined delta (zero base margin)
    feasible: bool
    per_bus_margins: dict
    error: Optional[str] = None
    label: str = ""


def case_label(network: Network, spec: ScenarioSpec) -> str:
    br = network.branches[spec.branch]
    return spec.label or f"{spec.branch}:{br.from_bus}-{br.to_bus}:{spec.scheme}"


def zone_means(network: Network, margins: Mapping[int, float]) -> dict[int, float]:
    by_zone: dict[int, list[float]] = {}
    for bus, value in sorted(margins.items()):
        by_zone.setdefault(network.bus(bus).zone, []).append(value)
    return {z: math.fsum(vals) / len(vals) for z, vals in sorted(by_zone.items())}


def zone_deltas(base_zone: Mapping[int, float], zone: Mapping[int, float]) -> dict:
    out = {}
    for z, base_value in sorted(base_zone.items()):
        if base_value > 0 and z in zone:
            out[z] = 100.0 * (zone[z] - base_value) / base_value
        else:
            out[z] = None
    return out


def _regulated_vset(network: Network, bus: int, fallback: float) -> float:
    for g in network.generators:
        if g.in_service and g.bus == bus and not g.fictitious:
            return g.v_set
    return fallback


def _pick(value, default):
    return default if value is None else value


def make_hvdc_scenario(base_net: Network, base_sol: PowerFlowSolution, spec: ScenarioSpec,
                       pv_q_limit: Optional[float] = None) -> Network:
    """Scenario network: ``spec.branch`` switched out, one HVDC link added in its place."""
    if not base_sol.converged:
        raise ScenarioError("base case power flow is not converged")
    if not 0 <= spec.branch < len(base_net.branches):
        raise ScenarioError(f"no branch {spec.branch}")
    br = base_net.branches[spec.branch]
    if not br.in_service:
        raise ScenarioError(f"branch {spec.branch} ({br.from_bus}-{br.to_bus}) is already out of service")

    if spec.setpoint_policy == FROM_BASE_FLOW:
        flows = branch_flows(base_net, base_sol)
        s_f, s_t = complex(flows.s_from[spec.branch]), complex(flows.s_to[spec.branch])
        if s_f.real >= 0:
            send, recv, s_s, s_r = br.from_bus, br.to_bus, s_f, s_t
        else:
            send, recv, s_s, s_r = br.to_bus, br.from_bus, s_t, s_f
        p_set = s_s.real
        if p_set < ZERO_FLOW_MW:  # idle corridor: no transfer, no losses
            p_set, loss = 0.0, 0.0
        else:
            loss = (s_s.real + s_r.real) / p_set
        if -1e-12 < loss < 0:
            loss = 0.0
        if not 0 <= loss < 1:
            raise ScenarioError(f"branch {spec.branch} base flow implies loss factor {loss:.4g}; "
                                "use setpoint_policy='explicit'")
        if spec.scheme == P_PF and p_set == 0.0:
            # power factor is undefined; each end keeps its base reactive flow as a fixed injection
            link = HvdcLink(send, recv, 0.0, P_PF, q_from=0.0 - s_s.imag, q_to=0.0 - s_r.imag)
        elif spec.scheme == P_PF:
            link = HvdcLink(send, recv, p_set, P_PF, loss_factor=loss,
                            pf_from=signed_pf(-s_s.real, -s_s.imag),
                            pf_to=signed_pf(-s_r.real, -s_r.imag))
        else:
            qlim = p_set if pv_q_limit is None else pv_q_limit
            link = HvdcLink(send, recv, p_set, P_V, loss_factor=loss,
                            v_set_from=_regulated_vset(base_net, send, base_sol.voltage(send)),
                            v_set_to=_regulated_vset(base_net, recv, base_sol.voltage(recv)),
                            q_min_from=0.0 - qlim, q_max_from=qlim, q_min_to=0.0 - qlim, q_max_to=qlim)
    else:
        send, recv = br.from_bus, br.to_bus
        loss = spec.loss_factor or 0.0
        if spec.scheme == P_PF:
            if spec.pf_from is None or spec.pf_to is None:
                raise ScenarioError("explicit p_pf scenario needs pf_from and pf_to")
            link = HvdcLink(send, recv, spec.p_set, P_PF, loss_factor=loss,
                            pf_from=spec.pf_from, pf_to=spec.pf_to)
        else:
            qlim = spec.p_set if pv_q_limit is None else pv_q_limit
            link = HvdcLink(
                send, recv, spec.p_set, P_V, loss_factor=loss,
                v_set_from=spec.v_set_from or _regulated_vset(base_net, send, base_sol.voltage(send)),
                v_set_to=spec.v_set_to or _regulated_vset(base_net, recv, base_sol.voltage(recv)),
                q_min_from=_pick(spec.q_min_from, 0.0 - qlim), q_max_from=_pick(spec.q_max_from, qlim),
                q_min_to=_pick(spec.q_min_to, 0.0 - qlim), q_max_to=_pick(spec.q_max_to, qlim))

    net = base_net.with_branch(spec.branch, in_service=False)
    return net.replace(hvdc_links=net.hvdc_links + (link,))


def margins_of(curves: Mapping[int, object]) -> dict[int, float]:
    return {b: c.q_margin for b, c in curves.items() if isinstance(c, QvCurve)}


def run_scenario(base_net: Network, base_sol: PowerFlowSolution, base_margins: Mapping[int, float],
                 spec: ScenarioSpec, sweep_opts: SweepOptions = SweepOptions(),
                 zone_policy: ZonePolicy = ZonePolicy(),
                 solver_options: SolverOptions = SolverOptions(),
                 pv_q_limit: Optional[float] = None, workers: Optional[int] = None) -> ScenarioResult:
    label = case_label(base_net, spec)
    base_zone = zone_means(base_net, base_margins)

    def infeasible(msg):
        return ScenarioResult(spec, {}, {z: None for z in base_zone}, False, {}, msg, label)

    try:
        net = make_hvdc_scenario(base_net, base_sol, spec, pv_q_limit)
        sol = solve(net, solver_options, warm_start=base_sol)
    except (ScenarioError, HvdcConfigError) as exc:
        return infeasible(str(exc))
    if not sol.converged:
        return infeasible(f"scenario operating point not solvable ({sol.status}) {sol.message}".strip())
    curves = batch_qv(net, sol, sorted(base_margins), sweep_opts, solver_options, workers=workers)
    per_bus = margins_of(curves)
    zones = zone_means(net, per_bus)
    return ScenarioResult(spec, zones, zone_deltas(base_zone, zones), True, per_bus, None, label)


@dataclass(frozen=True, eq=False)
class ScanResult:
    base_solution: PowerFlowSolution
    base_curves: dict
    base_margins: dict
    base_zone_margin: dict
    results: tuple[ScenarioResult, ...]
    features: FeatureMatrix
    feature_cases: tuple[int, ...]  # index into results for each feature row
    notes: tuple[str, ...] = field(default_factory=tuple)


def build_features(network: Network, base_zone: Mapping[int, float],
                   results: Sequence[ScenarioResult]):
    notes = []
    zones = [z for z, v in sorted(base_zone.items()) if v > 0]
    dropped = [z for z in sorted(base_zone) if z not in zones]
    if dropped:
        notes.append(f"zones {dropped} have zero base margin; their deltas are undefined and dropped")
    rows, idx = [], []
    for i, res in enumerate(results):
        if res.feasible and all(res.zone_delta_pct.get(z) is not None for z in zones):
            rows.append([res.zone_delta_pct[z] for z in zones])
            idx.append(i)
        else:
            notes.append(f"case {res.label} excluded from features: {res.error or 'undefined delta'}")
    values = np.array(rows, dtype=float).reshape(len(rows), len(zones))
    fm = FeatureMatrix(rows=tuple(results[i].label for i in idx),
                       cols=tuple(network.zones.get(z, f"zone {z}") for z in zones),
                       values=values, col_ids=tuple(zones))
    return fm, tuple(idx), notes


def run_scan(base_net: Network, branches: Iterable[int], sweep_opts: SweepOptions = SweepOptions(),
             zone_policy: ZonePolicy = ZonePolicy(), schemes: Sequence[str] = (P_PF, P_V),
             solver_options: SolverOptions = SolverOptions(), pv_q_limit: Optional[float] = None,
             progress: Optional[Callable[[int, int, ScenarioResult], None]] = None,
             workers: Optional[int] = None) -> ScanResult:
    """Every (branch, scheme) upgrade case, ordered by branch id then scheme.

    ``workers`` parallelises the per-bus sweeps inside each case; results do
    not depend on it.
    """
    base_sol = solve(base_net, solver_options)
    if not base_sol.converged:
        raise ScenarioError(f"base case power flow did not converge ({base_sol.status})")
    buses = zone_policy.study_buses(base_net)
    base_curves = batch_qv(base_net, base_sol, buses, sweep_opts, solver_options, workers=workers)
    base_margins = margins_of(base_curves)
    base_zone = zone_means(base_net, base_margins)
    order = [s for s in SCHEMES if s in schemes]
    cases = [(b, s) for b in sorted(set(branches)) for s in order]
    results = []
    for n, (branch, scheme) in enumerate(cases, start=1):
        try:
            res = run_scenario(base_net, base_sol, base_margins, ScenarioSpec(branch, scheme),
                               sweep_opts, zone_policy, solver_options, pv_q_limit, workers)
        except ScenarioError as exc:
            res = ScenarioResult(ScenarioSpec(branch, scheme), {}, {z: None for z in base_zone},
                                 False, {}, str(exc), f"{branch}:?:{scheme}")
        results.append(res)
        if progress:
            progress(n, len(cases), res)
    features, idx, notes = build_features(base_net, base_zone, results)
    return ScanResult(base_sol, base_curves, base_margins, base_zone, tuple(results), features,
                      idx, tuple(notes))
