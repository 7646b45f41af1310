"""Q-V curves and reactive load margins.

A fictitious unbounded source is placed on the study bus and its voltage
setpoint is walked downward from the solved operating voltage. The reactive
power it has to absorb traces the Q-V curve; the depth of the curve below
zero is the bus's reactive margin. Generators that run into their upper
reactive limit along the way form the bus's reactive reserve basin.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Union

from .network import PQ, PV, SLACK, Generator, Network
from .powerflow import PowerFlowSolution, PreparedNetwork, SolverOptions


class QvError(ValueError):
    pass


@dataclass(frozen=True)
class SweepOptions:
    v_start_offset: float = 0.0
    v_step: float = 0.01
    v_floor: float = 0.50
    refine_bisection_steps: int = 8

    def __post_init__(self):
        if not self.v_step > 0:
            raise ValueError("v_step must be positive")
        if not self.v_floor > 0:
            raise ValueError("v_floor must be positive")
        if self.refine_bisection_steps < 0:
            raise ValueError("refine_bisection_steps must be non-negative")


@dataclass(frozen=True)
class QvPoint:
    v_set: float
    q_fict: float  # MVAr injected by the study source (negative = absorbed)
    converged: bool


@dataclass(frozen=True)
class QvCurve:
    study_bus: int
    points: tuple[QvPoint, ...]
    q_margin: float
    v_nose: float
    collapse_detected: bool
    rrb: tuple[tuple[int, float], ...] = ()

    @property
    def converged_points(self) -> list[QvPoint]:
        return [p for p in self.points if p.converged]


@dataclass(frozen=True)
class QvFailure:
    study_bus: int
    error: str


def q_margin_of(curve: QvCurve) -> float:
    """Recompute the margin from the curve points (MVAr, never negative)."""
    good = [p.q_fict for p in curve.points if p.converged]
    if not good:
        raise QvError(f"curve at bus {curve.study_bus} has no converged point")
    low = min(good)
    return -low if low <= 0 else 0.0


def _nose(points: list[QvPoint]) -> tuple[float, float]:
    good = [p for p in points if p.converged]
    if not good:
        return 0.0, math.nan
    best = min(good, key=lambda p: (p.q_fict, -p.v_set))
    margin = -best.q_fict if best.q_fict <= 0 else 0.0
    return margin, best.v_set


def with_study_source(network: Network, study_bus: int, v_set: float) -> Network:
    """Copy of ``network`` with the fictitious study generator appended."""
    fict = Generator(bus=study_bus, p_set=0.0, v_set=v_set, q_min=-math.inf, q_max=math.inf,
                     fictitious=True)
    net = network.replace(generators=network.generators + (fict,))
    if network.bus(study_bus).kind == PQ:
        net = net.with_bus(study_bus, kind=PV)
    return net


def compute_qv_curve(network: Network, base: PowerFlowSolution, study_bus: int,
                     opts: SweepOptions = SweepOptions(),
                     solver_options: SolverOptions = SolverOptions()) -> QvCurve:
    if not base.converged:
        raise QvError("base case power flow is not converged")
    if study_bus not in network.bus_index:
        raise QvError(f"unknown study bus {study_bus}")
    if network.bus(study_bus).kind == SLACK:
        raise QvError(f"study bus {study_bus} is the slack bus")

    v0 = base.voltage(study_bus) + opts.v_start_offset
    prep = PreparedNetwork(with_study_source(network, study_bus, v0))
    key = ("gen", len(network.generators))
    fict_index = key[1]
    base_at_max = set(base.gen_at_max)

    points: list[QvPoint] = []
    pinned_at: dict[int, float] = {}

    def run(v_set: float, warm: PowerFlowSolution) -> PowerFlowSolution:
        prep.set_unit_vset(key, v_set)
        sol = prep.solve(solver_options, warm_start=warm)
        points.append(QvPoint(v_set, float(sol.unit_q[key]) if sol.converged else math.nan,
                              sol.converged))
        return sol

    def note_pins(v_set: float, sol: PowerFlowSolution) -> None:
        for g in sorted(sol.gen_at_max):
            if g != fict_index and g not in base_at_max and g not in pinned_at:
                pinned_at[g] = v_set

    warm = base
    last_ok = None
    failed = None
    i = 0
    while True:
        v = v0 - i * opts.v_step
        if v < opts.v_floor - 1e-12:
            break
        sol = run(v, warm)
        if not sol.converged:
            failed = v
            break
        note_pins(v, sol)
        warm, last_ok = sol, v
        i += 1

    if failed is not None and last_ok is not None:
        lo, hi = failed, last_ok
        for _ in range(opts.refine_bisection_steps):
            mid = 0.5 * (lo + hi)
            sol = run(mid, warm)
            if sol.converged:
                note_pins(mid, sol)
                warm, hi = sol, mid
            else:
                lo = mid

    points.sort(key=lambda p: -p.v_set)
    margin, v_nose = _nose(points)
    rrb = tuple(sorted(pinned_at.items(), key=lambda kv: (-kv[1], kv[0])))
    return QvCurve(study_bus=study_bus, points=tuple(points), q_margin=margin, v_nose=v_nose,
                   collapse_detected=failed is not None, rrb=rrb)


def _one(args):
    network, base, bus, opts, solver_options = args
    try:
        return compute_qv_curve(network, base, bus, opts, solver_options)
    except (QvError, ValueError) as exc:
        return QvFailure(bus, str(exc))


def batch_qv(network: Network, base: PowerFlowSolution, buses: Iterable[int],
             opts: SweepOptions = SweepOptions(),
             solver_options: SolverOptions = SolverOptions(),
             workers: Optional[int] = None) -> dict[int, Union[QvCurve, QvFailure]]:
    """Q-V curves for several buses, keyed and ordered by bus id.

    A failing bus yields a :class:`QvFailure` entry instead of aborting the
    batch. ``workers > 1`` evaluates buses in separate processes.
    """
    order = sorted(set(buses))
    jobs = [(network, base, b, opts, solver_options) for b in order]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, jobs))
    else:
        results = [_one(j) for j in jobs]
    return dict(zip(order, results))


def curve_to_document(curve: QvCurve) -> dict:
    return {
        "study_bus": curve.study_bus,
        "q_margin": curve.q_margin,
        "v_nose": curve.v_nose,
        "collapse_detected": curve.collapse_detected,
        "rrb": [{"generator": g, "v_set": v} for g, v in curve.rrb],
        "points": [{"v_set": p.v_set, "q_fict": p.q_fict, "converged": p.converged}
                   for p in curve.points],
    }


def relax_upper_limits(network: Network) -> Network:
    """Every real generator with ``q_max = +inf`` (basin-size experiments)."""
    gens = tuple(g if g.fictitious else replace(g, q_max=math.inf) for g in network.generators)
    return network.replace(generators=gens)
