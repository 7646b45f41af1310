"""Polar Newton-Raphson power flow with PV/PQ reactive-limit switching.

Voltage-regulating devices (generators, P-V converter terminals and the
fictitious Q-V study source) are handled as *units*. Units sharing a bus form
a group that regulates one voltage; the group is demoted to a PQ bus when the
reactive power it must supply leaves the sum of its members' limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..network import Network, connected_components
from .hvdc import embed_hvdc
from .ybus import build_ybus

# above this many unknowns the Jacobian is factorized sparse
DENSE_LIMIT = 120
_SETPOINT_EQUAL = 1e-12

MAX, MIN = "max", "min"


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 30
    max_switch_rounds: int = 10
    flat_start: bool = True
    allow_switchback: bool = True
    enforce_q_limits: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.max_switch_rounds < 1:
            raise ValueError("max_switch_rounds must be at least 1")


@dataclass(frozen=True)
class SwitchEvent:
    round: int
    bus: int
    action: str  # "pin_max" | "pin_min" | "release"
    q_mvar: float


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    converged: bool
    status: str
    bus_ids: tuple[int, ...]
    v_mag: np.ndarray
    v_ang: np.ndarray
    gen_p: np.ndarray
    gen_q: np.ndarray
    gen_at_limit: frozenset[int]
    gen_at_max: frozenset[int]
    hvdc_q: dict
    hvdc_at_limit: frozenset
    pins: dict
    iterations: int
    switch_rounds: int
    max_mismatch: float
    switch_log: tuple[SwitchEvent, ...] = ()
    message: str = ""
    unit_q: dict = field(default_factory=dict)

    def voltage(self, bus_id: int) -> float:
        return float(self.v_mag[self.bus_ids.index(bus_id)])

    def angle(self, bus_id: int) -> float:
        return float(self.v_ang[self.bus_ids.index(bus_id)])

    @property
    def complex_voltage(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)


@dataclass
class _Unit:
    key: tuple
    bus: int  # bus index
    q_min: float  # p.u.
    q_max: float
    v_set: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.q_min) and math.isinf(self.q_max)


def water_fill(total: float, lows, highs) -> list[float]:
    """Split ``total`` as clip(s, lo_i, hi_i) with one common level ``s``.

    Gives equal shares until units hit their limits. If ``total`` lies
    outside the summed limits, every unit is returned at its nearest limit.
    """
    n = len(lows)
    if n == 1:
        return [min(max(total, lows[0]), highs[0])]
    pts = sorted({v for v in list(lows) + list(highs) if math.isfinite(v)})

    def g(s):
        return sum(min(max(s, lo), hi) for lo, hi in zip(lows, highs))

    def slope(a, b):
        mid = 0.5 * (a + b)
        return sum(1 for lo, hi in zip(lows, highs) if lo < mid < hi)

    if not pts:
        level = total / n
    elif total <= g(pts[0]):
        k = sum(1 for lo in lows if math.isinf(lo))
        level = pts[0] - (g(pts[0]) - total) / k if k else pts[0] - 1.0
    elif total >= g(pts[-1]):
        k = sum(1 for hi in highs if math.isinf(hi))
        level = pts[-1] + (total - g(pts[-1])) / k if k else pts[-1] + 1.0
    else:
        level = pts[-1]
        for a, b in zip(pts, pts[1:]):
            ga, gb = g(a), g(b)
            if ga <= total <= gb:
                m = slope(a, b)
                level = a if m == 0 else a + (total - ga) / m
                break
    return [min(max(level, lo), hi) for lo, hi in zip(lows, highs)]


class Formulation:
    """Mismatch equations for one fixed assignment of bus types."""

    def __init__(self, prep: "PreparedNetwork", pins: Mapping[int, str]):
        self.prep = prep
        n = prep.n
        free = set(prep.groups) - set(pins) - {prep.slack}
        self.fixed_v = free | {prep.slack}
        self.ang_idx = np.array([b for b in range(n) if b not in prep.refs], dtype=int)
        self.vm_idx = np.array([b for b in range(n) if b not in self.fixed_v], dtype=int)
        s_spec = prep.s_fixed.copy()
        for b, state in pins.items():
            grp = prep.groups[b]
            s_spec[b] += 1j * sum(prep.units[u].q_max if state == MAX else prep.units[u].q_min for u in grp)
        self.s_spec = s_spec
        np_, nq = len(self.ang_idx), len(self.vm_idx)
        self.size = np_ + nq
        prow = np.full(n, -1)
        prow[self.ang_idx] = np.arange(np_)
        qrow = np.full(n, -1)
        qrow[self.vm_idx] = np.arange(nq)
        r, c = prep.er, prep.ec
        self._blocks = []
        for rmap, cmap, roff, coff, part in ((prow, prow, 0, 0, 0), (prow, qrow, 0, np_, 1),
                                             (qrow, prow, np_, 0, 2), (qrow, qrow, np_, np_, 3)):
            mask = (rmap[r] >= 0) & (cmap[c] >= 0)
            self._blocks.append((mask, rmap[r[mask]] + roff, cmap[c[mask]] + coff, part))

    def setpoint_voltage(self, v: np.ndarray) -> np.ndarray:
        """Force regulated magnitudes onto their setpoints."""
        prep = self.prep
        mag = np.abs(v)
        ang = np.angle(v)
        for b in self.fixed_v:
            mag[b] = prep.group_vset(b)
        return mag * np.exp(1j * ang)

    def state(self, v: np.ndarray) -> np.ndarray:
        return np.r_[np.angle(v)[self.ang_idx], np.abs(v)[self.vm_idx]]

    def voltage(self, x: np.ndarray, template: np.ndarray) -> np.ndarray:
        ang = np.angle(template)
        mag = np.abs(template)
        ang[self.ang_idx] = x[: len(self.ang_idx)]
        mag[self.vm_idx] = x[len(self.ang_idx):]
        return mag * np.exp(1j * ang)

    def mismatch(self, v: np.ndarray) -> np.ndarray:
        mis = v * np.conj(self.prep.y @ v) - self.s_spec
        return np.r_[mis.real[self.ang_idx], mis.imag[self.vm_idx]]

    def jacobian_entries(self, v: np.ndarray):
        prep = self.prep
        ibus = prep.y @ v
        a = v[prep.er] * np.conj(prep.ey * v[prep.ec])
        d_va = -1j * a
        d_vm = a / np.abs(v[prep.ec])
        diag = prep.diag_pos
        d_va[diag] += 1j * v * np.conj(ibus)
        d_vm[diag] += np.conj(ibus) * v / np.abs(v)
        parts = (d_va.real, d_vm.real, d_va.imag, d_vm.imag)
        rows, cols, vals = [], [], []
        for mask, rr, cc, part in self._blocks:
            rows.append(rr)
            cols.append(cc)
            vals.append(parts[part][mask])
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)

    def jacobian(self, v: np.ndarray) -> np.ndarray:
        rows, cols, vals = self.jacobian_entries(v)
        m = self.size
        return np.bincount(rows * m + cols, weights=vals, minlength=m * m).reshape(m, m)

    def newton_step(self, v: np.ndarray, f: np.ndarray) -> np.ndarray:
        m = self.size
        if m <= DENSE_LIMIT:
            jac = self.jacobian(v)
            dx = np.linalg.solve(jac, -f)
            if not np.all(np.isfinite(dx)):
                raise np.linalg.LinAlgError("singular Jacobian")
            return dx
        rows, cols, vals = self.jacobian_entries(v)
        jac = sp.csc_matrix((vals, (rows, cols)), shape=(m, m))
        try:
            dx = spla.splu(jac).solve(-f)
        except RuntimeError as exc:
            raise np.linalg.LinAlgError(str(exc)) from None
        if not np.all(np.isfinite(dx)):
            raise np.linalg.LinAlgError("singular Jacobian")
        return dx


class PreparedNetwork:
    """Solver-side view of a network: admittances, injections, units, islands.

    Building one is the expensive part of a solve; the Q-V sweep prepares a
    network once and only moves the study source's setpoint between points.
    """

    def __init__(self, network: Network):
        self.network = network
        self.n = n = len(network.buses)
        index = network.bus_index
        self.ybus = build_ybus(network)
        self.y = self.ybus.matrix
        coo = self.y.tocoo()
        self.er = np.r_[coo.row, np.arange(n)].astype(int)
        self.ec = np.r_[coo.col, np.arange(n)].astype(int)
        self.ey = np.r_[coo.data, np.zeros(n)]
        self.diag_pos = np.arange(len(coo.row), len(coo.row) + n)

        base = network.mva_base
        slack_bus = network.slack_bus
        self.slack = index[slack_bus.id]
        s_fixed = np.array([-(b.p_load + 1j * b.q_load) / base for b in network.buses], dtype=complex)
        units: list[_Unit] = []
        for i, g in enumerate(network.generators):
            if not g.in_service:
                continue
            b = index[g.bus]
            s_fixed[b] += g.p_set / base
            units.append(_Unit(("gen", i), b, g.q_min / base, g.q_max / base, g.v_set))
        self.embeddings = []
        for j, link in enumerate(network.hvdc_links):
            emb = embed_hvdc(network, link)
            self.embeddings.append(emb)
            for end, term in (("from", emb.sending), ("to", emb.receiving)):
                b = index[term.bus]
                s_fixed[b] += term.p_inj / base
                if term.regulating:
                    units.append(_Unit(("hvdc", j, end), b, term.q_min / base, term.q_max / base, term.v_set))
                else:
                    s_fixed[b] += 1j * term.q_inj / base
        self.s_fixed = s_fixed
        self.units = units
        self.unit_index = {u.key: k for k, u in enumerate(units)}
        groups: dict[int, list[int]] = {}
        for k, u in enumerate(units):
            groups.setdefault(u.bus, []).append(k)
        self.groups = groups
        self.slack_vset = (units[groups[self.slack][0]].v_set if self.slack in groups
                           else slack_bus.v_mag)
        self.slack_ang = slack_bus.v_ang

        refs = {self.slack}
        self.island_refs = []
        for comp in connected_components(network, include_hvdc=False):
            idx = [index[b] for b in comp]
            if self.slack in idx:
                continue
            reg = [b for b in idx if b in groups]
            ref = min(reg) if reg else min(idx)
            refs.add(ref)
            self.island_refs.append(ref)
        self.refs = refs

    # -- unit bookkeeping -------------------------------------------------
    def set_unit_vset(self, key: tuple, v_set: float) -> None:
        self.units[self.unit_index[key]].v_set = v_set

    def group_vset(self, b: int) -> float:
        if b == self.slack:
            return self.slack_vset
        grp = [self.units[k] for k in self.groups[b]]
        for u in grp:
            if u.unbounded:
                return u.v_set
        return grp[0].v_set

    def _group_limits(self, b: int) -> tuple[float, float]:
        grp = [self.units[k] for k in self.groups[b]]
        return sum(u.q_min for u in grp), sum(u.q_max for u in grp)

    def _has_unbounded(self, b: int) -> bool:
        return any(self.units[k].unbounded for k in self.groups[b])

    def switchable(self, b: int) -> bool:
        if b == self.slack or self._has_unbounded(b):
            return False
        lo, hi = self._group_limits(b)
        return hi > lo

    def fixed_pins(self) -> dict[int, str]:
        """Groups with zero reactive range can never regulate."""
        out = {}
        for b in self.groups:
            if b != self.slack and not self._has_unbounded(b):
                lo, hi = self._group_limits(b)
                if hi <= lo:
                    out[b] = MAX
        return out

    def formulation(self, pins: Optional[Mapping[int, str]] = None) -> Formulation:
        return Formulation(self, self.fixed_pins() if pins is None else pins)

    # -- solution pieces --------------------------------------------------
    def q_needed(self, v: np.ndarray) -> np.ndarray:
        s = v * np.conj(self.y @ v)
        return s.imag - self.s_fixed.imag

    def allocate(self, v: np.ndarray, pins: Mapping[int, str], tol: float):
        """Reactive output (p.u.) and limit state of every unit."""
        qn = self.q_needed(v)
        q = np.zeros(len(self.units))
        state: dict[int, Optional[str]] = {}
        for b, grp in self.groups.items():
            units = [self.units[k] for k in grp]
            if b in pins:
                for k, u in zip(grp, units):
                    q[k] = u.q_max if pins[b] == MAX else u.q_min
            elif self._has_unbounded(b):
                gv = self.group_vset(b)
                rest = qn[b]
                sharing, free = [], []
                for k, u in zip(grp, units):
                    if u.unbounded:
                        free.append(k)
                    elif u.v_set > gv + _SETPOINT_EQUAL and math.isfinite(u.q_max):
                        q[k] = u.q_max
                        rest -= u.q_max
                    elif u.v_set < gv - _SETPOINT_EQUAL and math.isfinite(u.q_min):
                        q[k] = u.q_min
                        rest -= u.q_min
                    else:
                        sharing.append(k)
                if sharing:
                    share = water_fill(rest, [self.units[k].q_min for k in sharing],
                                       [self.units[k].q_max for k in sharing])
                    for k, value in zip(sharing, share):
                        q[k] = value
                        rest -= value
                for k in free:
                    q[k] = rest / len(free)
            else:
                share = water_fill(qn[b], [u.q_min for u in units], [u.q_max for u in units])
                for k, value in zip(grp, share):
                    q[k] = value
                # slack excess, or an unenforced violation, is reported on the first unit
                q[grp[0]] += qn[b] - sum(share)
            for k, u in zip(grp, units):
                if b == self.slack or u.unbounded:
                    state[k] = None
                elif math.isfinite(u.q_max) and q[k] >= u.q_max - tol:
                    state[k] = MAX
                elif math.isfinite(u.q_min) and q[k] <= u.q_min + tol:
                    state[k] = MIN
                else:
                    state[k] = None
        return q, state, qn

    def switch(self, v: np.ndarray, pins: Mapping[int, str], released: set, allow_switchback: bool,
               tol: float, round_no: int = 0):
        qn = self.q_needed(v)
        new = dict(pins)
        events = []
        base = self.network.mva_base
        for b in sorted(self.groups):
            if not self.switchable(b):
                continue
            bus_id = self.network.buses[b].id
            lo, hi = self._group_limits(b)
            if b not in pins:
                if qn[b] > hi + tol:
                    new[b] = MAX
                    events.append(SwitchEvent(round_no, bus_id, "pin_max", qn[b] * base))
                elif qn[b] < lo - tol:
                    new[b] = MIN
                    events.append(SwitchEvent(round_no, bus_id, "pin_min", qn[b] * base))
            elif allow_switchback and b not in released:
                vm = abs(v[b])
                vs = self.group_vset(b)
                if (pins[b] == MAX and vm > vs + tol) or (pins[b] == MIN and vm < vs - tol):
                    del new[b]
                    released.add(b)
                    events.append(SwitchEvent(round_no, bus_id, "release", qn[b] * base))
        return new, events

    def initial_voltage(self, options: SolverOptions, warm: Optional[PowerFlowSolution]) -> np.ndarray:
        if warm is not None:
            return warm.v_mag * np.exp(1j * warm.v_ang)
        if options.flat_start:
            return np.full(self.n, np.exp(1j * self.slack_ang), dtype=complex)
        return np.array([b.v_mag * np.exp(1j * b.v_ang) for b in self.network.buses])

    # -- driver -----------------------------------------------------------
    def solve(self, options: SolverOptions = SolverOptions(),
              warm_start: Optional[PowerFlowSolution] = None,
              initial_pins: Optional[Mapping[int, str]] = None) -> PowerFlowSolution:
        index = self.network.bus_index
        if warm_start is not None and len(warm_start.v_mag) != self.n:
            raise ValueError("warm start dimension does not match the network")
        pins = self.fixed_pins()
        seed = initial_pins if initial_pins is not None else (warm_start.pins if warm_start else {})
        for bus_id, state in seed.items():
            b = index.get(bus_id)
            if b is not None and self.switchable(b):
                pins[b] = state
        v = self.initial_voltage(options, warm_start)
        released: set = set()
        log: list[SwitchEvent] = []
        total_iter = 0
        rounds = 0
        while True:
            form = Formulation(self, pins)
            v = form.setpoint_voltage(v)
            v[self.slack] = self.slack_vset * np.exp(1j * self.slack_ang)
            v, iters, status, norm = _newton(form, v, options.tol, options.max_iter)
            total_iter += iters
            if status != "converged" or not options.enforce_q_limits:
                break
            pins_next, events = self.switch(v, pins, released, options.allow_switchback,
                                            options.tol, rounds + 1)
            if not events:
                break
            log.extend(events)
            rounds += 1
            if rounds > options.max_switch_rounds:
                status = "switch_rounds"
                break
            pins = pins_next
        message = ""
        if status == "converged":
            s = v * np.conj(self.y @ v) - form.s_spec
            for ref in self.island_refs:
                if abs(s[ref].real) > options.tol:
                    status = "island_imbalance"
                    message = (f"AC island at bus {self.network.buses[ref].id} has real power "
                               f"imbalance {s[ref].real * self.network.mva_base:.6g} MW")
        return self._package(v, pins, status, total_iter, rounds, norm, tuple(log), message, options.tol)

    def _package(self, v, pins, status, iters, rounds, norm, log, message, tol) -> PowerFlowSolution:
        net = self.network
        base = net.mva_base
        finite = np.all(np.isfinite(v))
        q, state, _ = self.allocate(v, pins, tol) if finite else (np.full(len(self.units), np.nan), {}, None)
        ngen = len(net.generators)
        gen_p = np.array([g.p_set if g.in_service else 0.0 for g in net.generators], dtype=float)
        gen_q = np.zeros(ngen)
        at_limit, at_max = set(), set()
        hvdc_q, hvdc_lim = {}, set()
        unit_q = {}
        for k, u in enumerate(self.units):
            unit_q[u.key] = q[k] * base
            if u.key[0] == "gen":
                gen_q[u.key[1]] = q[k] * base
                if state.get(k):
                    at_limit.add(u.key[1])
                    if state[k] == MAX:
                        at_max.add(u.key[1])
            else:
                hvdc_q[u.key[1:]] = q[k] * base
                if state.get(k):
                    hvdc_lim.add(u.key[1:])
        for j, emb in enumerate(self.embeddings):
            for end, term in (("from", emb.sending), ("to", emb.receiving)):
                if not term.regulating:
                    hvdc_q[(j, end)] = term.q_inj
        if finite:
            s_slack = v[self.slack] * np.conj(self.y[self.slack] @ v)[0]
            p_need = s_slack.real - self.s_fixed[self.slack].real
            slack_gens = [u.key[1] for u in self.units if u.bus == self.slack and u.key[0] == "gen"]
            if slack_gens:
                gen_p[slack_gens[0]] += p_need * base
        return PowerFlowSolution(
            converged=status == "converged",
            status=status,
            bus_ids=net.bus_ids,
            v_mag=np.abs(v),
            v_ang=np.angle(v),
            gen_p=gen_p,
            gen_q=gen_q,
            gen_at_limit=frozenset(at_limit),
            gen_at_max=frozenset(at_max),
            hvdc_q=hvdc_q,
            hvdc_at_limit=frozenset(hvdc_lim),
            pins={net.buses[b].id: s for b, s in sorted(pins.items())},
            iterations=iters,
            switch_rounds=rounds,
            max_mismatch=norm,
            switch_log=log,
            message=message,
            unit_q=unit_q,
        )


def _newton(form: Formulation, v: np.ndarray, tol: float, max_iter: int):
    norm = math.inf
    for it in range(max_iter + 1):
        f = form.mismatch(v)
        norm = float(np.max(np.abs(f))) if f.size else 0.0
        if not math.isfinite(norm):
            return v, it, "diverged", norm
        if norm <= tol:
            return v, it, "converged", norm
        if it == max_iter:
            break
        try:
            with np.errstate(divide="ignore", invalid="ignore"):
                dx = form.newton_step(v, f)
        except np.linalg.LinAlgError:
            return v, it, "singular_jacobian", norm
        v = form.voltage(form.state(v) + dx, v)
        mag = np.abs(v)
        if np.any(mag > 10) or np.any(mag < 1e-3):
            return v, it + 1, "diverged", norm
    return v, max_iter, "max_iter", norm


def solve(network: Network, options: SolverOptions = SolverOptions(),
          warm_start: Optional[PowerFlowSolution] = None,
          initial_pins: Optional[Mapping[int, str]] = None) -> PowerFlowSolution:
    """Solve the AC power flow; non-convergence is reported, never raised."""
    return PreparedNetwork(network).solve(options, warm_start, initial_pins)


@dataclass(frozen=True)
class SwitchResult:
    pins: dict
    changed: bool
    events: tuple[SwitchEvent, ...]


def check_limits_and_switch(solution: PowerFlowSolution, network: Network,
                            allow_switchback: bool = True, released=(),
                            tol: float = 1e-8) -> SwitchResult:
    """One round of reactive-limit checks against a converged solution.

    ``pins`` maps bus id to ``"max"``/``"min"`` for every demoted group.
    """
    prep = PreparedNetwork(network)
    index = network.bus_index
    pins = prep.fixed_pins()
    for bus_id, st in solution.pins.items():
        if bus_id in index and prep.switchable(index[bus_id]):
            pins[index[bus_id]] = st
    rel = {index[b] for b in released}
    new, events = prep.switch(solution.complex_voltage, pins, rel, allow_switchback, tol)
    ids = network.bus_ids
    return SwitchResult({ids[b]: s for b, s in sorted(new.items())}, bool(events), tuple(events))
