"""Electrical network data model.

All containers are frozen dataclasses; scenario code derives modified copies
with :func:`dataclasses.replace` instead of mutating a shared network.

Units follow the usual planning-case conventions: loads, generator outputs
and converter limits in MW / MVAr, impedances and shunts in per unit on the
network MVA base, angles in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Optional

SLACK = "slack"
PV = "pv"
PQ = "pq"
BUS_KINDS = (SLACK, PV, PQ)

P_PF = "p_pf"
P_V = "p_v"
SCHEMES = (P_PF, P_V)

INF = math.inf


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    v_mag: float = 1.0
    v_ang: float = 0.0
    base_kv: float = 1.0
    zone: int = 1
    p_load: float = 0.0
    q_load: float = 0.0
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    v_min: float = 0.9
    v_max: float = 1.1


@dataclass(frozen=True)
class Generator:
    """Reactive-capable source regulating its bus voltage.

    ``fictitious`` marks the unbounded study source used by Q-V sweeps; such
    units carry ``q_min = -inf`` and ``q_max = +inf``.
    """

    bus: int
    p_set: float
    v_set: float = 1.0
    q_min: float = -INF
    q_max: float = INF
    in_service: bool = True
    fictitious: bool = False

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.q_min) and math.isinf(self.q_max)


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0
    tap: float = 1.0
    shift: float = 0.0
    rating: float = 0.0
    in_service: bool = True


@dataclass(frozen=True)
class HvdcLink:
    """Two-terminal VSC link.

    Power factors are signed: positive means lagging, negative leading. A
    lagging converter injects reactive power with the same sign as its real
    power injection, so a lagging receiving end delivers Q to its bus and a
    lagging sending end absorbs Q from its bus.

    A p_pf end may instead carry a fixed reactive injection (``q_from`` /
    ``q_to``, MVAr into the bus), which takes precedence over its power
    factor. This is the only way to describe a converter at zero real power.
    """

    from_bus: int
    to_bus: int
    p_set: float
    scheme: str
    loss_factor: float = 0.0
    pf_from: Optional[float] = None
    pf_to: Optional[float] = None
    v_set_from: Optional[float] = None
    v_set_to: Optional[float] = None
    q_min_from: Optional[float] = None
    q_max_from: Optional[float] = None
    q_min_to: Optional[float] = None
    q_max_to: Optional[float] = None
    q_from: Optional[float] = None
    q_to: Optional[float] = None


@dataclass(frozen=True)
class Network:
    mva_base: float
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    branches: tuple[Branch, ...]
    hvdc_links: tuple[HvdcLink, ...] = ()
    zones: Mapping[int, str] = field(default_factory=dict)
    name: str = ""

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index[bus_id]]

    @property
    def slack_bus(self) -> Bus:
        return next(b for b in self.buses if b.kind == SLACK)

    def regulating_buses(self) -> set[int]:
        """Buses holding an in-service generator or a P-V converter end."""
        out = {g.bus for g in self.generators if g.in_service}
        for link in self.hvdc_links:
            if link.scheme == P_V:
                out.update((link.from_bus, link.to_bus))
        return out

    def pq_buses(self) -> list[int]:
        reg = self.regulating_buses()
        return [b.id for b in self.buses if b.kind == PQ and b.id not in reg]

    def replace(self, **changes) -> "Network":
        return replace(self, **changes)

    def with_branch(self, index: int, **changes) -> "Network":
        branches = list(self.branches)
        branches[index] = replace(branches[index], **changes)
        return replace(self, branches=tuple(branches))

    def with_bus(self, bus_id: int, **changes) -> "Network":
        buses = list(self.buses)
        i = self.bus_index[bus_id]
        buses[i] = replace(buses[i], **changes)
        return replace(self, buses=tuple(buses))


def mw_to_pu(value: float, mva_base: float) -> float:
    return value / mva_base


def pu_to_mw(value: float, mva_base: float) -> float:
    return value * mva_base
