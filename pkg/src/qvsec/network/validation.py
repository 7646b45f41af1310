"""Structural checks on a :class:`Network`.

``validate`` never raises; it returns every violation it finds so callers can
report them together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import BUS_KINDS, P_PF, PQ, SCHEMES, SLACK, Network

# bounded units sharing a bus must agree on the voltage they regulate to
VSET_AGREEMENT_TOL = 1e-9


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    subjects: tuple = ()

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def connected_components(network: Network, include_hvdc: bool = True) -> list[list[int]]:
    """Bus-id components of the in-service graph, each sorted, ordered by first id."""
    parent = {b.id: b.id for b in network.buses}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for br in network.branches:
        if br.in_service and br.from_bus in parent and br.to_bus in parent:
            union(br.from_bus, br.to_bus)
    if include_hvdc:
        for link in network.hvdc_links:
            if link.from_bus in parent and link.to_bus in parent:
                union(link.from_bus, link.to_bus)
    groups: dict[int, list[int]] = {}
    for b in network.buses:
        groups.setdefault(find(b.id), []).append(b.id)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def validate(network: Network) -> list[Violation]:
    out: list[Violation] = []
    add = lambda code, msg, *subj: out.append(Violation(code, msg, tuple(subj)))

    if not network.mva_base > 0:
        add("mva_base", f"MVA base must be positive, got {network.mva_base}")

    ids = [b.id for b in network.buses]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        add("duplicate_bus", f"duplicate bus ids {dupes}", *dupes)
    known = set(ids)

    for b in network.buses:
        if b.kind not in BUS_KINDS:
            add("bus_kind", f"bus {b.id} has unknown kind {b.kind!r}", b.id)
        if not b.v_mag > 0:
            add("bus_voltage", f"bus {b.id} has non-positive voltage {b.v_mag}", b.id)
        if not b.base_kv > 0:
            add("bus_kv", f"bus {b.id} has non-positive base_kv {b.base_kv}", b.id)
        if network.zones and b.zone not in network.zones:
            add("zone_ref", f"bus {b.id} references undeclared zone {b.zone}", b.id)

    slacks = [b.id for b in network.buses if b.kind == SLACK]
    if not slacks:
        add("no_slack", "network has no slack bus")
    elif len(slacks) > 1:
        add("multiple_slack", f"multiple slack buses {slacks}", *slacks)

    if not any(g.in_service for g in network.generators):
        add("no_generator", "network has no in-service generator")

    vsets: dict[int, set[float]] = {}
    for i, g in enumerate(network.generators):
        if g.bus not in known:
            add("gen_ref", f"generator {i} references undeclared bus {g.bus}", g.bus)
            continue
        if g.q_min > g.q_max:
            add("gen_limits", f"generator {i} has q_min {g.q_min} > q_max {g.q_max}", i)
        if g.fictitious and not g.unbounded:
            add("gen_fictitious", f"fictitious generator {i} must have unbounded Q limits", i)
        if not g.v_set > 0:
            add("gen_vset", f"generator {i} has non-positive v_set {g.v_set}", i)
        if g.in_service:
            if network.bus(g.bus).kind == PQ:
                add("gen_bus_kind", f"generator {i} regulates pq bus {g.bus}", i, g.bus)
            if not g.fictitious:
                vsets.setdefault(g.bus, set()).add(g.v_set)

    for i, br in enumerate(network.branches):
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                add("branch_ref", f"branch {i} references undeclared bus {end}", end)
        if br.from_bus == br.to_bus:
            add("branch_loop", f"branch {i} connects bus {br.from_bus} to itself", i)
        if br.r == 0 and br.x == 0:
            add("branch_impedance", f"branch {i} has zero impedance", i)
        if not br.tap > 0:
            add("branch_tap", f"branch {i} has non-positive tap {br.tap}", i)

    for i, link in enumerate(network.hvdc_links):
        tag = f"hvdc link {i}"
        for end in (link.from_bus, link.to_bus):
            if end not in known:
                add("hvdc_ref", f"{tag} references undeclared bus {end}", end)
        if link.from_bus == link.to_bus:
            add("hvdc_loop", f"{tag} connects bus {link.from_bus} to itself", i)
        if not link.p_set >= 0:
            add("hvdc_pset", f"{tag} has negative p_set {link.p_set}", i)
        if not 0 <= link.loss_factor < 1:
            add("hvdc_loss", f"{tag} loss_factor {link.loss_factor} outside [0, 1)", i)
        if link.scheme not in SCHEMES:
            add("hvdc_scheme", f"{tag} has unknown scheme {link.scheme!r}", i)
        elif link.scheme == P_PF:
            for end in ("from", "to"):
                pf, q = getattr(link, f"pf_{end}"), getattr(link, f"q_{end}")
                if q is not None:
                    if not math.isfinite(q):
                        add("hvdc_q", f"{tag} q_{end} must be finite", i)
                elif pf is None or not 0 < abs(pf) <= 1:
                    add("hvdc_pf", f"{tag} pf_{end} must be a signed power factor with 0 < |pf| <= 1", i)
        else:
            for end in ("from", "to"):
                v = getattr(link, f"v_set_{end}")
                lo, hi = getattr(link, f"q_min_{end}"), getattr(link, f"q_max_{end}")
                if v is None or not v > 0:
                    add("hvdc_vset", f"{tag} v_set_{end} must be positive", i)
                if lo is None or hi is None or lo > hi:
                    add("hvdc_qlim", f"{tag} needs q_min_{end} <= q_max_{end}", i)
            for end in (link.from_bus, link.to_bus):
                if end in known and network.bus(end).kind == SLACK:
                    add("hvdc_slack", f"{tag} places a p_v end on slack bus {end}", i, end)
            if link.from_bus in known and link.v_set_from is not None:
                vsets.setdefault(link.from_bus, set()).add(link.v_set_from)
            if link.to_bus in known and link.v_set_to is not None:
                vsets.setdefault(link.to_bus, set()).add(link.v_set_to)

    for bus_id, values in sorted(vsets.items()):
        if max(values) - min(values) > VSET_AGREEMENT_TOL:
            add("vset_conflict", f"regulating units at bus {bus_id} disagree on v_set {sorted(values)}", bus_id)

    if known and not dupes:
        comps = connected_components(network)
        if len(comps) > 1:
            main = max(comps, key=len)
            islands = [c for c in comps if c is not main]
            flat = [b for c in islands for b in c]
            add("islanded", f"buses {flat} are disconnected from the main network", *flat)

    for b in network.buses:
        for value in (b.p_load, b.q_load, b.g_shunt, b.b_shunt):
            if not math.isfinite(value):
                add("bus_value", f"bus {b.id} carries a non-finite load or shunt value", b.id)
                break
    return out
