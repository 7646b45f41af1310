"""Reader for version-2 MATPOWER-style case text.

Only the ``bus``, ``gen`` and ``branch`` tables plus ``baseMVA`` are honored.
Other sections (``gencost``, ``areas``...) are skipped; extra columns beyond
the honored ones are dropped with a warning.
"""

from __future__ import annotations

import logging
import math
import re

from .errors import CaseReferenceError, CaseSyntaxError, CaseValidationError
from .model import PQ, PV, SLACK, Branch, Bus, Generator, Network
from .validation import validate

log = logging.getLogger(__name__)

_ASSIGN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")
_KIND = {1: PQ, 2: PV, 3: SLACK}
_HONORED = {"bus": 13, "gen": 8, "branch": 13}
_REQUIRED = {"bus": 10, "gen": 8, "branch": 11}


def _strip_comment(line: str) -> str:
    cut = line.find("%")
    return line if cut < 0 else line[:cut]


def _number(tok: str, lineno: int) -> float:
    low = tok.lower()
    if low in ("inf", "+inf"):
        return math.inf
    if low == "-inf":
        return -math.inf
    try:
        return float(tok)
    except ValueError:
        raise CaseSyntaxError(f"expected a number, got {tok!r}", lineno) from None


def _read_tables(text: str):
    scalars: dict[str, tuple[str, int]] = {}
    tables: dict[str, list[tuple[int, list[float]]]] = {}
    current: str | None = None
    opened_at = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if current is None:
            if not line or line.startswith("function"):
                continue
            m = _ASSIGN.match(line)
            if not m:
                raise CaseSyntaxError(f"unrecognized statement {line!r}", lineno)
            key, rhs = m.group(1), m.group(2).strip()
            if rhs.startswith("["):
                current, opened_at = key, lineno
                tables[key] = []
                line = rhs[1:]
            else:
                scalars[key] = (rhs.rstrip(";").strip(), lineno)
                continue
        # inside a matrix literal
        closing = "]" in line
        body = line.split("]")[0]
        for chunk in body.split(";"):
            toks = chunk.replace(",", " ").split()
            if toks:
                tables[current].append((lineno, [_number(t, lineno) for t in toks]))
        if closing:
            current = None
    if current is not None:
        raise CaseSyntaxError(f"matrix mpc.{current} is never closed", opened_at)
    return scalars, tables


def parse_standard_case(text: str, name: str = "") -> Network:
    """Parse MATPOWER version-2 case text into a validated :class:`Network`."""
    scalars, tables = _read_tables(text)
    if "version" in scalars:
        version, lineno = scalars["version"]
        if version.strip("'\"") != "2":
            raise CaseSyntaxError(f"unsupported case version {version}", lineno)
    if "baseMVA" not in scalars:
        raise CaseSyntaxError("missing mpc.baseMVA")
    mva_base = _number(*scalars["baseMVA"])
    for key in ("bus", "gen", "branch"):
        if key not in tables:
            raise CaseSyntaxError(f"missing mpc.{key} table")
        for lineno, row in tables[key]:
            if len(row) < _REQUIRED[key]:
                raise CaseSyntaxError(
                    f"mpc.{key} row has {len(row)} columns, need at least {_REQUIRED[key]}", lineno)
        widest = max((len(r) for _, r in tables[key]), default=0)
        if widest > _HONORED[key]:
            log.warning("mpc.%s: ignoring unsupported columns %d-%d", key, _HONORED[key] + 1, widest)

    bus_rows = {}
    for lineno, row in tables["bus"]:
        bus_id = int(row[0])
        if bus_id in bus_rows:
            raise CaseSyntaxError(f"duplicate bus {bus_id}", lineno)
        if int(row[1]) not in _KIND:
            raise CaseSyntaxError(f"bus {bus_id} has unsupported type {int(row[1])}", lineno)
        bus_rows[bus_id] = (lineno, row)

    gens = []
    for lineno, row in tables["gen"]:
        bus_id = int(row[0])
        if bus_id not in bus_rows:
            raise CaseReferenceError(f"line {lineno}: generator references undeclared bus {bus_id}", bus_id)
        gens.append(Generator(bus=bus_id, p_set=row[1], v_set=row[5], q_min=row[4], q_max=row[3],
                              in_service=row[7] > 0))

    branches = []
    for lineno, row in tables["branch"]:
        f, t = int(row[0]), int(row[1])
        for end in (f, t):
            if end not in bus_rows:
                raise CaseReferenceError(f"line {lineno}: branch references undeclared bus {end}", end)
        if row[2] == 0 and row[3] == 0:
            raise CaseSyntaxError(f"branch {f}-{t} has zero impedance", lineno)
        tap = row[8] if row[8] != 0 else 1.0
        branches.append(Branch(from_bus=f, to_bus=t, r=row[2], x=row[3], b=row[4], tap=tap,
                               shift=math.radians(row[9]), rating=row[5], in_service=row[10] > 0))

    regulated = {g.bus for g in gens if g.in_service}
    buses = []
    for bus_id, (lineno, row) in bus_rows.items():
        kind = _KIND[int(row[1])]
        if kind == PV and bus_id not in regulated:
            log.warning("bus %d is typed PV but has no in-service generator; treating as pq", bus_id)
            kind = PQ
        elif kind == PQ and bus_id in regulated:
            log.warning("bus %d is typed PQ but hosts a generator; treating as pv", bus_id)
            kind = PV
        base_kv = row[9]
        if base_kv <= 0:
            base_kv = 1.0
        buses.append(Bus(id=bus_id, kind=kind, v_mag=row[7], v_ang=math.radians(row[8]),
                         base_kv=base_kv, zone=int(row[10]) if len(row) > 10 else 1,
                         p_load=row[2], q_load=row[3],
                         g_shunt=row[4] / mva_base, b_shunt=row[5] / mva_base,
                         v_max=row[11] if len(row) > 11 else 1.1,
                         v_min=row[12] if len(row) > 12 else 0.9))

    if not any(b.kind == SLACK for b in buses):
        raise CaseSyntaxError("case has no slack bus (type 3)")
    zones = {z: f"zone {z}" for z in sorted({b.zone for b in buses})}
    net = Network(mva_base=mva_base, buses=tuple(buses), generators=tuple(gens),
                  branches=tuple(branches), zones=zones, name=name)
    problems = validate(net)
    if problems:
        raise CaseValidationError(problems)
    return net
