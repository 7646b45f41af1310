"""Steady-state VSC-HVDC terminal models.

The DC link itself is not iterated: ``p_set`` and ``loss_factor`` fix both AC
terminal real powers algebraically. Under P-PF both terminals are constant
power injections; under P-V each terminal regulates its bus voltage with Q
free inside its limits, exactly like a generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from ..network import P_PF, P_V, SLACK, HvdcLink, Network


class HvdcConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TerminalModel:
    bus: int
    p_inj: float  # MW injected into the AC bus
    q_inj: Optional[float]  # MVAr, fixed under p_pf; None when regulated
    v_set: Optional[float] = None
    q_min: Optional[float] = None
    q_max: Optional[float] = None

    @property
    def regulating(self) -> bool:
        return self.q_inj is None


@dataclass(frozen=True)
class HvdcEmbedding:
    link: HvdcLink
    sending: TerminalModel
    receiving: TerminalModel

    @property
    def loss_mw(self) -> float:
        return self.link.p_set * self.link.loss_factor


def pf_reactive(p_inj: float, pf: float) -> float:
    """Reactive injection for a signed power factor (positive = lagging)."""
    if not 0 < abs(pf) <= 1:
        raise HvdcConfigError(f"power factor must satisfy 0 < |pf| <= 1, got {pf}")
    return p_inj * math.tan(math.acos(abs(pf))) * math.copysign(1.0, pf) + 0.0


def signed_pf(p_inj: float, q_inj: float) -> float:
    """Inverse of :func:`pf_reactive` for a nonzero real injection."""
    s = math.hypot(p_inj, q_inj)
    pf = abs(p_inj) / s
    lagging = q_inj * p_inj >= 0
    return pf if lagging else -pf


def embed_hvdc(network: Network, link: HvdcLink) -> HvdcEmbedding:
    """Translate a link into the terminal injections/controls used by the solver."""
    index = network.bus_index
    for end in (link.from_bus, link.to_bus):
        if end not in index:
            raise HvdcConfigError(f"HVDC link references unknown bus {end}")
    p_from = -link.p_set
    p_to = link.p_set * (1.0 - link.loss_factor)
    if link.scheme == P_PF:
        q_from = link.q_from if link.q_from is not None else pf_reactive(p_from, link.pf_from)
        q_to = link.q_to if link.q_to is not None else pf_reactive(p_to, link.pf_to)
        return HvdcEmbedding(link, TerminalModel(link.from_bus, p_from, q_from),
                             TerminalModel(link.to_bus, p_to, q_to))
    if link.scheme == P_V:
        for end in (link.from_bus, link.to_bus):
            if network.bus(end).kind == SLACK:
                raise HvdcConfigError(
                    f"p_v converter end on slack bus {end}: the slack voltage is fixed")
        return HvdcEmbedding(
            link,
            TerminalModel(link.from_bus, p_from, None, link.v_set_from, link.q_min_from, link.q_max_from),
            TerminalModel(link.to_bus, p_to, None, link.v_set_to, link.q_min_to, link.q_max_to),
        )
    raise HvdcConfigError(f"unknown HVDC scheme {link.scheme!r}")
