"""Branch flows and system power balance from a solved operating point."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..network import Network
from .newton import PowerFlowSolution
from .ybus import build_ybus


@dataclass(frozen=True)
class BranchFlows:
    s_from: np.ndarray  # MVA leaving the from bus into each branch
    s_to: np.ndarray  # MVA leaving the to bus into each branch

    @property
    def losses(self) -> np.ndarray:
        return self.s_from + self.s_to


def branch_flows(network: Network, solution: PowerFlowSolution) -> BranchFlows:
    ybus = build_ybus(network)
    v = solution.complex_voltage
    index = network.bus_index
    f = np.array([index[b.from_bus] for b in network.branches], dtype=int)
    t = np.array([index[b.to_bus] for b in network.branches], dtype=int)
    base = network.mva_base
    s_from = v[f] * np.conj(ybus.yf @ v) * base
    s_to = v[t] * np.conj(ybus.yt @ v) * base
    return BranchFlows(s_from, s_to)


@dataclass(frozen=True)
class PowerBalance:
    generation: complex
    load: complex
    series_losses: complex
    shunt_consumption: complex
    hvdc_losses: float
    hvdc_reactive: float

    @property
    def residual(self) -> complex:
        return (self.generation + self.hvdc_reactive * 1j - self.load - self.series_losses
                - self.shunt_consumption - self.hvdc_losses)


def power_balance(network: Network, solution: PowerFlowSolution) -> PowerBalance:
    """MW/MVAr bookkeeping; ``residual`` should vanish at convergence.

    Line charging is part of ``series_losses`` (it is inside the branch terms).
    HVDC converter reactive output counts as a source.
    """
    flows = branch_flows(network, solution)
    base = network.mva_base
    gen = complex(np.sum(solution.gen_p) + 1j * np.sum(solution.gen_q))
    load = complex(sum(b.p_load + 1j * b.q_load for b in network.buses))
    vm2 = solution.v_mag ** 2
    shunt = complex(sum(vm2[i] * (b.g_shunt - 1j * b.b_shunt) for i, b in enumerate(network.buses)) * base)
    hvdc_loss = sum(l.p_set * l.loss_factor for l in network.hvdc_links)
    hvdc_q = float(sum(solution.hvdc_q.values()))
    return PowerBalance(gen, load, complex(np.sum(flows.losses)), shunt, hvdc_loss, hvdc_q)
