from .flows import BranchFlows, PowerBalance, branch_flows, power_balance
from .hvdc import HvdcConfigError, HvdcEmbedding, TerminalModel, embed_hvdc, pf_reactive, signed_pf
from .newton import (Formulation, PowerFlowSolution, PreparedNetwork, SolverOptions, SwitchEvent,
                     SwitchResult, check_limits_and_switch, solve, water_fill)
from .ybus import YbusMatrix, build_ybus

__all__ = [
    "BranchFlows", "Formulation", "HvdcConfigError", "HvdcEmbedding", "PowerBalance",
    "PowerFlowSolution", "PreparedNetwork", "SolverOptions", "SwitchEvent", "SwitchResult",
    "TerminalModel", "YbusMatrix", "branch_flows", "build_ybus", "check_limits_and_switch",
    "embed_hvdc", "pf_reactive", "power_balance", "signed_pf", "solve", "water_fill",
]
