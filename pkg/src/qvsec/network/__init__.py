from .errors import (CaseError, CaseReferenceError, CaseSchemaError, CaseSyntaxError,
                     CaseValidationError)
from .matpower import parse_standard_case
from .model import (BUS_KINDS, INF, P_PF, P_V, PQ, PV, SCHEMES, SLACK, Branch, Bus, Generator,
                    HvdcLink, Network, mw_to_pu, pu_to_mw)
from .native import dump_yaml, parse_native_case, serialize_network
from .validation import Violation, connected_components, validate


def load_case(path) -> Network:
    """Read a case file, dispatching on extension (``.m`` or ``.yaml``/``.yml``)."""
    from pathlib import Path

    path = Path(path)
    text = path.read_text()
    if path.suffix == ".m":
        return parse_standard_case(text, name=path.stem)
    return parse_native_case(text)


__all__ = [
    "BUS_KINDS", "INF", "P_PF", "P_V", "PQ", "PV", "SCHEMES", "SLACK",
    "Branch", "Bus", "Generator", "HvdcLink", "Network", "Violation",
    "CaseError", "CaseReferenceError", "CaseSchemaError", "CaseSyntaxError", "CaseValidationError",
    "connected_components", "dump_yaml", "load_case", "mw_to_pu", "parse_native_case",
    "parse_standard_case", "pu_to_mw", "serialize_network", "validate",
]
