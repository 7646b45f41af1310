"""Native YAML case format.

The document has top-level sections ``system``, ``zones``, ``buses``,
``generators``, ``branches`` and ``hvdc_links``; field names match the
dataclasses in :mod:`qvsec.network.model`. ``native_schema.json`` next to this
module is the authoritative schema.
"""

from __future__ import annotations

import dataclasses
import json
from functools import lru_cache
from importlib import resources

import jsonschema
import yaml

from .errors import CaseReferenceError, CaseSchemaError, CaseSyntaxError, CaseValidationError
from .model import Branch, Bus, Generator, HvdcLink, Network
from .validation import validate

_SECTIONS = (("buses", Bus), ("generators", Generator), ("branches", Branch), ("hvdc_links", HvdcLink))


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("native_schema.json").read_text())


def _float_fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls) if "float" in str(f.type)}


def _build(cls, record: dict):
    floats = _float_fields(cls)
    kwargs = {k: (float(v) if k in floats and v is not None else v) for k, v in record.items()}
    return cls(**kwargs)


def _error_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required" and isinstance(err.instance, dict):
        missing = [name for name in err.validator_value if name not in err.instance]
        if missing:
            parts.append(missing[0])
    return "/".join(parts)


def load_document(text: str) -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise CaseSyntaxError(str(exc).splitlines()[0], mark.line + 1 if mark else None) from None
    if not isinstance(doc, dict):
        raise CaseSchemaError("document must be a mapping", "")
    return doc


def network_from_document(doc: dict) -> Network:
    errors = sorted(jsonschema.Draft202012Validator(schema()).iter_errors(doc),
                    key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        raise CaseSchemaError(err.message, _error_path(err))
    parts = {key: tuple(_build(cls, rec) for rec in doc.get(key, [])) for key, cls in _SECTIONS}
    zones = {int(z["id"]): z["label"] for z in doc.get("zones", [])}
    if not zones:
        zones = {z: f"zone {z}" for z in sorted({b.zone for b in parts["buses"]})}
    net = Network(mva_base=float(doc["system"]["mva_base"]), zones=zones,
                  name=doc["system"].get("name", ""), **parts)
    problems = validate(net)
    refs = [v for v in problems if v.code.endswith("_ref")]
    if refs:
        raise CaseReferenceError(refs[0].message, refs[0].subjects[0])
    if problems:
        raise CaseValidationError(problems)
    return net


def parse_native_case(text: str) -> Network:
    """Parse native YAML case text into a validated :class:`Network`."""
    return network_from_document(load_document(text))


def network_to_document(net: Network) -> dict:
    def record(obj):
        return {k: v for k, v in dataclasses.asdict(obj).items() if v is not None}

    system = {"mva_base": net.mva_base}
    if net.name:
        system["name"] = net.name
    return {
        "system": system,
        "zones": [{"id": z, "label": label} for z, label in sorted(net.zones.items())],
        "buses": [record(b) for b in net.buses],
        "generators": [record(g) for g in net.generators],
        "branches": [record(b) for b in net.branches],
        "hvdc_links": [record(h) for h in net.hvdc_links],
    }


def dump_yaml(data) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=120)


def serialize_network(net: Network) -> str:
    return dump_yaml(network_to_document(net))
