"""CSV readers/writers. Floats are written with ``repr`` so reloads are exact."""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Sequence

import numpy as np

from ..clustering import ClusterModel, FeatureMatrix, order_clusters
from ..qv import QvCurve, QvPoint


class CsvSchemaError(ValueError):
    pass


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if math.isnan(x) else repr(x + 0.0)
    return str(x)


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CsvSchemaError("empty CSV")
    return rows[0], rows[1:]


CURVE_HEADER = ("v_set", "q_fict_mvar", "converged")


def curve_csv(curve: QvCurve) -> str:
    return to_csv(CURVE_HEADER, [(p.v_set, p.q_fict, p.converged) for p in curve.points])


def read_curve_csv(text: str) -> list[QvPoint]:
    header, rows = read_csv(text)
    if tuple(header) != CURVE_HEADER:
        raise CsvSchemaError(f"expected columns {CURVE_HEADER}, got {tuple(header)}")
    return [QvPoint(float(v), float(q), c == "true") for v, q, c in rows]


SUMMARY_HEADER = ("bus", "zone", "q_margin_mvar", "v_nose", "collapse_detected", "rrb", "error")


def summary_csv(network, curves: dict) -> str:
    rows = []
    for bus, c in sorted(curves.items()):
        zone = network.bus(bus).zone
        if isinstance(c, QvCurve):
            rrb = " ".join(str(g) for g, _ in c.rrb)
            rows.append((bus, zone, c.q_margin, c.v_nose, c.collapse_detected, rrb, ""))
        else:
            rows.append((bus, zone, None, None, None, "", c.error))
    return to_csv(SUMMARY_HEADER, rows)


def read_summary_csv(text: str) -> list[tuple[int, float, float]]:
    header, rows = read_csv(text)
    if tuple(header) != SUMMARY_HEADER:
        raise CsvSchemaError(f"expected columns {SUMMARY_HEADER}")
    return [(int(r[0]), float(r[3]), float(r[2])) for r in rows if r[2] != ""]


SCAN_FIXED = ("case", "branch", "from_bus", "to_bus", "scheme", "feasible")


def scan_csv(network, scan) -> str:
    """Rows are cases, columns are zones (``id:label``), entries are percent deltas."""
    zones = list(scan.features.col_ids)
    header = list(SCAN_FIXED) + [f"{z}:{network.zones.get(z, f'zone {z}')}" for z in zones] + ["error"]
    rows = []
    for res in scan.results:
        br = network.branches[res.spec.branch] if 0 <= res.spec.branch < len(network.branches) else None
        deltas = [res.zone_delta_pct.get(z) if res.feasible else None for z in zones]
        rows.append([res.label, res.spec.branch, br.from_bus if br else None, br.to_bus if br else None,
                     res.spec.scheme, res.feasible] + deltas + [res.error or ""])
    return to_csv(header, rows)


def read_scan_csv(text: str) -> tuple[FeatureMatrix, list[dict]]:
    """Feature matrix of the usable rows, plus every row as a dict."""
    header, rows = read_csv(text)
    if tuple(header[:len(SCAN_FIXED)]) != SCAN_FIXED or header[-1] != "error":
        raise CsvSchemaError("not a scan CSV: unexpected header")
    zone_cols = header[len(SCAN_FIXED):-1]
    ids, labels = [], []
    for col in zone_cols:
        zid, sep, label = col.partition(":")
        if not sep or not zid.lstrip("-").isdigit():
            raise CsvSchemaError(f"zone column {col!r} is not 'id:label'")
        ids.append(int(zid))
        labels.append(label)
    records, keep, values = [], [], []
    for row in rows:
        if len(row) != len(header):
            raise CsvSchemaError(f"row has {len(row)} fields, header has {len(header)}")
        rec = dict(zip(header, row))
        records.append(rec)
        cells = row[len(SCAN_FIXED):-1]
        if rec["feasible"] == "true" and all(c not in ("", "nan") for c in cells):
            keep.append(rec["case"])
            values.append([float(c) for c in cells])
    fm = FeatureMatrix(tuple(keep), tuple(labels), np.array(values, dtype=float).reshape(len(keep), len(ids)),
                       tuple(ids))
    return fm, records


def membership_csv(model: ClusterModel) -> str:
    rank = {c: r for r, c in enumerate(order_clusters(model))}
    return to_csv(("case", "cluster", "display_rank"),
                  [(label, c, rank[c]) for label, c in zip(model.rows, model.assignment)])


def centroids_csv(model: ClusterModel) -> str:
    sizes = [model.assignment.count(c) for c in range(model.k)]
    return to_csv(("cluster", "size") + tuple(model.cols),
                  [(c, sizes[c], *[float(v) for v in model.centroids[c]]) for c in range(model.k)])


def elbow_csv(points: Sequence[tuple[int, float]]) -> str:
    return to_csv(("k", "inertia"), points)
