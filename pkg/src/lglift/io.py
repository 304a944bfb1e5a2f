"""File formats: graph files, transform serialization, run manifests.

The graph file is a line-oriented text format with two modes.  `graph`
mode declares source vertices and edges; `stations` mode declares the
transform-domain vertices directly (monitoring stations with their own
coordinates) plus adjacency links, bypassing the line-graph construction.
Numeric fields round-trip bit-exactly at 17 significant digits.
"""

from __future__ import annotations

import csv
import json
from typing import Dict, List, Optional, Set, Tuple, Union

from .graph import EdgeRec, Graph, GraphError, Id, LineGraph
from .lifting import CoefficientSet, LiftingConfig, LiftingRecord, LiftingStage


class ParseError(ValueError):
    """Malformed input file; message carries the offending line number."""


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _parse_id(token: str) -> Id:
    try:
        return int(token)
    except ValueError:
        return token


def _parse_float(token: str, lineno: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"line {lineno}: bad {what} {token!r}") from None


def _split_kv(tokens: List[str], lineno: int, allowed: Set[str]) -> Dict[str, float]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"line {lineno}: expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        if key not in allowed:
            raise ParseError(f"line {lineno}: unknown attribute {key!r}")
        out[key] = _parse_float(val, lineno, key)
    return out


def parse_graph_text(text: str) -> Union[Graph, LineGraph]:
    """Parse a graph file; the `mode` line selects the returned type."""
    mode: Optional[str] = None
    vertices: List[Tuple[Id, Optional[Tuple[float, float]]]] = []
    edges: List[EdgeRec] = []
    stations: List[Tuple[Id, Tuple[float, float], Optional[float]]] = []
    links: List[Tuple[Id, Id]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "mode":
            if mode is not None:
                raise ParseError(f"line {lineno}: duplicate mode declaration")
            if len(tokens) != 2 or tokens[1] not in ("graph", "stations"):
                raise ParseError(f"line {lineno}: mode must be 'graph' or 'stations'")
            mode = tokens[1]
        elif kind == "vertex":
            if mode != "graph":
                raise ParseError(f"line {lineno}: 'vertex' outside graph mode")
            if len(tokens) not in (2, 4):
                raise ParseError(f"line {lineno}: vertex takes id or id x y")
            coord = None
            if len(tokens) == 4:
                coord = (
                    _parse_float(tokens[2], lineno, "x"),
                    _parse_float(tokens[3], lineno, "y"),
                )
            vertices.append((_parse_id(tokens[1]), coord))
        elif kind == "edge":
            if mode != "graph":
                raise ParseError(f"line {lineno}: 'edge' outside graph mode")
            if len(tokens) < 4:
                raise ParseError(f"line {lineno}: edge takes id u v [length=] [value=]")
            attrs = _split_kv(tokens[4:], lineno, {"length", "value"})
            edges.append(
                EdgeRec(
                    id=_parse_id(tokens[1]),
                    u=_parse_id(tokens[2]),
                    v=_parse_id(tokens[3]),
                    length=attrs.get("length"),
                    value=attrs.get("value"),
                )
            )
        elif kind == "station":
            if mode != "stations":
                raise ParseError(f"line {lineno}: 'station' outside stations mode")
            if len(tokens) < 4:
                raise ParseError(f"line {lineno}: station takes id x y [value=]")
            attrs = _split_kv(tokens[4:], lineno, {"value"})
            stations.append(
                (
                    _parse_id(tokens[1]),
                    (
                        _parse_float(tokens[2], lineno, "x"),
                        _parse_float(tokens[3], lineno, "y"),
                    ),
                    attrs.get("value"),
                )
            )
        elif kind == "link":
            if mode != "stations":
                raise ParseError(f"line {lineno}: 'link' outside stations mode")
            if len(tokens) != 3:
                raise ParseError(f"line {lineno}: link takes two station ids")
            links.append((_parse_id(tokens[1]), _parse_id(tokens[2])))
        else:
            raise ParseError(f"line {lineno}: unknown directive {kind!r}")

    if mode is None:
        raise ParseError("line 1: missing 'mode graph' or 'mode stations' declaration")
    try:
        if mode == "graph":
            return Graph(vertices, edges)
        ids = [s[0] for s in stations]
        known = set(ids)
        if len(known) != len(ids):
            raise GraphError("duplicate station id")
        adjacency: Dict[Id, Set[Id]] = {k: set() for k in ids}
        for a, b in links:
            if a not in known or b not in known:
                raise GraphError(f"link references unknown station {a!r} or {b!r}")
            adjacency[a].add(b)
            adjacency[b].add(a)
        coords = {s[0]: s[1] for s in stations}
        values = {s[0]: s[2] for s in stations if s[2] is not None} or None
        return LineGraph(ids, adjacency, coords=coords, values=values)
    except GraphError as exc:
        raise ParseError(str(exc)) from exc


def parse_graph(path: str) -> Union[Graph, LineGraph]:
    with open(path) as fh:
        return parse_graph_text(fh.read())


def serialize_graph(graph: Graph) -> str:
    lines = ["mode graph"]
    for vid, coord in graph.coords.items():
        if coord is None:
            lines.append(f"vertex {vid}")
        else:
            lines.append(f"vertex {vid} {_fmt(coord[0])} {_fmt(coord[1])}")
    for e in graph.edges:
        parts = [f"edge {e.id} {e.u} {e.v}"]
        if e.length is not None:
            parts.append(f"length={_fmt(e.length)}")
        if e.value is not None:
            parts.append(f"value={_fmt(e.value)}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def serialize_line_graph(lg: LineGraph) -> str:
    if lg.coords is None:
        raise GraphError("stations mode requires coordinates on every vertex")
    lines = ["mode stations"]
    for k in lg.ids:
        x, y = lg.coords[k]
        row = f"station {k} {_fmt(x)} {_fmt(y)}"
        if lg.values and k in lg.values:
            row += f" value={_fmt(lg.values[k])}"
        lines.append(row)
    for pair in lg.edges():
        a, b = sorted(pair, key=lg.index.__getitem__)
        lines.append(f"link {a} {b}")
    return "\n".join(lines) + "\n"


def write_graph(path: str, obj: Union[Graph, LineGraph]) -> None:
    text = serialize_graph(obj) if isinstance(obj, Graph) else serialize_line_graph(obj)
    with open(path, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# transform serialization: JSON record + CSV coefficients
#
# Ids inside the record are stored as positions into the "ids" list, so
# arbitrary hashable ids survive the trip.

def record_to_dict(record: LiftingRecord) -> dict:
    pos = {k: i for i, k in enumerate(record.ids)}
    return {
        "ids": [str(k) for k in record.ids],
        "id_kind": "int" if all(isinstance(k, int) for k in record.ids) else "str",
        "config": record.config.to_dict(),
        "surviving": [pos[k] for k in record.surviving],
        "initial_integrals": [record.initial_integrals[k] for k in record.ids],
        "final_integrals": [record.final_integrals[k] for k in record.surviving],
        "stages": [
            {
                "stage": st.stage,
                "removed": pos[st.removed],
                "neighbors": [pos[s] for s in st.neighbors],
                "a": list(st.a),
                "b": list(st.b),
                "integral": st.integral,
                "edges_added": [[pos[u], pos[v], w] for u, v, w in st.edges_added],
                "edges_removed": [[pos[u], pos[v]] for u, v in st.edges_removed],
            }
            for st in record.stages
        ],
    }


def record_from_dict(d: dict) -> LiftingRecord:
    conv = int if d.get("id_kind") == "int" else str
    ids = tuple(conv(k) for k in d["ids"])
    surviving = tuple(ids[i] for i in d["surviving"])
    stages = tuple(
        LiftingStage(
            stage=s["stage"],
            removed=ids[s["removed"]],
            neighbors=tuple(ids[i] for i in s["neighbors"]),
            a=tuple(s["a"]),
            b=tuple(s["b"]),
            integral=s["integral"],
            edges_added=tuple((ids[u], ids[v], w) for u, v, w in s["edges_added"]),
            edges_removed=tuple((ids[u], ids[v]) for u, v in s["edges_removed"]),
        )
        for s in d["stages"]
    )
    return LiftingRecord(
        stages=stages,
        initial_integrals=dict(zip(ids, d["initial_integrals"])),
        final_integrals=dict(zip(surviving, d["final_integrals"])),
        surviving=surviving,
        config=LiftingConfig.from_dict(d["config"]),
        ids=ids,
    )


def write_transform(prefix: str, coeffs: CoefficientSet, record: LiftingRecord) -> Tuple[str, str]:
    """Write <prefix>.record.json and <prefix>.coeffs.csv; returns the paths."""
    record_path = f"{prefix}.record.json"
    coeffs_path = f"{prefix}.coeffs.csv"
    with open(record_path, "w") as fh:
        json.dump(record_to_dict(record), fh, indent=1)
    with open(coeffs_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "id", "value", "scale", "level"])
        for k in record.removal_order:
            level = "" if coeffs.levels is None else coeffs.levels[k]
            writer.writerow(
                ["detail", k, _fmt(coeffs.details[k]), _fmt(coeffs.scales[k]), level]
            )
        for k in record.surviving:
            writer.writerow(["scaling", k, _fmt(coeffs.scaling[k]), "", ""])
    return record_path, coeffs_path


def read_transform(prefix: str) -> Tuple[CoefficientSet, LiftingRecord]:
    with open(f"{prefix}.record.json") as fh:
        record = record_from_dict(json.load(fh))
    conv = int if all(isinstance(k, int) for k in record.ids) else str
    details, scaling, scales, levels = {}, {}, {}, {}
    with open(f"{prefix}.coeffs.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            k = conv(row["id"])
            if row["kind"] == "detail":
                details[k] = float(row["value"])
                scales[k] = float(row["scale"])
                if row["level"]:
                    levels[k] = int(row["level"])
            else:
                scaling[k] = float(row["value"])
    coeffs = CoefficientSet(
        details=details, scaling=scaling, scales=scales, levels=levels or None
    )
    return coeffs, record


# ---------------------------------------------------------------------------
# run manifests

def write_manifest(path: str, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def read_manifest(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
