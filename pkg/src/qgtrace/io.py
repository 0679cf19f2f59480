"""Text format for graphs, coupling sets and target spectra.

A graph document is JSON (YAML is accepted on input) with the keys::

    symbols:  {name: positive decimal}
    vertices: [name, ...]
    edges:    [{id, from, to, length: {num, den, symbol}}, ...]
    coupling: {type: delta | delta_prime, alpha: {vertex name: decimal}}

``coupling`` is optional; vertices missing from ``alpha`` get 0.  The unit
symbol ``"1"`` is always available and is never written out.  Floats are
printed in shortest round-trip form, so parse -> dump -> parse is the
identity on the in-memory objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import yaml

from .errors import InvalidCouplingError, InvalidGraphError
from .graph_core import UNIT_SYMBOL, LengthValue, MetricGraph, require_valid
from .mfunction import COUPLING_TYPES
from .secular import CouplingSet

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GraphDocument:
    graph: MetricGraph
    coupling: Optional[CouplingSet] = None

    @property
    def vertex_names(self) -> tuple[str, ...]:
        return tuple(self.graph.vertex_name(v) for v in range(self.graph.vertex_count))


def _load_text(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidGraphError(f"document is neither JSON nor YAML: {exc}") from None


def _decimal(value, what: str) -> float:
    if isinstance(value, bool):
        raise InvalidGraphError(f"{what}: expected a number, got {value!r}")
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise InvalidGraphError(f"{what}: expected a number, got {value!r}") from None
    if not math.isfinite(x):
        raise InvalidGraphError(f"{what}: not finite")
    return x


def _positive_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise InvalidGraphError(f"{what}: expected a positive integer, got {value!r}")
    try:
        n = int(value)
    except ValueError:
        raise InvalidGraphError(f"{what}: expected a positive integer, got {value!r}") from None
    if n < 1:
        raise InvalidGraphError(f"{what}: must be >= 1, got {n}")
    return n


def _require_keys(record: Mapping, keys: Sequence[str], what: str) -> None:
    if not isinstance(record, Mapping):
        raise InvalidGraphError(f"{what}: expected a mapping")
    missing = [k for k in keys if k not in record]
    if missing:
        raise InvalidGraphError(f"{what}: missing key(s) {', '.join(missing)}")


def coupling_from_record(record: Any, names: Sequence[str]) -> CouplingSet:
    """Coupling set from ``{type, alpha: {vertex: value}}``; unnamed vertices get 0."""
    if not isinstance(record, Mapping) or "type" not in record:
        raise InvalidCouplingError("coupling record needs a 'type'")
    kind = record["type"]
    if kind not in COUPLING_TYPES:
        raise InvalidCouplingError(f"unknown coupling type {kind!r}")
    alpha = record.get("alpha") or {}
    if not isinstance(alpha, Mapping):
        raise InvalidCouplingError("'alpha' must map vertex names to numbers")
    index = {n: i for i, n in enumerate(names)}
    values = [0.0] * len(names)
    for name, value in alpha.items():
        if str(name) not in index:
            raise InvalidCouplingError(f"coupling names unknown vertex {name!r}")
        try:
            values[index[str(name)]] = _decimal(value, f"alpha[{name}]")
        except InvalidGraphError as exc:
            raise InvalidCouplingError(str(exc)) from None
    return CouplingSet(kind, tuple(values))


def coupling_to_record(coupling: CouplingSet, names: Sequence[str]) -> dict:
    return {"type": coupling.coupling_type, "alpha": {n: float(a) for n, a in zip(names, coupling.alpha)}}


def graph_from_data(data: Any) -> GraphDocument:
    _require_keys(data, ("vertices", "edges"), "graph document")
    symbols = data.get("symbols") or {}
    if not isinstance(symbols, Mapping):
        raise InvalidGraphError("'symbols' must be a mapping")
    table = {}
    for name, value in symbols.items():
        x = _decimal(value, f"symbol {name!r}")
        if not x > 0:
            raise InvalidGraphError(f"symbol {name!r} must be positive")
        if str(name) == UNIT_SYMBOL and x != 1.0:
            raise InvalidGraphError(f"symbol {UNIT_SYMBOL!r} is reserved for the unit length")
        table[str(name)] = x
    table.setdefault(UNIT_SYMBOL, 1.0)

    vertices = data["vertices"]
    if not isinstance(vertices, list) or not vertices:
        raise InvalidGraphError("'vertices' must be a nonempty list")
    names = [str(v) for v in vertices]
    if len(set(names)) != len(names):
        raise InvalidGraphError("duplicate vertex names")
    index = {n: i for i, n in enumerate(names)}

    edges = data["edges"]
    if not isinstance(edges, list):
        raise InvalidGraphError("'edges' must be a list")
    built = []
    for i, rec in enumerate(edges):
        _require_keys(rec, ("id", "from", "to", "length"), f"edge #{i + 1}")
        for end in ("from", "to"):
            if str(rec[end]) not in index:
                raise InvalidGraphError(f"edge {rec['id']!r}: undeclared vertex {rec[end]!r}")
        length = rec["length"]
        _require_keys(length, ("num",), f"edge {rec['id']!r} length")
        num = _positive_int(length["num"], f"edge {rec['id']!r} num")
        den = _positive_int(length.get("den", 1), f"edge {rec['id']!r} den")
        symbol = str(length.get("symbol", UNIT_SYMBOL))
        if symbol not in table:
            raise InvalidGraphError(f"edge {rec['id']!r}: undeclared symbol {symbol!r}")
        value = LengthValue.of(Fraction(num, den), symbol, table)
        built.append((str(rec["id"]), index[str(rec["from"])], index[str(rec["to"])], value))

    g = MetricGraph.build(len(names), built, symbols=table, vertex_names=names)
    require_valid(g)
    coupling = None
    if data.get("coupling") is not None:
        coupling = coupling_from_record(data["coupling"], names)
    return GraphDocument(g, coupling)


def graph_to_data(doc: GraphDocument) -> dict:
    g = doc.graph
    names = doc.vertex_names
    out: dict = {
        "symbols": {k: float(v) for k, v in g.symbol_table.items() if k != UNIT_SYMBOL},
        "vertices": list(names),
        "edges": [
            {
                "id": e.id,
                "from": names[e.tail],
                "to": names[e.head],
                "length": {
                    "num": e.length.coeff.numerator,
                    "den": e.length.coeff.denominator,
                    "symbol": e.length.symbol,
                },
            }
            for e in g.edges
        ],
    }
    if doc.coupling is not None:
        out["coupling"] = coupling_to_record(doc.coupling, names)
    return out


def loads_graph(text: str) -> GraphDocument:
    return graph_from_data(_load_text(text))


def dumps_graph(doc: GraphDocument) -> str:
    return json.dumps(graph_to_data(doc), indent=2) + "\n"


def read_graph(path) -> GraphDocument:
    return loads_graph(Path(path).read_text())


def write_graph(doc: GraphDocument, path) -> None:
    Path(path).write_text(dumps_graph(doc))


def read_coupling(path, names: Sequence[str]) -> CouplingSet:
    """A coupling file holds either a bare coupling record or ``{coupling: record}``."""
    data = _load_text(Path(path).read_text())
    if isinstance(data, Mapping) and "coupling" in data:
        data = data["coupling"]
    return coupling_from_record(data, names)


def read_target(path) -> tuple[list[float], Optional[int]]:
    """Target eigenvalues and optional weight.

    Accepts ``{eigenvalues: [...], weight: n}``, a bare list, or whitespace
    separated numbers.
    """
    text = Path(path).read_text()
    try:
        data = _load_text(text)
    except InvalidGraphError:
        data = None
    weight = None
    if isinstance(data, Mapping):
        if "eigenvalues" not in data:
            raise InvalidGraphError("target document needs 'eigenvalues'")
        weight = data.get("weight")
        data = data["eigenvalues"]
    if not isinstance(data, list):
        data = text.split()
    values = [_decimal(x, "target eigenvalue") for x in data]
    if not values:
        raise InvalidGraphError("target spectrum is empty")
    return sorted(values), None if weight is None else _positive_int(weight, "weight")
