"""Finite compact metric graphs: data model, combinatorics, simplicity criteria.

Vertices are the integers ``0 .. N-1``.  Every edge is an interval
``[0, l]`` whose point ``x = 0`` is glued to ``tail`` and ``x = l`` to
``head``; ``tail == head`` marks a loop.

Edge lengths are stored exactly as ``coeff * symbol`` with a rational
coefficient.  Distinct symbols are declared rationally independent, which
makes the rational-independence test in :func:`rationally_dependent`
decidable without looking at floating point values.  Plain numbers passed
to :meth:`MetricGraph.build` become exact rationals on the unit symbol
``"1"`` (every double is a rational number), so such lengths are always
mutually commensurate.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import InvalidGraphError

UNIT_SYMBOL = "1"

LengthLike = Union["LengthValue", float, int, Fraction, str, tuple]


@dataclass(frozen=True)
class LengthValue:
    """Exact edge length ``coeff * symbol`` together with its numeric value."""

    coeff: Fraction
    symbol: str
    numeric: float

    @classmethod
    def of(cls, coeff, symbol: str, symbols: Mapping[str, float]) -> "LengthValue":
        coeff = Fraction(coeff)
        if symbol not in symbols:
            raise InvalidGraphError(f"undeclared length symbol {symbol!r}")
        return cls(coeff, symbol, float(coeff) * float(symbols[symbol]))

    def __str__(self) -> str:
        if self.symbol == UNIT_SYMBOL:
            return str(self.coeff)
        return f"{self.coeff}*{self.symbol}"


@dataclass(frozen=True)
class Edge:
    id: str
    tail: int
    head: int
    length: LengthValue

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head

    def reversed(self) -> "Edge":
        return Edge(self.id, self.head, self.tail, self.length)


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    connected: bool
    problems: tuple[str, ...] = ()


@dataclass(frozen=True)
class IncidenceSets:
    """Edge ids grouped by vertex: ``E_j`` (non-loops), ``L_j`` (loops), ``C_{j,p}``."""

    non_loops: tuple[frozenset, ...]
    loops: tuple[frozenset, ...]
    parallel: Mapping[tuple[int, int], frozenset]

    def connecting(self, j: int, p: int) -> frozenset:
        if j == p:
            raise ValueError("C_{j,p} is only defined for j != p")
        return self.parallel.get((min(j, p), max(j, p)), frozenset())


@dataclass(frozen=True)
class MetricGraph:
    vertex_count: int
    edges: tuple[Edge, ...]
    symbol_table: Mapping[str, float] = field(default_factory=lambda: {UNIT_SYMBOL: 1.0})
    vertex_names: Optional[tuple[str, ...]] = None

    @classmethod
    def build(
        cls,
        vertex_count: int,
        edges: Iterable[tuple],
        symbols: Optional[Mapping[str, float]] = None,
        vertex_names: Optional[Sequence[str]] = None,
    ) -> "MetricGraph":
        """Convenience constructor.

        ``edges`` holds ``(tail, head, length)`` or ``(id, tail, head, length)``
        tuples.  A length is a :class:`LengthValue`, a plain number (exact
        rational on the unit symbol), a ``(coeff, symbol)`` pair, or a string
        such as ``"3/2*u"``.
        """
        table = {UNIT_SYMBOL: 1.0}
        if symbols:
            table.update({str(k): float(v) for k, v in symbols.items()})
        built = []
        for i, spec in enumerate(edges):
            if len(spec) == 4:
                eid, tail, head, length = spec
            else:
                tail, head, length = spec
                eid = f"e{i + 1}"
            built.append(Edge(str(eid), int(tail), int(head), _as_length(length, table)))
        names = tuple(vertex_names) if vertex_names is not None else None
        return cls(int(vertex_count), tuple(built), table, names)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([e.length.numeric for e in self.edges], dtype=float)

    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([e.tail for e in self.edges], dtype=int)

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([e.head for e in self.edges], dtype=int)

    @cached_property
    def endpoints(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per vertex, the ``(edge index, side)`` pairs glued to it; side 0 is x=0."""
        ends = [[] for _ in range(self.vertex_count)]
        for t, e in enumerate(self.edges):
            if 0 <= e.tail < self.vertex_count:
                ends[e.tail].append((t, 0))
            if 0 <= e.head < self.vertex_count:
                ends[e.head].append((t, 1))
        return tuple(tuple(v) for v in ends)

    def vertex_name(self, j: int) -> str:
        if self.vertex_names is not None:
            return self.vertex_names[j]
        return f"V{j + 1}"

    def edge_index(self, edge_id: str) -> int:
        for t, e in enumerate(self.edges):
            if e.id == edge_id:
                return t
        raise KeyError(edge_id)

    def with_edge_reversed(self, which) -> "MetricGraph":
        """Copy of the graph with the orientation of edge(s) ``which`` swapped."""
        if isinstance(which, (int, np.integer)):
            which = [which]
        flip = set(int(w) for w in which)
        edges = tuple(e.reversed() if t in flip else e for t, e in enumerate(self.edges))
        return MetricGraph(self.vertex_count, edges, self.symbol_table, self.vertex_names)

    def scaled(self, factor) -> "MetricGraph":
        """Copy with every edge length multiplied by the rational ``factor``."""
        factor = Fraction(factor)
        edges = tuple(
            Edge(
                e.id,
                e.tail,
                e.head,
                LengthValue(e.length.coeff * factor, e.length.symbol, e.length.numeric * float(factor)),
            )
            for e in self.edges
        )
        return MetricGraph(self.vertex_count, edges, self.symbol_table, self.vertex_names)


def _as_length(length: LengthLike, table: dict) -> LengthValue:
    if isinstance(length, LengthValue):
        return length
    if isinstance(length, tuple):
        coeff, symbol = length
        return LengthValue.of(coeff, str(symbol), table)
    if isinstance(length, str):
        if "*" in length:
            coeff, symbol = length.split("*", 1)
            return LengthValue.of(Fraction(coeff.strip()), symbol.strip(), table)
        if length.strip() in table:
            return LengthValue.of(1, length.strip(), table)
        try:
            value = Fraction(length.strip())
        except ValueError:
            raise InvalidGraphError(f"undeclared length symbol {length.strip()!r}") from None
        return LengthValue.of(value, UNIT_SYMBOL, table)
    value = Fraction(length)
    return LengthValue(value, UNIT_SYMBOL, float(length))


# ---------------------------------------------------------------------------
# validation and combinatorics
# ---------------------------------------------------------------------------


def _is_connected(g: MetricGraph) -> bool:
    if g.vertex_count <= 0:
        return False
    adj = defaultdict(set)
    for e in g.edges:
        adj[e.tail].add(e.head)
        adj[e.head].add(e.tail)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == g.vertex_count


def validate_graph(g: MetricGraph) -> ValidationReport:
    problems = []
    if g.vertex_count < 1:
        problems.append("graph has no vertices")
    if not g.edges:
        problems.append("graph has no edges")
    seen_ids = set()
    for e in g.edges:
        if e.id in seen_ids:
            problems.append(f"duplicate edge id {e.id!r}")
        seen_ids.add(e.id)
        for end in (e.tail, e.head):
            if not 0 <= end < g.vertex_count:
                problems.append(f"edge {e.id!r} references dangling vertex index {end}")
        if e.length.coeff <= 0 or not e.length.numeric > 0:
            problems.append(f"edge {e.id!r} has nonpositive length")
        if e.length.symbol not in g.symbol_table:
            problems.append(f"edge {e.id!r} uses undeclared symbol {e.length.symbol!r}")
        elif not g.symbol_table[e.length.symbol] > 0:
            problems.append(f"symbol {e.length.symbol!r} has nonpositive value")
    used = set()
    for e in g.edges:
        used.update((e.tail, e.head))
    for v in range(g.vertex_count):
        if v not in used:
            problems.append(f"vertex {g.vertex_name(v)} has no incident edge")
    connected = not problems and _is_connected(g)
    if not problems and not connected:
        problems.append("graph is disconnected")
    return ValidationReport(not problems, connected, tuple(problems))


def require_valid(g: MetricGraph) -> None:
    report = validate_graph(g)
    if not report.valid:
        raise InvalidGraphError("; ".join(report.problems))


def vertex_valences(g: MetricGraph) -> np.ndarray:
    """Number of edge endpoints in each vertex class (loops count twice)."""
    require_valid(g)
    return np.array([len(ends) for ends in g.endpoints], dtype=int)


def incidence_sets(g: MetricGraph) -> IncidenceSets:
    require_valid(g)
    non_loops = [set() for _ in range(g.vertex_count)]
    loops = [set() for _ in range(g.vertex_count)]
    parallel = defaultdict(set)
    for e in g.edges:
        if e.is_loop:
            loops[e.tail].add(e.id)
        else:
            non_loops[e.tail].add(e.id)
            non_loops[e.head].add(e.id)
            parallel[(min(e.tail, e.head), max(e.tail, e.head))].add(e.id)
    return IncidenceSets(
        tuple(frozenset(s) for s in non_loops),
        tuple(frozenset(s) for s in loops),
        {key: frozenset(s) for key, s in parallel.items()},
    )


def cycle_basis(g: MetricGraph) -> list[list[str]]:
    """Fundamental cycles of a BFS spanning tree, as lists of edge ids.

    Loops show up as one-edge cycles and each extra parallel edge closes a
    two-edge cycle with the tree edge.
    """
    require_valid(g)
    parent_edge: dict[int, Optional[int]] = {0: None}
    parent: dict[int, Optional[int]] = {0: None}
    depth = {0: 0}
    adj = defaultdict(list)
    for t, e in enumerate(g.edges):
        if not e.is_loop:
            adj[e.tail].append((t, e.head))
            adj[e.head].append((t, e.tail))
    queue = deque([0])
    tree = set()
    while queue:
        v = queue.popleft()
        for t, w in adj[v]:
            if w not in depth:
                depth[w] = depth[v] + 1
                parent[w] = v
                parent_edge[w] = t
                tree.add(t)
                queue.append(w)

    cycles = []
    for t, e in enumerate(g.edges):
        if t in tree:
            continue
        if e.is_loop:
            cycles.append([e.id])
            continue
        a, b = e.tail, e.head
        left, right = [], []
        while depth[a] > depth[b]:
            left.append(parent_edge[a])
            a = parent[a]
        while depth[b] > depth[a]:
            right.append(parent_edge[b])
            b = parent[b]
        while a != b:
            left.append(parent_edge[a])
            right.append(parent_edge[b])
            a, b = parent[a], parent[b]
        path = [t] + left + right[::-1]
        cycles.append([g.edges[i].id for i in path])
    return cycles


def rationally_dependent(lengths: Sequence[LengthValue]) -> bool:
    """Exact test: lengths are dependent iff two of them share a symbol."""
    if not lengths:
        raise ValueError("need at least one length")
    symbols = [ell.symbol for ell in lengths]
    return len(set(symbols)) < len(symbols)


# ---------------------------------------------------------------------------
# simplicity of the minimal operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimplicityReport:
    """``simple`` is ``None`` when the basis-cycle test cannot decide."""

    simple: Optional[bool]
    witness: Optional[tuple[str, ...]] = None
    reason: str = ""
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class DeltaPrimeMinimalReport:
    eigenvalue_free_away_from_zero: Optional[bool]
    witness: Optional[tuple[str, ...]]
    zero_eigenvalue_possible: bool
    zero_kernel_dimension: int
    reason: str = ""
    warnings: tuple[str, ...] = ()


def _parallel_pairs(g: MetricGraph) -> list[tuple[str, str]]:
    groups = defaultdict(list)
    for e in g.edges:
        if not e.is_loop:
            groups[(min(e.tail, e.head), max(e.tail, e.head))].append(e.id)
    pairs = []
    for ids in groups.values():
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                pairs.append((ids[i], ids[j]))
    return pairs


def is_simple_minimal_delta(g: MetricGraph) -> SimplicityReport:
    """Loop-free and no commensurate cycle, checked on basis cycles and parallel pairs."""
    require_valid(g)
    by_id = {e.id: e for e in g.edges}
    for e in g.edges:
        if e.is_loop:
            return SimplicityReport(False, (e.id,), f"loop {e.id}")

    basis = cycle_basis(g)
    for a, b in _parallel_pairs(g):
        if rationally_dependent([by_id[a].length, by_id[b].length]):
            return SimplicityReport(False, (a, b), f"commensurate parallel edges {a}, {b}")
    for cyc in basis:
        if rationally_dependent([by_id[i].length for i in cyc]):
            return SimplicityReport(False, tuple(cyc), "commensurate cycle " + "-".join(cyc))

    # A symbol reused by different edges on different basis cycles may create a
    # commensurate non-basis cycle; refuse to guess in that case.
    owners = defaultdict(set)
    for c, cyc in enumerate(basis):
        for i in cyc:
            owners[by_id[i].length.symbol].add((c, i))
    for symbol, hits in owners.items():
        cycles_hit = {c for c, _ in hits}
        edges_hit = {i for _, i in hits}
        if len(cycles_hit) > 1 and len(edges_hit) > 1:
            msg = f"symbol {symbol!r} is shared by edges on distinct basis cycles"
            return SimplicityReport(None, None, "indeterminate", (msg,))
    return SimplicityReport(True, None, "no loops and no commensurate cycles")


def _is_bipartite(g: MetricGraph) -> bool:
    colour = {0: 0}
    adj = defaultdict(list)
    for e in g.edges:
        if e.is_loop:
            return False
        adj[e.tail].append(e.head)
        adj[e.head].append(e.tail)
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in colour:
                colour[w] = 1 - colour[v]
                queue.append(w)
            elif colour[w] == colour[v]:
                return False
    return True


def minimal_operator_eigenvalue_free_delta_prime(g: MetricGraph) -> DeltaPrimeMinimalReport:
    """Delta-prime analogue: same cycle criterion away from zero, plus the zero mode.

    At ``lambda = 0`` the delta-prime minimal operator has eigenfunctions that
    are constant on every edge with vanishing endpoint sums at each vertex,
    i.e. the kernel of the unsigned incidence matrix.  For a connected graph
    that kernel has dimension ``n - N + 1`` if the graph is bipartite and
    ``n - N`` otherwise; an even cycle always produces one.
    """
    base = is_simple_minimal_delta(g)
    dim = g.n_edges - g.vertex_count + (1 if _is_bipartite(g) else 0)
    return DeltaPrimeMinimalReport(
        base.simple,
        base.witness,
        dim > 0,
        dim,
        base.reason,
        base.warnings,
    )


def dirichlet_spectrum(g: MetricGraph, k_max: float) -> list[tuple[float, int]]:
    """Square roots ``pi m / l_t <= k_max`` of the Dirichlet decoupling, with multiplicity."""
    if not k_max > 0:
        raise ValueError("k_max must be positive")
    values = []
    for ell in g.lengths:
        m_max = int(math.floor(k_max * ell / math.pi * (1 + 1e-14)))
        values.extend(math.pi * m / ell for m in range(1, m_max + 1) if math.pi * m / ell <= k_max * (1 + 1e-14))
    values.sort()
    merged: list[list] = []
    for k in values:
        if merged and abs(k - merged[-1][0]) <= 1e-12 * max(abs(k), 1.0):
            merged[-1][1] += 1
        else:
            merged.append([k, 1])
    return [(float(k), int(m)) for k, m in merged]
