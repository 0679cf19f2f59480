"""Small named graphs used by the test-suite, the CLI bundle and the docs."""

from __future__ import annotations

import math
from typing import Sequence

from .graph_core import MetricGraph


def interval(length=1) -> MetricGraph:
    """Single edge ``V1 -- V2``.  ``length="pi"`` gives the interval ``[0, pi]``."""
    if length == "pi":
        return MetricGraph.build(2, [("e1", 0, 1, "pi")], symbols={"pi": math.pi})
    return MetricGraph.build(2, [("e1", 0, 1, length)])


def star(lengths: Sequence = (1, 1, 1)) -> MetricGraph:
    """Star with centre ``V1`` and one leaf per entry of ``lengths``."""
    edges = [(f"e{i + 1}", 0, i + 1, ell) for i, ell in enumerate(lengths)]
    return MetricGraph.build(len(lengths) + 1, edges)


def triangle(lengths: Sequence = (1, 1, 1), symbols=None) -> MetricGraph:
    a, b, c = lengths
    return MetricGraph.build(3, [("e1", 0, 1, a), ("e2", 1, 2, b), ("e3", 2, 0, c)], symbols=symbols)


def lasso(stem=1, loop=1) -> MetricGraph:
    """Edge ``V1 -- V2`` with a loop attached at ``V2``."""
    return MetricGraph.build(2, [("e1", 0, 1, stem), ("e2", 1, 1, loop)])


def parallel_pair(a="1*u", b="2*u", symbols=None) -> MetricGraph:
    symbols = {"u": 1.0} if symbols is None else symbols
    return MetricGraph.build(2, [("e1", 0, 1, a), ("e2", 0, 1, b)], symbols=symbols)


def square_cycle() -> MetricGraph:
    """Four-cycle with pairwise independent edge lengths."""
    symbols = {"a": 1.0, "b": math.sqrt(2.0), "c": math.sqrt(3.0), "d": math.sqrt(5.0)}
    edges = [("e1", 0, 1, "a"), ("e2", 1, 2, "b"), ("e3", 2, 3, "c"), ("e4", 3, 0, "d")]
    return MetricGraph.build(4, edges, symbols=symbols)


FOUR_VERTEX_LENGTHS = (1.0, math.sqrt(2.0), math.sqrt(3.0), math.sqrt(5.0), math.sqrt(7.0))


def four_vertex_example(lengths: Sequence[float] = FOUR_VERTEX_LENGTHS) -> MetricGraph:
    """Four vertices: ``l1: V1-V2``, ``l2, l3: V2-V3``, ``l4: V3-V4``, loop ``l5`` at ``V4``.

    Default lengths are square roots of distinct primes, each on its own
    symbol, so no cycle is commensurate (the loop still breaks simplicity).
    """
    names = [f"s{i + 1}" for i in range(5)]
    symbols = dict(zip(names, (float(x) for x in lengths)))
    edges = [
        ("l1", 0, 1, names[0]),
        ("l2", 1, 2, names[1]),
        ("l3", 1, 2, names[2]),
        ("l4", 2, 3, names[3]),
        ("l5", 3, 3, names[4]),
    ]
    return MetricGraph.build(4, edges, symbols=symbols)
