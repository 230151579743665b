"""Feedback-graph families used by the experiment presets."""

from __future__ import annotations

from itertools import combinations
from typing import Sequence

from .graph import FeedbackGraph, GraphError
from .partition import hypercube_graph


def mab(n: int) -> FeedbackGraph:
    """n isolated arms with self-loops (plain multi-armed bandit)."""
    return FeedbackGraph.from_edges(n, [(v, v) for v in range(n)])


def _offsets(sizes: Sequence[int]) -> list[int]:
    out, acc = [], 0
    for s in sizes:
        out.append(acc)
        acc += s
    return out


def loopless_clique_union(sizes: Sequence[int]) -> FeedbackGraph:
    if not sizes or min(sizes) < 2:
        raise GraphError("every clique needs at least two vertices")
    edges = []
    for off, s in zip(_offsets(sizes), sizes):
        edges += [(off + i, off + j) for i in range(s) for j in range(s) if i != j]
    return FeedbackGraph.from_edges(sum(sizes), edges)


def bipartite_union(sizes: Sequence[Sequence[int]]) -> FeedbackGraph:
    """Disjoint complete bipartite graphs K_{a,b}, edges in both directions."""
    parts = [(int(a), int(b)) for a, b in sizes]
    if not parts or min(min(p) for p in parts) < 1:
        raise GraphError("every side needs at least one vertex")
    edges = []
    off = 0
    for a, b in parts:
        left = range(off, off + a)
        right = range(off + a, off + a + b)
        edges += [(u, v) for u in left for v in right]
        edges += [(v, u) for u in left for v in right]
        off += a + b
    return FeedbackGraph.from_edges(off, edges)


def directed_cycle(n: int) -> FeedbackGraph:
    if n < 2:
        raise GraphError("a cycle needs at least two vertices")
    return FeedbackGraph.from_edges(n, [(v, (v + 1) % n) for v in range(n)])


def undirected_cycle(n: int) -> FeedbackGraph:
    if n < 3:
        raise GraphError("an undirected cycle needs at least three vertices")
    edges = [(v, (v + 1) % n) for v in range(n)] + [((v + 1) % n, v) for v in range(n)]
    return FeedbackGraph.from_edges(n, edges)


def hypercube(n: int) -> FeedbackGraph:
    return hypercube_graph(n)


def loopy_star(n: int) -> FeedbackGraph:
    """Centre 0 with a self-loop observing n-1 loop-less leaves."""
    if n < 3:
        raise GraphError("a star needs at least three vertices")
    return FeedbackGraph.from_edges(n, [(0, 0)] + [(0, v) for v in range(1, n)])


def c_corrupted(num_clean: int, corrupted: int) -> FeedbackGraph:
    """``num_clean`` self-loop arms plus ``corrupted`` weakly observable arms.

    The corrupted arms carry no self-loop and form a directed cycle among
    themselves; a single corrupted arm is observed by clean arm 0 instead.
    """
    if num_clean < 1 or corrupted < 1:
        raise GraphError("need at least one clean and one corrupted arm")
    if num_clean + corrupted < 3:
        raise GraphError("need at least three arms so corrupted arms stay weakly observable")
    edges = [(v, v) for v in range(num_clean)]
    bad = list(range(num_clean, num_clean + corrupted))
    if corrupted == 1:
        edges.append((0, bad[0]))
    else:
        edges += [(bad[i], bad[(i + 1) % corrupted]) for i in range(corrupted)]
    return FeedbackGraph.from_edges(num_clean + corrupted, edges)


def complete_loopless(n: int) -> FeedbackGraph:
    return FeedbackGraph.from_edges(n, [(u, v) for u, v in combinations(range(n), 2)] + [
        (v, u) for u, v in combinations(range(n), 2)
    ])


GENERATORS = {
    "mab": mab,
    "loopless_clique_union": loopless_clique_union,
    "bipartite_union": bipartite_union,
    "directed_cycle": directed_cycle,
    "undirected_cycle": undirected_cycle,
    "hypercube": hypercube,
    "loopy_star": loopy_star,
    "c_corrupted": c_corrupted,
}
