"""Directed feedback graphs with self-loops.

Pulling arm ``u`` reveals the losses of every ``v`` with an edge ``u -> v``.
Vertices are dense 0-based integers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence


class GraphError(ValueError):
    """Malformed graph input."""


class PartitionError(ValueError):
    """Blocks do not form a partition of the vertex set."""


class Observability(str, Enum):
    NON_OBSERVABLE = "non_observable"
    WEAKLY_OBSERVABLE = "weakly_observable"
    STRONGLY_OBSERVABLE = "strongly_observable"


@dataclass(frozen=True)
class ObservabilityClass:
    vertices: tuple[Observability, ...]
    graph: Observability

    def count(self, label: Observability) -> int:
        return sum(1 for v in self.vertices if v is label)


@dataclass(frozen=True, eq=False)
class FeedbackGraph:
    """Immutable directed graph; build with :meth:`from_edges`."""

    num_vertices: int
    edges: frozenset[tuple[int, int]]
    out_adj: tuple[tuple[int, ...], ...]
    in_adj: tuple[tuple[int, ...], ...]
    duplicate_edges: int = field(default=0, compare=False)

    @classmethod
    def from_edges(cls, num_vertices: int, edges: Iterable[Sequence[int]]) -> "FeedbackGraph":
        if num_vertices < 1:
            raise GraphError("num_vertices must be >= 1")
        seen: set[tuple[int, int]] = set()
        dupes = 0
        for e in edges:
            if len(e) != 2:
                raise GraphError(f"edge {e!r} is not a pair")
            u, v = int(e[0]), int(e[1])
            if not (0 <= u < num_vertices and 0 <= v < num_vertices):
                raise GraphError(f"edge ({u}, {v}) out of range for N={num_vertices}")
            if (u, v) in seen:
                dupes += 1
                continue
            seen.add((u, v))
        out_adj: list[list[int]] = [[] for _ in range(num_vertices)]
        in_adj: list[list[int]] = [[] for _ in range(num_vertices)]
        for u, v in sorted(seen):
            out_adj[u].append(v)
            in_adj[v].append(u)
        for lst in in_adj:
            lst.sort()
        return cls(
            num_vertices,
            frozenset(seen),
            tuple(tuple(a) for a in out_adj),
            tuple(tuple(a) for a in in_adj),
            dupes,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeedbackGraph):
            return NotImplemented
        return self.num_vertices == other.num_vertices and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.num_vertices, self.edges))

    def __repr__(self) -> str:
        return f"FeedbackGraph(N={self.num_vertices}, |E|={len(self.edges)})"

    @property
    def vertices(self) -> range:
        return range(self.num_vertices)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edges

    def has_self_loop(self, v: int) -> bool:
        return (v, v) in self.edges

    def induced(self, vertices: Iterable[int]) -> tuple["FeedbackGraph", list[int]]:
        """Subgraph induced by ``vertices``, relabelled 0..k-1 in ascending order.

        Returns the subgraph and the list mapping local ids back to global ids.
        """
        members = sorted(set(vertices))
        local = {v: i for i, v in enumerate(members)}
        sub_edges = [
            (local[u], local[v])
            for u in members
            for v in self.out_adj[u]
            if v in local
        ]
        return FeedbackGraph.from_edges(len(members), sub_edges), members

    # -- file I/O ---------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "num_vertices": self.num_vertices,
            "edges": [list(e) for e in sorted(self.edges)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "FeedbackGraph":
        try:
            n = int(data["num_vertices"])
            edges = data["edges"]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"graph JSON needs 'num_vertices' and 'edges': {exc}") from None
        return cls.from_edges(n, edges)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def load_graph(path: str | Path) -> FeedbackGraph:
    return FeedbackGraph.from_json(json.loads(Path(path).read_text()))


def vertex_observability(graph: FeedbackGraph, v: int) -> Observability:
    ins = graph.in_adj[v]
    if not ins:
        return Observability.NON_OBSERVABLE
    if graph.has_self_loop(v):
        return Observability.STRONGLY_OBSERVABLE
    # without a self-loop, N_in(v) = V \ {v} is the same as |N_in(v)| = N - 1
    if len(ins) == graph.num_vertices - 1:
        return Observability.STRONGLY_OBSERVABLE
    return Observability.WEAKLY_OBSERVABLE


def classify(graph: FeedbackGraph) -> ObservabilityClass:
    labels = tuple(vertex_observability(graph, v) for v in graph.vertices)
    if any(lab is Observability.NON_OBSERVABLE for lab in labels):
        overall = Observability.NON_OBSERVABLE
    elif all(lab is Observability.STRONGLY_OBSERVABLE for lab in labels):
        overall = Observability.STRONGLY_OBSERVABLE
    else:
        overall = Observability.WEAKLY_OBSERVABLE
    return ObservabilityClass(labels, overall)


def is_observable(graph: FeedbackGraph) -> bool:
    return all(graph.in_adj[v] for v in graph.vertices)


def greedy_packing_independent_set(graph: FeedbackGraph, t: int) -> list[int]:
    """Greedy ``t``-packing independent set, scanning vertices in ascending id.

    A vertex is added when the set stays independent (no self-loops, no edge
    in either direction between members) and every vertex keeps at most ``t``
    out-neighbours inside the set.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    chosen: list[int] = []
    in_set = [False] * graph.num_vertices
    hits = [0] * graph.num_vertices  # |N_out(u) ∩ S| for every u
    for v in graph.vertices:
        if graph.has_self_loop(v):
            continue
        if any(in_set[w] for w in graph.out_adj[v]) or any(in_set[w] for w in graph.in_adj[v]):
            continue
        if any(hits[u] + 1 > t for u in graph.in_adj[v]):
            continue
        chosen.append(v)
        in_set[v] = True
        for u in graph.in_adj[v]:
            hits[u] += 1
    return chosen


def check_blocks(num_vertices: int, blocks: Sequence[Iterable[int]]) -> list[list[int]]:
    """Normalise blocks to sorted lists and check they partition ``range(num_vertices)``."""
    out: list[list[int]] = []
    owner = [-1] * num_vertices
    for i, block in enumerate(blocks):
        members = sorted(int(v) for v in block)
        if not members:
            raise PartitionError(f"block {i} is empty")
        for v in members:
            if not 0 <= v < num_vertices:
                raise PartitionError(f"block {i} contains out-of-range vertex {v}")
            if owner[v] != -1:
                raise PartitionError(f"vertex {v} appears in blocks {owner[v]} and {i}")
            owner[v] = i
        out.append(members)
    missing = [v for v in range(num_vertices) if owner[v] == -1]
    if missing:
        raise PartitionError(f"vertices {missing[:10]} are not covered by any block")
    return out


def incidence_graph(graph: FeedbackGraph, blocks: Sequence[Iterable[int]]) -> FeedbackGraph:
    """Block-level graph: ``i -> j`` iff ``i != j`` and some edge leaves block i into block j."""
    norm = check_blocks(graph.num_vertices, blocks)
    owner = [0] * graph.num_vertices
    for i, block in enumerate(norm):
        for v in block:
            owner[v] = i
    edges = {(owner[u], owner[v]) for u, v in graph.edges if owner[u] != owner[v]}
    return FeedbackGraph.from_edges(len(norm), edges)
