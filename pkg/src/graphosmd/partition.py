"""Legal partitions, per-block covering LPs and the explicit partition constructions."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graph import (
    FeedbackGraph,
    Observability,
    PartitionError,
    check_blocks,
    classify,
    incidence_graph,
    is_observable,
    vertex_observability,
)
from .lp import LPError, solve_covering_lp

LP_TOL = 1e-9


class NonObservableBlockError(PartitionError):
    """An induced block has a vertex with no in-neighbour inside the block."""


class IllegalPartitionError(PartitionError):
    """A singleton block holds a vertex that is not strongly observable in G."""


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class BlockLP:
    delta_star: float
    weights: np.ndarray  # x*_{k,j}, indexed by position inside the block


@dataclass(frozen=True, eq=False)
class LegalPartition:
    graph: FeedbackGraph
    blocks: tuple[tuple[int, ...], ...]
    u1s: tuple[int, ...]
    u1sbar: tuple[int, ...]
    u2: tuple[int, ...]
    incidence: FeedbackGraph
    lp: dict[int, BlockLP]
    block_of: tuple[int, ...]  # global vertex -> block index
    local_of: tuple[int, ...]  # global vertex -> position inside its block

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def delta_bar(self) -> float:
        """Sum of delta*_k over the multi-vertex blocks."""
        return float(sum(self.lp[k].delta_star for k in self.u2))

    def arm(self, k: int, j: int) -> int:
        return self.blocks[k][j]

    def summary(self) -> dict:
        return {
            "m": self.m,
            "block_sizes": list(self.block_sizes),
            "u1s": list(self.u1s),
            "u1sbar": list(self.u1sbar),
            "u2": list(self.u2),
            "delta_star": {str(k): self.lp[k].delta_star for k in self.u2},
            "delta_bar": self.delta_bar,
            "incidence_edges": [list(e) for e in sorted(self.incidence.edges)],
        }

    def to_json(self) -> dict:
        return {"blocks": [list(b) for b in self.blocks]}


def _block_constraints(graph: FeedbackGraph, block: Sequence[int]) -> np.ndarray:
    pos = {v: i for i, v in enumerate(block)}
    a = np.zeros((len(block), len(block)))
    for i, u in enumerate(block):
        for v in graph.in_adj[u]:
            j = pos.get(v)
            if j is not None:
                a[i, j] = 1.0
    return a


def solve_block_lp(graph: FeedbackGraph, block: Iterable[int]) -> BlockLP:
    """Fractional weak domination number of ``G[block]`` with its optimal weights.

    Weights are reported in ascending vertex-id order of ``block``.
    """
    members = sorted(block)
    if len(members) < 2:
        raise ValueError("the covering LP is defined for blocks of size >= 2")
    a = _block_constraints(graph, members)
    empty = [members[i] for i in np.nonzero(a.sum(axis=1) == 0)[0]]
    if empty:
        raise NonObservableBlockError(
            f"vertices {empty} have no in-neighbour inside the block"
        )
    try:
        sol = solve_covering_lp(a)
    except LPError as exc:  # pragma: no cover - the checks above make this unreachable
        raise NonObservableBlockError(str(exc)) from exc
    weights = np.minimum(sol.x, 1.0)
    return BlockLP(delta_star=float(weights.sum()), weights=weights)


def validate(graph: FeedbackGraph, blocks: Sequence[Iterable[int]]) -> LegalPartition:
    """Check legality of ``blocks`` and build the fully populated partition.

    Singletons are sorted into U1^S (self-loop) or U1^Sbar (observed by every
    other vertex); every multi-vertex block goes to U2 and must induce an
    observable subgraph.
    """
    norm = check_blocks(graph.num_vertices, blocks)
    u1s: list[int] = []
    u1sbar: list[int] = []
    u2: list[int] = []
    lp: dict[int, BlockLP] = {}
    for k, block in enumerate(norm):
        if len(block) == 1:
            v = block[0]
            if vertex_observability(graph, v) is not Observability.STRONGLY_OBSERVABLE:
                raise IllegalPartitionError(
                    f"singleton block {k} holds vertex {v}, which is not strongly observable"
                )
            (u1s if graph.has_self_loop(v) else u1sbar).append(k)
        else:
            lp[k] = solve_block_lp(graph, block)
            u2.append(k)
    block_of = [0] * graph.num_vertices
    local_of = [0] * graph.num_vertices
    for k, block in enumerate(norm):
        for j, v in enumerate(block):
            block_of[v] = k
            local_of[v] = j
    return LegalPartition(
        graph=graph,
        blocks=tuple(tuple(b) for b in norm),
        u1s=tuple(u1s),
        u1sbar=tuple(u1sbar),
        u2=tuple(u2),
        incidence=incidence_graph(graph, norm),
        lp=lp,
        block_of=tuple(block_of),
        local_of=tuple(local_of),
    )


def load_blocks(path: str | Path) -> list[list[int]]:
    data = json.loads(Path(path).read_text())
    try:
        return [list(map(int, b)) for b in data["blocks"]]
    except (KeyError, TypeError) as exc:
        raise PartitionError(f"partition JSON needs a 'blocks' list: {exc}") from None


# -- constructions -------------------------------------------------------------


def build_singletons(graph: FeedbackGraph) -> LegalPartition:
    return validate(graph, [[v] for v in graph.vertices])


def build_trivial(graph: FeedbackGraph) -> LegalPartition:
    if not is_observable(graph):
        raise NonObservableBlockError("graph is not observable")
    return validate(graph, [list(graph.vertices)])


def weak_components(graph: FeedbackGraph) -> list[list[int]]:
    parent = list(graph.vertices)

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for u, v in graph.edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    comps: dict[int, list[int]] = {}
    for v in graph.vertices:
        comps.setdefault(find(v), []).append(v)
    return sorted(comps.values(), key=lambda c: c[0])


def build_components_partition(graph: FeedbackGraph) -> LegalPartition:
    if not is_observable(graph):
        raise NonObservableBlockError("graph is not observable")
    return validate(graph, weak_components(graph))


def build_c_corrupted(graph: FeedbackGraph) -> LegalPartition:
    """Singletons for strongly observable vertices plus one block U of the rest.

    Vertices of U with no in-neighbour inside U pull in their lowest-id
    strongly observable in-neighbour, so ``|U| <= 2C``.
    """
    labels = classify(graph)
    if labels.graph is Observability.NON_OBSERVABLE:
        raise NonObservableBlockError("graph is not observable")
    corrupted = [v for v in graph.vertices if labels.vertices[v] is not Observability.STRONGLY_OBSERVABLE]
    if not corrupted:
        return build_singletons(graph)
    core = set(corrupted)
    extra: set[int] = set()
    for u in corrupted:
        if any(w in core for w in graph.in_adj[u]):
            continue
        strong = [
            w for w in graph.in_adj[u] if labels.vertices[w] is Observability.STRONGLY_OBSERVABLE
        ]
        if not strong:
            raise ConstructionError(
                f"vertex {u} has no strongly observable in-neighbour and none inside U"
            )
        extra.add(strong[0])
    big = sorted(core | extra)
    rest = [[v] for v in graph.vertices if v not in core and v not in extra]
    if len(big) == 1:
        # a lone vertex cannot form a multi-vertex block; only reachable if U is one strong vertex
        raise ConstructionError("corrupted set collapsed to a single vertex")
    return validate(graph, rest + [big])


# -- hypercube -----------------------------------------------------------------


def hypercube_graph(n: int) -> FeedbackGraph:
    """Q_n with vertex id = integer value of the bit string read left to right."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    size = 1 << n
    edges = [(v, v ^ (1 << b)) for v in range(size) for b in range(n)]
    return FeedbackGraph.from_edges(size, edges)


def _bits_to_int(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | b
    return out


def hamming_code(n: int) -> list[tuple[int, ...]]:
    """Perfect Hamming code of length n = 2^k - 1 (position i has syndrome i)."""
    k = (n + 1).bit_length() - 1
    if (1 << k) - 1 != n:
        raise ValueError(f"{n} is not of the form 2^k - 1")
    words = []
    for value in range(1 << n):
        bits = tuple((value >> (n - 1 - i)) & 1 for i in range(n))
        syndrome = 0
        for i, b in enumerate(bits, start=1):
            if b:
                syndrome ^= i
        if syndrome == 0:
            words.append(bits)
    return words


def _extend(bits: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    # ~1 -> ~01, ~10 ; ~0 -> ~00, ~11
    head = bits[:-1]
    if bits[-1] == 1:
        return head + (0, 1), head + (1, 0)
    return head + (0, 0), head + (1, 1)


def _hamming_distance(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    return sum(x != y for x, y in zip(a, b))


def hypercube_dominating_pairs(n: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Dominating set of Q_n split into adjacent pairs, as bit strings.

    Base dimensions 2^k - 1 use the Hamming code and its translate by e_1;
    other dimensions extend the pairs of the largest base dimension below.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    k = (n + 1).bit_length() - 1
    base = (1 << k) - 1
    e1 = (1,) + (0,) * (base - 1)
    pairs = [
        (c, tuple(x ^ y for x, y in zip(c, e1))) for c in hamming_code(base)
    ]
    for _ in range(base, n):
        grown = []
        for u, v in pairs:
            ua, ub = _extend(u)
            va, vb = _extend(v)
            if _hamming_distance(ua, va) == 1 and _hamming_distance(ub, vb) == 1:
                grown += [(ua, va), (ub, vb)]
            else:
                grown += [(ua, vb), (ub, va)]
        pairs = grown
    return pairs


def build_hypercube_partition(n: int) -> tuple[FeedbackGraph, LegalPartition]:
    graph = hypercube_graph(n)
    pairs = [
        tuple(sorted((_bits_to_int(u), _bits_to_int(v)))) for u, v in hypercube_dominating_pairs(n)
    ]
    pairs.sort()
    block_of: dict[int, int] = {}
    blocks: list[list[int]] = []
    for i, (a, b) in enumerate(pairs):
        blocks.append([a, b])
        block_of[a] = block_of[b] = i
    for v in graph.vertices:
        if v in block_of:
            continue
        anchors = [u for u in graph.out_adj[v] if u in block_of]
        if not anchors:
            raise ConstructionError(f"vertex {v} is not dominated")  # pragma: no cover
        blocks[block_of[min(anchors)]].append(v)
    return graph, validate(graph, blocks)


PARTITION_METHODS = ("singletons", "components", "c-corrupted", "hypercube", "trivial")


def build_partition(graph: FeedbackGraph, method: str) -> LegalPartition:
    if method == "singletons":
        return build_singletons(graph)
    if method == "components":
        return build_components_partition(graph)
    if method == "c-corrupted":
        return build_c_corrupted(graph)
    if method == "trivial":
        return build_trivial(graph)
    if method == "hypercube":
        n = graph.num_vertices.bit_length() - 1
        cube, part = build_hypercube_partition(n)
        if cube != graph:
            raise PartitionError("the hypercube method needs the graph to be Q_n")
        return part
    raise ValueError(f"unknown partition method {method!r}; choose from {PARTITION_METHODS}")
