import numpy as np
import pytest

from graphosmd import generators
from graphosmd.graph import FeedbackGraph, Observability, PartitionError, classify
from graphosmd.partition import (
    ConstructionError,
    IllegalPartitionError,
    NonObservableBlockError,
    build_c_corrupted,
    build_hypercube_partition,
    build_partition,
    hamming_code,
    hypercube_dominating_pairs,
    load_blocks,
    validate,
)

from oracles import covering_lp_value, dominates


def _bits(v, n):
    return tuple((v >> (n - 1 - i)) & 1 for i in range(n))


def test_mab_all_singletons():
    part = build_partition(generators.mab(6), "singletons")
    assert part.u1s == tuple(range(6))
    assert not part.u1sbar and not part.u2


def test_cliques_by_component():
    part = build_partition(generators.loopless_clique_union([3, 4, 2]), "components")
    assert part.u2 == (0, 1, 2)
    assert not part.u1s and not part.u1sbar
    assert part.delta_bar == pytest.approx(3 / 2 + 4 / 3 + 2)


def test_bipartite_by_component():
    part = build_partition(generators.bipartite_union([[2, 2]] * 3), "components")
    assert part.m == 3


def test_connected_graph_is_one_block():
    part = build_partition(generators.directed_cycle(7), "components")
    assert part.blocks == (tuple(range(7)),)


def test_weak_singleton_is_illegal():
    with pytest.raises(IllegalPartitionError):
        validate(generators.directed_cycle(3), [[0], [1, 2]])


def test_u1sbar_singleton():
    g = generators.complete_loopless(3)
    part = validate(g, [[0], [1], [2]])
    assert part.u1sbar == (0, 1, 2)


def test_non_observable_block():
    g = FeedbackGraph.from_edges(3, [(0, 0), (0, 1), (0, 2)])
    with pytest.raises(NonObservableBlockError):
        validate(g, [[0], [1, 2]])


def test_block_file_round_trip(tmp_path):
    part = build_partition(generators.loopless_clique_union([2, 2]), "components")
    path = tmp_path / "p.json"
    import json

    path.write_text(json.dumps(part.to_json()))
    assert load_blocks(path) == [[0, 1], [2, 3]]
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(PartitionError):
        load_blocks(tmp_path / "bad.json")


def test_unknown_method():
    with pytest.raises(ValueError):
        build_partition(generators.mab(2), "nope")


# -- corrupted -------------------------------------------------------------------


def test_strongly_observable_graph_gives_singletons():
    part = build_c_corrupted(generators.mab(5))
    assert part.m == 5 and not part.u2


def test_extra_pair_forms_one_block():
    g = FeedbackGraph.from_edges(8, [(v, v) for v in range(6)] + [(6, 7), (7, 6)])
    part = build_c_corrupted(g)
    assert part.m == 7
    assert part.blocks[part.u2[0]] == (6, 7)


def test_augmented_by_one_strong_vertex():
    # 6 is seen only by 7; 7 is seen only by clean vertex 2
    g = FeedbackGraph.from_edges(8, [(v, v) for v in range(6)] + [(7, 6), (2, 7), (0, 7)])
    part = build_c_corrupted(g)
    big = part.blocks[part.u2[0]]
    assert big == (0, 6, 7)
    assert len(big) <= 4


def _random_corrupted(rng):
    while True:
        n = int(rng.integers(3, 65))
        c = int(rng.integers(1, min(8, n - 1) + 1))
        bad = set(rng.choice(n, size=c, replace=False).tolist())
        edges = [(v, v) for v in range(n) if v not in bad]
        for v in bad:
            # some in-neighbours, never all of V \ {v}
            k = int(rng.integers(1, max(2, min(4, n - 2) + 1)))
            srcs = rng.choice([u for u in range(n) if u != v], size=min(k, n - 2), replace=False)
            edges += [(int(u), v) for u in srcs]
        for _ in range(int(rng.integers(0, n))):
            edges.append((int(rng.integers(n)), int(rng.integers(n))))
        g = FeedbackGraph.from_edges(n, edges)
        labels = classify(g)
        corrupted = [v for v in range(n) if labels.vertices[v] is not Observability.STRONGLY_OBSERVABLE]
        if labels.graph is Observability.NON_OBSERVABLE or not corrupted:
            continue
        return g, corrupted


def test_random_corrupted_instances():
    rng = np.random.default_rng(7)
    built = 0
    for _ in range(50):
        g, corrupted = _random_corrupted(rng)
        try:
            part = build_c_corrupted(g)
        except ConstructionError:
            continue
        built += 1
        big = part.blocks[part.u2[0]]
        assert len(big) <= 2 * len(corrupted)
        assert set(corrupted) <= set(big)
        validate(g, part.blocks)
    assert built >= 45


# -- hypercube -------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 3, 7])
def test_hamming_code_is_perfect(n):
    code = hamming_code(n)
    k = (n + 1).bit_length() - 1
    assert len(code) == 2 ** (n - k)
    for v in range(2**n):
        bits = _bits(v, n)
        close = [c for c in code if sum(a != b for a, b in zip(bits, c)) <= 1]
        assert len(close) == 1


def test_q1():
    g, part = build_hypercube_partition(1)
    assert part.blocks == ((0, 1),)
    assert part.lp[0].delta_star == pytest.approx(2.0)


def test_q3_pairs():
    pairs = hypercube_dominating_pairs(3)
    members = {v for p in pairs for v in p}
    assert members == {(0, 0, 0), (1, 1, 1), (1, 0, 0), (0, 1, 1)}


@pytest.mark.parametrize("n", range(1, 8))
def test_hypercube_invariants(n):
    g, part = build_hypercube_partition(n)
    pairs = hypercube_dominating_pairs(n)
    d = {v for p in pairs for v in p}
    k = (n + 1).bit_length() - 1
    assert len(d) == 2 ** (n + 1) // 2**k
    assert len(pairs) * 2 == len(d)
    for u, v in pairs:
        assert sum(a != b for a, b in zip(u, v)) == 1
    ids = [int("".join(map(str, b)), 2) for b in d]
    assert dominates(g.num_vertices, g.out_adj, ids)
    assert max(part.block_sizes) <= 2 * n
    assert sorted(v for b in part.blocks for v in b) == list(range(2**n))
    for kk in part.u2:
        assert part.lp[kk].delta_star <= 2 + 1e-9


@pytest.mark.parametrize("n", [2, 3])
def test_hypercube_block_lp_matches_highs(n):
    g, part = build_hypercube_partition(n)
    for kk in part.u2:
        assert part.lp[kk].delta_star == pytest.approx(
            covering_lp_value(g.num_vertices, g.edges, part.blocks[kk]), abs=1e-9
        )


def test_hypercube_method_needs_cube():
    with pytest.raises(PartitionError):
        build_partition(generators.directed_cycle(8), "hypercube")

