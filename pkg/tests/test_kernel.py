"""The compiled loop against the reference round functions, round for round."""

import dataclasses

import numpy as np
import pytest

from graphosmd import generators
from graphosmd.env import RunFailure, StochasticGapAdversary, play_game
from graphosmd.graph import FeedbackGraph
from graphosmd.partition import build_partition, validate
from graphosmd.realizations import adaptive_schedule

T = 3000


def _sbar_graph():
    # 0 is seen by all others but has no loop; 1..3 carry loops; 4,5 form a loop-less pair
    edges = [(u, 0) for u in range(1, 6)] + [(v, v) for v in (1, 2, 3)] + [(4, 5), (5, 4), (1, 4)]
    g = FeedbackGraph.from_edges(6, edges)
    return g, validate(g, [[0], [1], [2], [3], [4, 5]])


INSTANCES = {
    "cliques-wc": lambda: (
        generators.loopless_clique_union([3, 4]),
        "components",
        "well_clustered",
    ),
    "cycle-adaptive": lambda: (generators.directed_cycle(6), "trivial", "adaptive"),
    "mab": lambda: (generators.mab(4), "singletons", "well_clustered"),
    "corrupted": lambda: (generators.c_corrupted(5, 2), "c-corrupted", "adaptive"),
    "bipartite-hybrid": lambda: (generators.bipartite_union([[2, 2], [1, 3]]), "components", "hybrid"),
}


@pytest.mark.parametrize("name", sorted(INSTANCES))
def test_engines_agree(name):
    g, method, mode = INSTANCES[name]()
    part = build_partition(g, method)
    choice = {k: ("dense" if i % 2 == 0 else "sparse") for i, k in enumerate(part.u2)} if mode == "hybrid" else None
    recs = [
        play_game(
            g, part, mode, StochasticGapAdversary(g.num_vertices, 0.2, seed=5), T, 5,
            engine=engine, choice=choice, record_arms=True,
        )
        for engine in ("compiled", "python")
    ]
    a, b = recs
    np.testing.assert_array_equal(a.arms, b.arms)
    np.testing.assert_allclose(a.final_y, b.final_y, atol=1e-10)
    np.testing.assert_allclose(a.final_x, b.final_x, atol=1e-10)
    np.testing.assert_allclose(a.regret, b.regret, atol=1e-9)
    np.testing.assert_allclose(a.expected_regret, b.expected_regret, atol=1e-8)
    for key in ("guard_violations", "w_bound_violations", "gamma_over_half"):
        assert a.diagnostics[key] == b.diagnostics[key]


def test_engines_agree_with_sbar_shift():
    g, part = _sbar_graph()
    recs = [
        play_game(g, part, "well_clustered", StochasticGapAdversary(6, 0.2, seed=1), T, 1, engine=e, record_arms=True)
        for e in ("compiled", "python")
    ]
    np.testing.assert_array_equal(recs[0].arms, recs[1].arms)
    np.testing.assert_allclose(recs[0].final_y, recs[1].final_y, atol=1e-10)


def test_guard_counted_not_fatal():
    # a short horizon makes the step sizes large, so the guard trips
    g = generators.loopless_clique_union([2, 2])
    part = build_partition(g, "components")
    recs = [
        play_game(g, part, "well_clustered", StochasticGapAdversary(4, 0.2, seed=0), 20, 0, engine=e)
        for e in ("compiled", "python")
    ]
    assert recs[0].diagnostics["guard_violations"] == recs[1].diagnostics["guard_violations"]
    assert len(recs[0].regret) == len(recs[0].checkpoints)


def test_exploration_above_one_fails_with_partial_record():
    g = generators.directed_cycle(10)
    part = build_partition(g, "trivial")
    cfg = adaptive_schedule(part, 2000)
    # inflate the adaptive part only; the static checks still pass
    cfg = dataclasses.replace(cfg, adaptive_coef=cfg.adaptive_coef * 1000)
    for engine in ("compiled", "python"):
        with pytest.raises(RunFailure) as info:
            play_game(g, part, cfg, StochasticGapAdversary(10, 0.2, seed=0), 2000, 0, engine=engine)
        assert info.value.record.failed_at == 1
        assert len(info.value.record.regret) == 0
