import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphosmd import generators
from graphosmd.graph import FeedbackGraph
from graphosmd.lp import LPError, solve_covering_lp
from graphosmd.partition import NonObservableBlockError, solve_block_lp

from oracles import covering_lp_value


@pytest.mark.parametrize("n", range(2, 9))
def test_directed_cycle(n):
    sol = solve_block_lp(generators.directed_cycle(n), range(n))
    assert sol.delta_star == pytest.approx(n, abs=1e-9)
    np.testing.assert_allclose(sol.weights, 1.0, atol=1e-9)


@pytest.mark.parametrize("a,b", [(1, 1), (2, 3), (4, 4), (1, 7)])
def test_complete_bipartite(a, b):
    sol = solve_block_lp(generators.bipartite_union([[a, b]]), range(a + b))
    assert sol.delta_star == pytest.approx(2.0, abs=1e-9)
    assert sol.weights[:a].sum() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("n", range(2, 9))
def test_loopless_clique(n):
    g = generators.complete_loopless(n)
    sol = solve_block_lp(g, range(n))
    assert sol.delta_star == pytest.approx(n / (n - 1), abs=1e-9)
    assert sol.delta_star == pytest.approx(covering_lp_value(n, g.edges, range(n)), abs=1e-9)


def test_unobserved_vertex_raises():
    g = FeedbackGraph.from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(NonObservableBlockError):
        solve_block_lp(g, [0, 1, 2])


def test_raw_solver_infeasible_row():
    with pytest.raises(LPError):
        solve_covering_lp(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_weighted_cost():
    sol = solve_covering_lp(np.array([[1.0, 1.0]]), cost=np.array([3.0, 1.0]))
    assert sol.value == pytest.approx(1.0)
    np.testing.assert_allclose(sol.x, [0.0, 1.0], atol=1e-12)


@st.composite
def observable_blocks(draw):
    n = draw(st.integers(2, 8))
    adj = draw(st.lists(st.lists(st.booleans(), min_size=n, max_size=n), min_size=n, max_size=n))
    edges = [(u, v) for u in range(n) for v in range(n) if adj[u][v]]
    # guarantee every vertex has an in-neighbour
    edges += [((v + 1) % n, v) for v in range(n)]
    return n, edges


@given(observable_blocks())
@settings(max_examples=150, deadline=None)
def test_matches_highs(data):
    n, edges = data
    g = FeedbackGraph.from_edges(n, edges)
    sol = solve_block_lp(g, range(n))
    assert sol.delta_star == pytest.approx(covering_lp_value(n, g.edges, range(n)), abs=1e-7)
    # the weights are feasible
    cover = np.array([sum(sol.weights[u] for u in g.in_adj[v]) for v in range(n)])
    assert cover.min() >= 1 - 1e-9
    assert sol.weights.min() >= -1e-12 and sol.weights.max() <= 1 + 1e-12
