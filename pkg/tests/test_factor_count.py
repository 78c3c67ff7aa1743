import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from starfactor.errors import SizeExplosionError
from starfactor.factor_count import count_3star_factors, has_3star_factor, oracle_count, star_realizations
from starfactor.pairing import MultiGraph, PairingSpace, enumerate_all, project, projection_census, sample_uniform


def test_fixed_counts(k4, claw, cube, c8):
    assert count_3star_factors(claw) == 1
    assert count_3star_factors(k4) == 4
    assert count_3star_factors(cube) == 4
    assert count_3star_factors(c8) == 0


def test_doubled_claw_edge():
    graph = MultiGraph.from_edge_list(4, [(0, 1), (0, 1), (0, 2), (0, 3)])
    assert count_3star_factors(graph) == 2
    assert oracle_count(graph) == 2


def test_oracle_fixed_cases(k4):
    assert oracle_count(k4) == 4
    assert oracle_count(MultiGraph(4)) == 0
    two_claws = MultiGraph.from_edge_list(8, [(0, 1), (0, 2), (0, 3), (4, 5), (4, 6), (4, 7)])
    assert oracle_count(two_claws) == 1
    assert count_3star_factors(two_claws) == 1


def test_oracle_refuses_large_graphs(make_cycle):
    with pytest.raises(SizeExplosionError):
        oracle_count(make_cycle(16))


def test_loops_are_never_star_edges():
    graph = MultiGraph.from_edge_list(4, [(0, 1), (0, 2), (0, 3), (1, 1), (2, 2), (3, 3)])
    assert count_3star_factors(graph) == 1
    assert star_realizations(graph, (0, 1, 2, 3)) == 1


def test_vertex_count_not_divisible_by_four():
    graph = MultiGraph.from_edge_list(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
    assert count_3star_factors(graph) == 0
    assert not has_3star_factor(graph)


def test_existence(k4, c8):
    assert has_3star_factor(k4)
    assert not has_3star_factor(c8)


shapes = st.sampled_from([(4, 3), (8, 3), (12, 3), (4, 4), (8, 4), (12, 4), (4, 5), (8, 5), (12, 5)])
seeds = st.integers(min_value=0, max_value=2 ** 63)


def assert_matches_oracle(shape, seed):
    n, d = shape
    space = PairingSpace(n, d)
    graph = project(space, sample_uniform(space, seed))
    count = count_3star_factors(graph)
    assert count == oracle_count(graph)
    assert has_3star_factor(graph) == (count > 0)


@given(shapes, seeds)
def test_backtracking_matches_oracle(shape, seed):
    assert_matches_oracle(shape, seed)


@pytest.mark.slow
@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(shapes, seeds)
def test_backtracking_matches_oracle_on_a_thousand_graphs(shape, seed):
    assert_matches_oracle(shape, seed)


@given(st.integers(min_value=0, max_value=2 ** 63), st.permutations(range(8)))
def test_count_invariant_under_relabeling(seed, permutation):
    space = PairingSpace(8, 4)
    graph = project(space, sample_uniform(space, seed))
    assert count_3star_factors(graph.relabel(permutation)) == count_3star_factors(graph)


def test_scaling_multiplicities(cube, k4):
    # every factor has 3n/4 star edges, each now carrying multiplicity 2
    assert count_3star_factors(cube.scaled(2)) == 2 ** 6 * count_3star_factors(cube)
    assert oracle_count(k4.scaled(3)) == 3 ** 3 * 4


def test_incidences_over_small_space():
    space = PairingSpace(4, 3)
    total = sum(count_3star_factors(project(space, pairing)) for pairing in enumerate_all(space))
    assert total == 9720


@pytest.mark.slow
def test_incidences_over_all_pairings_n4_d4():
    graphs = projection_census(PairingSpace(4, 4))
    total = sum(count * count_3star_factors(graph) for graph, count in graphs.items())
    assert total == 6144 * 945 == 5806080
