import numpy as np
import pytest

from qanm.digraph import (
    Digraph,
    complete,
    compute_diameter,
    generate_strongly_connected,
    read_edge_list,
    ring,
    verify_strong_connectivity,
    write_edge_list,
)
from qanm.errors import ConnectivityError, InvalidSizeError


def floyd_warshall_diameter(g):
    """Diameter from all-pairs distances relaxed through every intermediate node"""
    if g.n == 1:
        return 1
    dist = np.full((g.n, g.n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for receiver, sender in g.edges:
        dist[sender, receiver] = 1.0
    for k in range(g.n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return int(dist.max())


class TestDigraph:

    @pytest.mark.smoke
    def test_edges_are_receiver_sender_pairs(self):
        g = Digraph.from_edges(3, [(1, 0), (2, 1), (0, 2)])

        assert g.in_neighbors[1] == (0,)
        assert g.out_neighbors[0] == (1,)
        assert g.out_degree(2) == 1

    @pytest.mark.smoke
    def test_self_loops_are_implicit(self):
        g = Digraph.from_edges(2, [(0, 0), (0, 1), (1, 0)])

        assert (0, 0) not in g.edges
        assert g.transmission_targets(0) == (0, 1)
        assert np.array_equal(g.in_adjacency(), np.ones((2, 2), dtype=bool))

    @pytest.mark.smoke
    def test_edge_outside_node_range_is_rejected(self):
        with pytest.raises(InvalidSizeError):
            Digraph.from_edges(2, [(0, 2)])

    def test_empty_graph_is_rejected(self):
        with pytest.raises(InvalidSizeError):
            Digraph(0)

    def test_ring_targets_are_self_then_successor(self, ring5):
        assert ring5.transmission_targets(0) == (0, 1)
        assert ring5.transmission_targets(4) == (4, 0)


class TestDiameter:

    @pytest.mark.smoke
    def test_ring_diameter(self, ring5):
        assert compute_diameter(ring5) == 4

    @pytest.mark.smoke
    def test_complete_graph_diameter(self):
        assert compute_diameter(complete(4)) == 1

    def test_two_cycle_diameter(self, two_cycle):
        assert two_cycle.diameter == 1

    def test_single_node_diameter_is_one(self):
        assert compute_diameter(Digraph(1)) == 1

    def test_disconnected_graph_raises_with_witness(self):
        path = Digraph.from_edges(3, [(1, 0), (2, 1)])

        with pytest.raises(ConnectivityError) as error:
            compute_diameter(path)
        assert error.value.witness == (1, 0)

    @pytest.mark.regression
    @pytest.mark.parametrize("seed", range(60))
    def test_matches_floyd_warshall(self, seed):
        n = 1 + seed % 10
        g = generate_strongly_connected(n, (seed % 4) / 4.0, seed) if n > 1 else Digraph(1)

        assert compute_diameter(g) == floyd_warshall_diameter(g)


class TestStrongConnectivity:

    @pytest.mark.smoke
    def test_ring_is_strongly_connected(self, ring5):
        assert verify_strong_connectivity(ring5)

    def test_directed_path_reports_unreachable_pair(self):
        report = verify_strong_connectivity(Digraph.from_edges(3, [(1, 0), (2, 1)]))

        assert not report
        assert report.witness == (1, 0)

    def test_two_disjoint_cycles_report_a_cross_pair(self):
        report = verify_strong_connectivity(Digraph.from_edges(4, [(0, 1), (1, 0), (2, 3), (3, 2)]))

        assert not report
        source, target = report.witness
        assert (source < 2) != (target < 2)

    def test_single_node_is_strongly_connected(self):
        assert verify_strong_connectivity(Digraph(1)).strongly_connected


class TestGenerator:

    @pytest.mark.regression
    @pytest.mark.parametrize("n", range(2, 51))
    def test_generated_graphs_are_strongly_connected(self, n):
        g = generate_strongly_connected(n, 0.1, seed=n)

        assert g.n == n
        assert verify_strong_connectivity(g)
        assert 1 <= g.diameter <= n - 1

    def test_same_seed_same_graph(self):
        assert generate_strongly_connected(12, 0.2, 5) == generate_strongly_connected(12, 0.2, 5)

    def test_zero_probability_gives_a_hamiltonian_cycle(self):
        g = generate_strongly_connected(7, 0.0, 3)

        assert len(g.edges) == 7
        assert g.diameter == 6

    def test_full_probability_gives_the_complete_graph(self):
        g = generate_strongly_connected(6, 1.0, 3)

        assert g == complete(6)

    @pytest.mark.parametrize("n, probability", [(1, 0.1), (5, -0.1), (5, 1.5)])
    def test_invalid_parameters_are_rejected(self, n, probability):
        with pytest.raises(InvalidSizeError):
            generate_strongly_connected(n, probability, 0)


class TestEdgeListFiles:

    @pytest.mark.smoke
    def test_saved_graph_reads_back(self, random_graph, results_dir):
        path = results_dir / "graph.txt"
        write_edge_list(random_graph, path)

        assert read_edge_list(path) == random_graph
        assert path.read_text().splitlines()[0] == f"{random_graph.n} {random_graph.diameter}"

    def test_comments_and_blank_lines_are_ignored(self, tmp_path):
        path = tmp_path / "two.txt"
        path.write_text("# two-cycle\n2 1\n\n0 1\n1 0  # back edge\n")

        assert read_edge_list(path) == Digraph.from_edges(2, [(0, 1), (1, 0)])

    def test_wrong_declared_diameter_is_rejected(self, tmp_path):
        path = tmp_path / "ring.txt"
        path.write_text("3 1\n1 0\n2 1\n0 2\n")

        with pytest.raises(ConnectivityError):
            read_edge_list(path)

    def test_empty_file_is_rejected(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing\n")

        with pytest.raises(InvalidSizeError):
            read_edge_list(path)
