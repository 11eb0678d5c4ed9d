import json
import math

import numpy as np
import pytest

from qanm.digraph import Digraph, complete, generate_strongly_connected, ring
from qanm.errors import (
    DimensionMismatchError,
    LatticeOverflowError,
    ProtocolInvariantError,
    ProtocolViolationError,
    RoundBudgetExceededError,
)
from qanm.ftqac import (
    JsonLinesTrace,
    Mailbox,
    RoundScheduler,
    check_stop,
    initialize,
    run_to_completion,
    split_tokens,
    step_round,
)
from qanm.quantize import QuantizationLevel
from utils.helpers import SeedHelper


def split_one_node(y, z):
    """Per-node splitting loop: emit ⌊y/z⌋ while more than one unit of weight is left"""
    y = np.array(y, dtype=np.int64)
    tokens = []
    while z > 1:
        c = np.floor_divide(y, z)
        tokens.append(c)
        y = y - c
        z -= 1
    return tokens, y


class TestSplitting:

    @pytest.mark.smoke
    def test_even_split(self):
        payloads, sources, kept_y, kept_z = split_tokens(np.array([[9]]), np.array([3]))

        assert payloads.tolist() == [[3], [3]]
        assert sources.tolist() == [0, 0]
        assert kept_y.tolist() == [[3]]
        assert kept_z.tolist() == [1]

    def test_remainder_goes_to_the_last_shares(self):
        payloads, _, kept_y, _ = split_tokens(np.array([[11]]), np.array([4]))

        assert payloads.ravel().tolist() == [2, 3, 3]
        assert kept_y.ravel().tolist() == [3]

    @pytest.mark.regression
    def test_matches_the_per_node_loop(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 7))
            y = rng.integers(-50, 51, size=(n, 3))
            z = rng.integers(1, 7, size=n)
            payloads, sources, kept_y, kept_z = split_tokens(y, z)

            for i in range(n):
                tokens, remainder = split_one_node(y[i], int(z[i]))
                emitted = payloads[sources == i]
                assert len(emitted) == len(tokens)
                for got, expected in zip(emitted, tokens):
                    assert np.array_equal(got, expected)
                assert np.array_equal(kept_y[i], remainder)
            assert np.all(kept_z == 1)
            assert np.array_equal(payloads.sum(axis=0) + kept_y.sum(axis=0), y.sum(axis=0))

    def test_zero_weight_is_rejected(self):
        with pytest.raises(ProtocolInvariantError):
            split_tokens(np.array([[1]]), np.array([0]))


class TestRouting:

    @pytest.mark.smoke
    def test_one_uniform_draw_per_token_in_source_order(self, random_graph):
        scheduler = RoundScheduler(random_graph, seed=42)
        sources = np.array([0, 0, 1, 3, 3, 3, 7])
        destinations = scheduler.route(sources)

        reference = np.random.default_rng(42)
        for source, destination in zip(sources, destinations):
            targets = random_graph.transmission_targets(int(source))
            assert destination == targets[int(math.floor(reference.random() * len(targets)))]

    def test_destinations_are_self_or_out_neighbors(self, ring5):
        scheduler = RoundScheduler(ring5, seed=1)
        sources = np.repeat(np.arange(5), 20)

        for source, destination in zip(sources, scheduler.route(sources)):
            assert destination in ring5.transmission_targets(int(source))

    def test_bits_estimate(self):
        mailbox = Mailbox(np.array([[0], [3], [-4]]), np.array([0, 0, 1]), np.array([1, 1, 0]))

        assert mailbox.bits_estimate() == 0 + 2 + 3 + 3
        assert [t.destination for t in mailbox.tokens()] == [1, 1, 0]


class TestInitialize:

    @pytest.mark.smoke
    def test_doubles_inputs(self, two_cycle):
        state = initialize([[3, -1], [5, 2]], two_cycle)

        assert state.y.tolist() == [[6, -2], [10, 4]]
        assert state.z.tolist() == [2, 2]
        assert state.total_mass.tolist() == [16, 2]
        assert state.total_weight == 4

    def test_count_must_match_graph(self, two_cycle):
        with pytest.raises(DimensionMismatchError):
            initialize([[1]], two_cycle)

    def test_dimensions_must_agree(self, two_cycle):
        with pytest.raises(DimensionMismatchError):
            initialize([[1], [1, 2]], two_cycle)

    def test_mass_overflow_is_rejected(self, two_cycle):
        with pytest.raises(LatticeOverflowError):
            initialize([[2 ** 61], [0]], two_cycle)


class TestConsensus:

    @pytest.mark.smoke
    def test_two_cycle_agrees_on_the_average(self, two_cycle):
        result = run_to_completion([[3], [5]], two_cycle, "1", seed=0)

        assert [x.tolist() for x in result.outputs] == [[4.0], [4.0]]
        assert result.lattice_output.tolist() == [4]

    @pytest.mark.smoke
    def test_single_node_returns_its_input(self):
        result = run_to_completion([[7, -3]], Digraph(1), "1", seed=0)

        assert result.outputs[0].tolist() == [7.0, -3.0]
        assert result.rounds == 1

    def test_outputs_scale_by_delta(self, ring5):
        result = run_to_completion([[10], [20], [30], [40], [50]], ring5, "0.5", seed=3)

        assert all(np.array_equal(x, result.outputs[0]) for x in result.outputs)
        assert abs(result.outputs[0][0] - 0.5 * 30) <= 0.5

    def test_same_seed_same_run(self, random_graph, rng):
        rho = rng.integers(-100, 100, size=(random_graph.n, 2))
        a = run_to_completion(rho, random_graph, "1e-3", seed=9)
        b = run_to_completion(rho, random_graph, "1e-3", seed=9)

        assert a.rounds == b.rounds
        assert a.tokens_sent == b.tokens_sent
        assert np.array_equal(a.lattice_output, b.lattice_output)

    def test_halts_on_a_multiple_of_the_diameter(self, ring5):
        result = run_to_completion([[0], [100], [0], [100], [0]], ring5, "1", seed=4)

        assert result.rounds % ring5.diameter == 0

    @pytest.mark.parametrize("graph", [ring(5), complete(4), ring(2)], ids=["ring5", "complete4", "two-cycle"])
    def test_equal_inputs_halt_at_the_first_stop_check(self, graph):
        result = run_to_completion([[7, -2]] * graph.n, graph, "1", seed=1)

        assert result.rounds == graph.diameter
        assert result.lattice_output.tolist() == [7, -2]

    @pytest.mark.parametrize("seed", range(20))
    def test_three_node_ring_lands_next_to_the_average(self, seed):
        result = run_to_completion([[0], [0], [3]], ring(3), "0.5", seed=seed)

        assert result.lattice_output.tolist() in ([0], [1])
        assert all(np.array_equal(x, result.outputs[0]) for x in result.outputs)
        assert abs(result.outputs[0][0] - 0.5) <= 0.5

    def test_reused_scheduler_starts_each_instance_at_round_one(self, ring5):
        scheduler = RoundScheduler(ring5, seed=3)
        first = scheduler.run([[0], [100], [0], [100], [0]], "1")
        second = scheduler.run([[5], [5], [5], [5], [5]], "1")

        assert first.rounds % ring5.diameter == 0
        assert second.rounds == ring5.diameter
        assert second.tokens_sent == ring5.n * second.rounds
        assert second.lattice_output.tolist() == [5]

    def test_communication_counters(self, two_cycle):
        result = run_to_completion([[3], [5]], two_cycle, "1", seed=0)

        # every node keeps one unit of the 2n units of weight
        assert result.tokens_sent == two_cycle.n * result.rounds
        assert result.broadcasts == len(two_cycle.edges) * result.rounds
        assert result.bits_estimate >= result.tokens_sent

    @pytest.mark.regression
    @pytest.mark.parametrize("seed", range(100))
    def test_random_networks_reach_the_quantized_average(self, seed):
        n = 2 + seed % 19
        p = 1 if seed % 2 else 5
        rng = SeedHelper.rng(seed, 'ftqac-inputs')
        graph = generate_strongly_connected(n, 0.2, SeedHelper.derive_seed(seed, 'graph'))
        rho = rng.integers(-10_000, 10_001, size=(n, p))
        delta = QuantizationLevel.parse("1e-3")

        result = run_to_completion(rho, graph, delta, seed=seed)

        assert all(np.array_equal(x, result.outputs[0]) for x in result.outputs)
        average = rho.sum(axis=0) / n
        assert np.all(np.abs(result.lattice_output - average) <= 1.0)
        assert np.allclose(result.outputs[0], float(delta) * result.lattice_output, rtol=0.0, atol=1e-12)


class TestConservation:

    @pytest.mark.regression
    @pytest.mark.parametrize("seed", range(10))
    def test_mass_and_weight_are_invariant_every_round(self, seed):
        graph = generate_strongly_connected(6, 0.3, seed)
        rho = SeedHelper.rng(seed, 'conservation').integers(-1000, 1000, size=(6, 3))
        records = []

        result = run_to_completion(rho, graph, "1", seed=seed, trace=records.append)

        for lam in range(1, result.rounds + 1):
            round_records = [r for r in records if r['lambda'] == lam]
            assert len(round_records) == graph.n
            assert np.array_equal(np.sum([r['y'] for r in round_records], axis=0), 2 * rho.sum(axis=0))
            assert sum(r['z'] for r in round_records) == 2 * graph.n

    def test_state_stays_conserved_when_stepped(self, ring5):
        state = initialize([[1], [2], [3], [4], [100]], ring5)
        scheduler = RoundScheduler(ring5, seed=5)

        for _ in range(3 * ring5.diameter):
            step_round(state, scheduler)
            assert state.is_conserved()
            scheduler.lam += 1


class TestStopping:

    def test_stop_check_off_the_period_is_rejected(self, ring5):
        state = initialize([[1]] * 5, ring5)

        with pytest.raises(ProtocolViolationError):
            check_stop(state, 3, "1")

    def test_round_after_halt_is_rejected(self, two_cycle):
        state = initialize([[2], [2]], two_cycle)
        scheduler = RoundScheduler(two_cycle, seed=0)
        step_round(state, scheduler)
        assert check_stop(state, 1, "1")

        with pytest.raises(ProtocolViolationError):
            step_round(state, scheduler)

    def test_round_budget_carries_a_state_dump(self, ring5):
        with pytest.raises(RoundBudgetExceededError) as error:
            run_to_completion([[0], [1000], [0], [1000], [0]], ring5, "1", seed=0, round_budget=2)

        lines = error.value.state_dump.splitlines()
        assert len(lines) == ring5.n
        assert json.loads(lines[0])['node'] == 0


class TestTrace:

    def test_json_lines_trace_file(self, two_cycle, results_dir):
        path = results_dir / "trace.jsonl"
        with JsonLinesTrace(path) as trace:
            result = run_to_completion([[3], [5]], two_cycle, "1", seed=0, trace=trace)

        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(records) == result.rounds * two_cycle.n
        assert set(records[0]) == {'lambda', 'node', 'y', 'z', 'M', 'm'}
        assert records[-1]['lambda'] == result.rounds
