"""
Directed communication graphs.

Edges are stored as ordered ``(receiver, sender)`` pairs over dense node ids
``0..n-1``: the pair ``(i, j)`` means node ``i`` can receive from node ``j``.
Every node carries an implicit self-loop, which never counts toward path
lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import FrozenSet, Iterable, Optional, Tuple, Union

import networkx as nx
import numpy as np

from qanm.errors import ConnectivityError, InvalidSizeError
from utils.helpers import FileHelper

Edge = Tuple[int, int]


@dataclass(frozen=True)
class ConnectivityReport:
    """Outcome of a strong-connectivity check"""

    strongly_connected: bool
    # (source, target) with target unreachable from source
    witness: Optional[Edge] = None

    def __bool__(self) -> bool:
        return self.strongly_connected


@dataclass(frozen=True)
class Digraph:
    """Immutable directed graph with implicit self-loops"""

    n: int
    edges: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSizeError(f"a digraph needs at least one node, got n={self.n}")
        cleaned = set()
        for receiver, sender in self.edges:
            receiver, sender = int(receiver), int(sender)
            if not (0 <= receiver < self.n and 0 <= sender < self.n):
                raise InvalidSizeError(f"edge ({receiver}, {sender}) outside nodes 0..{self.n - 1}")
            if receiver != sender:
                cleaned.add((receiver, sender))
        object.__setattr__(self, 'edges', frozenset(cleaned))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge]) -> "Digraph":
        return cls(n, frozenset(edges))

    @cached_property
    def graph(self) -> nx.DiGraph:
        """networkx view with arcs pointing sender -> receiver"""
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from((sender, receiver) for receiver, sender in self.edges)
        return g

    @cached_property
    def in_neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(sorted(self.graph.predecessors(i))) for i in range(self.n))

    @cached_property
    def out_neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(sorted(self.graph.successors(i))) for i in range(self.n))

    @cached_property
    def diameter(self) -> int:
        return compute_diameter(self)

    def out_degree(self, node: int) -> int:
        return len(self.out_neighbors[node])

    def transmission_targets(self, node: int) -> Tuple[int, ...]:
        """Targets a node samples from uniformly: itself first, then its out-neighbors"""
        return (node,) + self.out_neighbors[node]

    def in_adjacency(self) -> np.ndarray:
        """Boolean matrix A with A[i, j] true when i hears j or i == j"""
        adjacency = np.eye(self.n, dtype=bool)
        for receiver, sender in self.edges:
            adjacency[receiver, sender] = True
        return adjacency


def ring(n: int) -> Digraph:
    """Directed ring 0 -> 1 -> ... -> n-1 -> 0"""
    return Digraph.from_edges(n, (((i + 1) % n, i) for i in range(n)) if n > 1 else ())


def complete(n: int) -> Digraph:
    return Digraph.from_edges(n, ((i, j) for i in range(n) for j in range(n) if i != j))


def generate_strongly_connected(n: int, extra_edge_probability: float, seed: int) -> Digraph:
    """Hamiltonian cycle over a random node order plus independent extra edges"""
    if n < 2:
        raise InvalidSizeError(f"generated networks need n >= 2, got n={n}")
    if not 0.0 <= extra_edge_probability <= 1.0:
        raise InvalidSizeError(f"extra edge probability must lie in [0, 1], got {extra_edge_probability}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = {(int(order[(i + 1) % n]), int(order[i])) for i in range(n)}

    draws = rng.random((n, n))
    for receiver in range(n):
        for sender in range(n):
            if receiver == sender or (receiver, sender) in edges:
                continue
            if draws[receiver, sender] < extra_edge_probability:
                edges.add((receiver, sender))
    return Digraph.from_edges(n, edges)


def verify_strong_connectivity(g: Digraph) -> ConnectivityReport:
    """True iff every node reaches every other; otherwise an unreachable pair"""
    if g.n == 1 or nx.is_strongly_connected(g.graph):
        return ConnectivityReport(True)
    for source in range(g.n):
        reached = nx.descendants(g.graph, source)
        for target in range(g.n):
            if target != source and target not in reached:
                return ConnectivityReport(False, (source, target))
    return ConnectivityReport(True)  # unreachable for a graph that failed the check


def compute_diameter(g: Digraph) -> int:
    """Longest shortest directed path; 1 for a single node"""
    if g.n == 1:
        return 1
    diameter = 0
    for source, lengths in nx.all_pairs_shortest_path_length(g.graph):
        if len(lengths) < g.n:
            target = min(set(range(g.n)) - set(lengths))
            raise ConnectivityError(
                f"digraph is not strongly connected: node {target} is unreachable from node {source}",
                witness=(source, target),
            )
        diameter = max(diameter, max(lengths.values()))
    return diameter


def read_edge_list(path: Union[str, Path]) -> Digraph:
    """Read the `n D` header followed by one `receiver sender` pair per line"""
    lines = [line.split('#', 1)[0].strip() for line in Path(path).read_text(encoding='utf-8').splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise InvalidSizeError(f"edge list {path} is empty")
    header = lines[0].split()
    n = int(header[0])
    g = Digraph.from_edges(n, (tuple(int(t) for t in line.split()[:2]) for line in lines[1:]))
    if len(header) > 1 and int(header[1]) != g.diameter:
        raise ConnectivityError(f"edge list {path} declares diameter {header[1]} but the edges give {g.diameter}")
    return g


def write_edge_list(g: Digraph, path: Union[str, Path]) -> None:
    target = FileHelper.ensure_parent(path)
    with open(target, 'w', encoding='utf-8') as handle:
        handle.write(f"{g.n} {g.diameter}\n")
        for receiver, sender in sorted(g.edges):
            handle.write(f"{receiver} {sender}\n")
