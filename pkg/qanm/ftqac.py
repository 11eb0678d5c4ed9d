"""
Finite-time quantized average consensus over a strongly connected digraph.

Every node holds an integer mass vector ``y`` and an integer weight ``z``. In
each round a node keeps one unit of weight and splits the rest of its mass
into tokens of weight one that random-walk to itself or an out-neighbor. Every
``D`` rounds the nodes run a max/min exchange of ``⌈y/z⌉`` and ``⌊y/z⌋``; once
the network-wide spread is at most one, every node outputs ``m·Δ`` and halts.

Rounds are synchronous: stopping-variable exchange, then the send phase, then
delivery of every token at the end of the round. The round is vectorized
across nodes; it is equivalent to running the per-node splitting loop with
one uniform draw per token in (source, emission order) order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Union

import numpy as np

from qanm.base import SimComponent
from qanm.digraph import Digraph
from qanm.errors import (
    DimensionMismatchError,
    InvalidSizeError,
    LatticeOverflowError,
    ProtocolInvariantError,
    ProtocolViolationError,
    RoundBudgetExceededError,
)
from qanm.quantize import QuantizationLevel
from utils.helpers import FileHelper

TraceHook = Callable[[Dict], None]

_INT_MIN = np.iinfo(np.int64).min
_INT_MAX = np.iinfo(np.int64).max
_MASS_LIMIT = 2 ** 62


def _ceil_div(y: np.ndarray, z: np.ndarray) -> np.ndarray:
    return -np.floor_divide(-y, z)


@dataclass
class FtqacNodeState:
    """Snapshot of one node's protocol variables"""

    node: int
    y: np.ndarray
    z: int
    M: Optional[np.ndarray] = None
    m: Optional[np.ndarray] = None
    halted: bool = False
    output: Optional[np.ndarray] = None

    def to_record(self, lam: int) -> Dict:
        return {
            'lambda': lam,
            'node': self.node,
            'y': [int(v) for v in self.y],
            'z': int(self.z),
            'M': None if self.M is None else [int(v) for v in self.M],
            'm': None if self.m is None else [int(v) for v in self.m],
        }


@dataclass(frozen=True)
class Token:
    """One unit of weight carrying its share of mass"""

    payload: np.ndarray
    destination: int
    source: int
    weight: int = 1


@dataclass
class Mailbox:
    """Tokens in flight during one round"""

    payloads: np.ndarray
    sources: np.ndarray
    destinations: np.ndarray

    def __len__(self) -> int:
        return int(self.sources.size)

    def tokens(self) -> List[Token]:
        return [
            Token(payload=self.payloads[t].copy(), destination=int(self.destinations[t]), source=int(self.sources[t]))
            for t in range(len(self))
        ]

    def bits_estimate(self) -> int:
        """Σ ⌈log2(1 + |c|)⌉ over payload components, plus one weight bit per token"""
        if not len(self):
            return 0
        magnitude_bits = np.ceil(np.log2(1.0 + np.abs(self.payloads.astype(float))))
        return int(magnitude_bits.sum()) + len(self)


@dataclass
class FtqacNetworkState:
    """Protocol variables of all nodes, one row per node"""

    y: np.ndarray
    z: np.ndarray
    diameter: int
    M: Optional[np.ndarray] = None
    m: Optional[np.ndarray] = None
    halted: np.ndarray = None
    outputs: Optional[np.ndarray] = None
    total_mass: np.ndarray = field(default=None)
    total_weight: int = 0

    def __post_init__(self):
        if self.halted is None:
            self.halted = np.zeros(self.n, dtype=bool)
        if self.total_mass is None:
            self.total_mass = self.y.sum(axis=0)
            self.total_weight = int(self.z.sum())

    @property
    def n(self) -> int:
        return int(self.z.size)

    @property
    def dim(self) -> int:
        return int(self.y.shape[1])

    def node(self, i: int) -> FtqacNodeState:
        return FtqacNodeState(
            node=i,
            y=self.y[i].copy(),
            z=int(self.z[i]),
            M=None if self.M is None else self.M[i].copy(),
            m=None if self.m is None else self.m[i].copy(),
            halted=bool(self.halted[i]),
            output=None if self.outputs is None else self.outputs[i].copy(),
        )

    @property
    def nodes(self) -> List[FtqacNodeState]:
        return [self.node(i) for i in range(self.n)]

    def is_conserved(self) -> bool:
        return bool(np.array_equal(self.y.sum(axis=0), self.total_mass)) and int(self.z.sum()) == self.total_weight

    def dump(self, lam: int) -> str:
        return "\n".join(json.dumps(node.to_record(lam)) for node in self.nodes)


@dataclass
class ConsensusResult:
    """Outcome of one consensus instance with its communication counts"""

    outputs: List[np.ndarray]
    lattice_output: np.ndarray
    rounds: int
    tokens_sent: int
    broadcasts: int
    bits_estimate: int


class JsonLinesTrace:
    """Trace hook writing one JSON object per line"""

    def __init__(self, target: Union[str, Path, TextIO]):
        if isinstance(target, (str, Path)):
            self._handle = open(FileHelper.ensure_parent(target), 'w', encoding='utf-8')
            self._owned = True
        else:
            self._handle = target
            self._owned = False

    def __call__(self, record: Dict) -> None:
        self._handle.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self) -> None:
        if self._owned:
            self._handle.close()

    def __enter__(self) -> "JsonLinesTrace":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def initialize(rho: Sequence[Sequence[int]], graph: Digraph) -> FtqacNetworkState:
    """y_i = 2ρ_i and z_i = 2 at every node"""
    if len(rho) == 0:
        raise InvalidSizeError("consensus needs at least one node")
    if len(rho) != graph.n:
        raise DimensionMismatchError(f"{len(rho)} input vectors for a graph of {graph.n} nodes")
    dims = {len(np.atleast_1d(r)) for r in rho}
    if len(dims) != 1:
        raise DimensionMismatchError(f"input vectors disagree on dimension: {sorted(dims)}")

    bound = max(abs(int(v)) for r in rho for v in np.atleast_1d(r))
    if 2 * bound * graph.n > _MASS_LIMIT:
        raise LatticeOverflowError(f"total mass bound 2·{bound}·{graph.n} exceeds {_MASS_LIMIT}")

    y = 2 * np.array([np.atleast_1d(r) for r in rho], dtype=np.int64)
    z = np.full(graph.n, 2, dtype=np.int64)
    return FtqacNetworkState(y=y, z=z, diameter=graph.diameter)


def split_tokens(y: np.ndarray, z: np.ndarray):
    """Run every node's splitting loop at once.

    A node with weight z emits z - 1 tokens ``⌊y/z⌋`` of its shrinking mass and
    keeps the last share. Per component the emitted shares are the z - 1
    smallest of z near-equal parts (q repeated, then q + 1), so token t of a
    node carries ``q + [t >= z - r]`` with ``q = ⌊y/z⌋`` and ``r = y - q·z``.

    Returns (payloads, sources, kept_y, kept_z).
    """
    if np.any(z < 1):
        raise ProtocolInvariantError(f"node weights must stay >= 1, got {z.tolist()}")
    n = z.size
    counts = z - 1
    q = np.floor_divide(y, z[:, None])
    r = y - q * z[:, None]

    sources = np.repeat(np.arange(n), counts)
    starts = np.cumsum(counts) - counts
    emission = np.arange(sources.size) - np.repeat(starts, counts)
    thresholds = (z[:, None] - r)[sources]
    payloads = q[sources] + (emission[:, None] >= thresholds)

    kept_y = q + (r > 0)
    kept_z = np.ones_like(z)
    return payloads.astype(np.int64), sources, kept_y.astype(np.int64), kept_z


class RoundScheduler(SimComponent):
    """Synchronous round driver for one consensus instance"""

    def __init__(self, graph: Digraph, seed: int, round_budget: int = None, trace: Optional[TraceHook] = None):
        super().__init__()
        self.graph = graph
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.round_budget = round_budget or self.config.ROUND_BUDGET
        self.trace = trace
        self.reset()

        # uniform sampling over {self} ∪ out-neighbors
        self._adjacency = graph.in_adjacency()
        targets = [graph.transmission_targets(i) for i in range(graph.n)]
        self._target_counts = np.array([len(t) for t in targets], dtype=np.int64)
        self._targets = np.zeros((graph.n, int(self._target_counts.max())), dtype=np.int64)
        for i, t in enumerate(targets):
            self._targets[i, :len(t)] = t

    def reset(self) -> None:
        """Start a new instance at round 1 with empty counters; the random stream continues"""
        self.lam = 1
        self.mailbox: Optional[Mailbox] = None
        self.tokens_sent = 0
        self.broadcasts = 0
        self.bits_estimate = 0

    def exchange_stopping(self, M: np.ndarray, m: np.ndarray):
        """Fold own and in-neighbor stopping variables with max/min"""
        mask = self._adjacency[:, :, None]
        folded_M = np.where(mask, M[None, :, :], _INT_MIN).max(axis=1)
        folded_m = np.where(mask, m[None, :, :], _INT_MAX).min(axis=1)
        self.broadcasts += len(self.graph.edges)
        return folded_M, folded_m

    def route(self, sources: np.ndarray) -> np.ndarray:
        """Destination of each token drawn uniformly from its source's targets"""
        draws = self.rng.random(sources.size)
        picks = np.floor(draws * self._target_counts[sources]).astype(np.int64)
        return self._targets[sources, picks]

    def post(self, payloads: np.ndarray, sources: np.ndarray) -> Mailbox:
        self.mailbox = Mailbox(payloads, sources, self.route(sources))
        self.tokens_sent += len(self.mailbox)
        self.bits_estimate += self.mailbox.bits_estimate()
        return self.mailbox

    def deliver(self, state: FtqacNetworkState) -> None:
        mailbox = self.mailbox
        if mailbox is None or not len(mailbox):
            return
        if state.halted[mailbox.destinations].any():
            stuck = sorted(set(mailbox.destinations[state.halted[mailbox.destinations]].tolist()))
            raise ProtocolViolationError(f"round {self.lam}: tokens addressed to halted nodes {stuck}")
        np.add.at(state.y, mailbox.destinations, mailbox.payloads)
        state.z += np.bincount(mailbox.destinations, minlength=state.n).astype(np.int64)
        self.mailbox = None

    def emit_trace(self, state: FtqacNetworkState) -> None:
        if self.trace is None:
            return
        for node in state.nodes:
            self.trace(node.to_record(self.lam))

    def run(self, rho: Sequence[Sequence[int]], delta: QuantizationLevel) -> ConsensusResult:
        delta = QuantizationLevel.parse(delta)
        self.reset()
        state = initialize(rho, self.graph)
        D = state.diameter

        while True:
            if self.lam > self.round_budget:
                error = RoundBudgetExceededError(
                    f"consensus did not halt within {self.round_budget} rounds", state_dump=state.dump(self.lam)
                )
                self.fail(f"round budget exhausted (n={state.n}, D={D})", error)
            step_round(state, self)
            if self.lam % D == 0 and check_stop(state, self.lam, delta):
                break
            self.lam += 1

        self.logger.debug(
            f"consensus halted at round {self.lam}: tokens={self.tokens_sent} broadcasts={self.broadcasts}"
        )
        return ConsensusResult(
            outputs=[row.copy() for row in state.outputs],
            lattice_output=state.m[0].copy(),
            rounds=self.lam,
            tokens_sent=self.tokens_sent,
            broadcasts=self.broadcasts,
            bits_estimate=self.bits_estimate,
        )


def step_round(state: FtqacNetworkState, scheduler: RoundScheduler) -> FtqacNetworkState:
    """One synchronous round: stopping exchange, send phase, receive phase"""
    if state.halted.all():
        raise ProtocolViolationError(f"round {scheduler.lam} requested after every node halted")

    if (scheduler.lam - 1) % state.diameter == 0:
        zz = state.z[:, None]
        state.M = _ceil_div(state.y, zz)
        state.m = np.floor_divide(state.y, zz)
    state.M, state.m = scheduler.exchange_stopping(state.M, state.m)

    payloads, sources, state.y, state.z = split_tokens(state.y, state.z)
    scheduler.post(payloads, sources)
    scheduler.deliver(state)

    if not state.is_conserved():
        raise ProtocolInvariantError(
            f"round {scheduler.lam}: mass/weight not conserved "
            f"(Σy={state.y.sum(axis=0).tolist()} vs {state.total_mass.tolist()}, "
            f"Σz={int(state.z.sum())} vs {state.total_weight})"
        )
    scheduler.emit_trace(state)
    return state


def check_stop(state: FtqacNetworkState, lam: int, delta: QuantizationLevel) -> bool:
    """Halt every node once ‖M - m‖∞ <= 1, with output m·Δ"""
    if lam % state.diameter != 0:
        raise ProtocolViolationError(f"stop check at round {lam} is not a multiple of D={state.diameter}")
    delta = QuantizationLevel.parse(delta)

    done = np.max(state.M - state.m, axis=1) <= 1
    if not done.any():
        return False
    if not done.all():
        raise ProtocolInvariantError(
            f"round {lam}: nodes {np.flatnonzero(done).tolist()} would halt while "
            f"{np.flatnonzero(~done).tolist()} continue\n{state.dump(lam)}"
        )
    if not (state.m == state.m[0]).all():
        raise ProtocolInvariantError(f"round {lam}: halting nodes disagree on m\n{state.dump(lam)}")

    state.outputs = np.array([delta.scale(row) for row in state.m])
    state.halted[:] = True
    return True


def run_to_completion(
    rho: Sequence[Sequence[int]],
    graph: Digraph,
    delta: QuantizationLevel,
    seed: int,
    round_budget: int = None,
    trace: Optional[TraceHook] = None,
) -> ConsensusResult:
    return RoundScheduler(graph, seed, round_budget=round_budget, trace=trace).run(rho, delta)
