"""
Nesterov-accelerated distributed gradient descent with quantized averaging.

Each outer iteration every node extrapolates ``s = x + β(x - x_prev)``, takes a
local gradient step ``z = s - α∇f(s)``, quantizes ``z`` onto the Δ-lattice and
joins one complete consensus instance whose output becomes the next estimate
at every node.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qanm import analysis
from qanm.analysis import ConvergenceTrace, IterationRecord
from qanm.base import SimComponent
from qanm.digraph import Digraph
from qanm.errors import ConfigurationError, DimensionMismatchError, InvariantViolationError, NumericError
from qanm.ftqac import ConsensusResult, RoundScheduler
from qanm.objective import GlobalConstants, QuadraticObjective, global_optimum
from qanm.quantize import QuantizationLevel, to_lattice_integer
from utils.helpers import SeedHelper
from utils.logger import SimLogger

# slack on the runtime bounds for floating-point evaluation
CHECK_RTOL = 1e-9


@dataclass
class QanmNodeState:
    x: np.ndarray
    x_prev: np.ndarray
    beta: float
    s: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, x0, beta: float) -> "QanmNodeState":
        x0 = np.array(x0, dtype=float).reshape(-1)
        return cls(x=x0, x_prev=x0.copy(), beta=beta)

    @property
    def momentum(self) -> np.ndarray:
        return self.x - self.x_prev


@dataclass
class QanmConfig:
    alpha: float
    delta: QuantizationLevel
    max_outer_iterations: int
    graph: Digraph
    objectives: Sequence[QuadraticObjective]
    initial_states: Sequence[np.ndarray]
    momentum_override: Optional[float] = None
    seed: int = 0
    round_budget: Optional[int] = None
    error_floor: Optional[float] = None
    strict_step_size: bool = False
    method: str = 'qanm'

    def __post_init__(self):
        self.delta = QuantizationLevel.parse(self.delta)
        if not self.alpha > 0:
            raise ConfigurationError(f"step size must be positive, got {self.alpha}")
        if self.max_outer_iterations < 1:
            raise ConfigurationError(f"need at least one outer iteration, got {self.max_outer_iterations}")
        if len(self.objectives) != self.graph.n or len(self.initial_states) != self.graph.n:
            raise DimensionMismatchError(
                f"graph has {self.graph.n} nodes but got {len(self.objectives)} objectives "
                f"and {len(self.initial_states)} initial states"
            )
        dims = {obj.dim for obj in self.objectives} | {np.size(x) for x in self.initial_states}
        if len(dims) != 1:
            raise DimensionMismatchError(f"objectives and initial states disagree on dimension: {sorted(dims)}")
        if self.momentum_override is not None and not 0.0 <= self.momentum_override < 1.0:
            raise ConfigurationError(f"momentum override must lie in [0, 1), got {self.momentum_override}")
        if self.strict_step_size:
            constants = self.constants
            limit = 2.0 / (constants.mu + constants.L)
            if self.alpha > limit:
                raise ConfigurationError(f"step size {self.alpha} exceeds 2/(mu+L) = {limit:.6g}")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def dim(self) -> int:
        return self.objectives[0].dim

    @property
    def betas(self) -> List[float]:
        if self.momentum_override is not None:
            return [float(self.momentum_override)] * self.n
        return [obj.beta for obj in self.objectives]

    @property
    def constants(self) -> GlobalConstants:
        return GlobalConstants.from_objectives(self.objectives, self.betas)

    def consensus_seed(self, k: int) -> int:
        return SeedHelper.derive_seed(self.seed, 'consensus', k)


@dataclass
class IterationStats:
    """What one outer iteration exchanged and how close the consensus landed"""

    s: List[np.ndarray]
    z: List[np.ndarray]
    rho: List[np.ndarray]
    consensus: ConsensusResult
    consensus_gap: float
    quantization_error: float
    averaging_error: float

    @property
    def rounds(self) -> int:
        return self.consensus.rounds

    @property
    def tokens(self) -> int:
        return self.consensus.tokens_sent


def look_ahead(state: QanmNodeState) -> np.ndarray:
    """x + β(x - x_prev)"""
    return state.x + state.beta * (state.x - state.x_prev)


def gradient_step(state: QanmNodeState, objective: QuadraticObjective, alpha: float) -> np.ndarray:
    """s - α∇f(s) at the node's look-ahead point"""
    if not alpha > 0:
        raise ConfigurationError(f"step size must be positive, got {alpha}")
    s = look_ahead(state)
    grad = objective.gradient(s)
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient at s={s.tolist()}")
    return s - alpha * grad


def outer_iteration(
    states: Sequence[QanmNodeState], config: QanmConfig, scheduler: RoundScheduler
) -> Tuple[List[QanmNodeState], IterationStats]:
    """Local look-ahead and gradient step, quantization, then one consensus instance"""
    if len(states) != config.n:
        raise DimensionMismatchError(f"{len(states)} node states for {config.n} nodes")

    s_list, z_list = [], []
    for state, objective in zip(states, config.objectives):
        state.s = look_ahead(state)
        state.z = gradient_step(state, objective, config.alpha)
        s_list.append(state.s)
        z_list.append(state.z)

    rho = [to_lattice_integer(z, config.delta) for z in z_list]
    consensus = scheduler.run(rho, config.delta)

    new_states = [
        QanmNodeState(x=x.copy(), x_prev=state.x.copy(), beta=state.beta)
        for state, x in zip(states, consensus.outputs)
    ]

    # realized split of the consensus error into lattice rounding and averaging parts
    quantized = [config.delta.scale(r) for r in rho]
    stats = IterationStats(
        s=s_list,
        z=z_list,
        rho=rho,
        consensus=consensus,
        consensus_gap=analysis.consensus_gap(z_list, consensus.outputs),
        quantization_error=float(max(np.max(np.abs(z - q)) for z, q in zip(z_list, quantized))),
        averaging_error=float(np.max(np.abs(consensus.outputs[0] - np.mean(quantized, axis=0)))),
    )
    return new_states, stats


class QanmOptimizer(SimComponent):
    """Runs the outer loop and checks the per-iteration bounds along the way"""

    def __init__(self, config: QanmConfig, x_star: np.ndarray = None):
        super().__init__()
        self.run_config = config
        self.x_star = global_optimum(config.objectives) if x_star is None else np.asarray(x_star, dtype=float)
        self.constants = config.constants
        self.certificate = analysis.compute_certificate(self.constants, config.alpha, config.n)
        self.gap_bound = 2.0 * math.sqrt(config.dim) * float(config.delta)

    def _check_gap(self, k: int, gap: float) -> None:
        bound = self.gap_bound * (1.0 + CHECK_RTOL)
        self.check(
            f"k={k}: consensus gap {gap:.3e} <= 2√p·Δ = {self.gap_bound:.3e}",
            gap <= bound,
            InvariantViolationError(f"iteration {k}: consensus gap {gap:.6e} exceeds 2√p·Δ = {self.gap_bound:.6e}"),
        )

    def _check_spread(self, k: int, spread: analysis.SpreadCheck, scale: float) -> None:
        self.check(
            f"k={k}: look-ahead spread within β̃‖m‖ (excess {spread.worst_excess:.3e})",
            spread.holds(atol=CHECK_RTOL * (1.0 + scale)),
            InvariantViolationError(
                f"iteration {k}: look-ahead spread exceeds β̃‖m‖ by {spread.worst_excess:.6e}"
            ),
        )

    def _xi(self, x_cur, x_prev) -> float:
        if self.certificate.d == 1.0:
            return float('nan')
        return analysis.lyapunov_value(x_cur, x_prev, self.x_star, self.certificate, self.run_config.delta, self.run_config.dim)

    def run(self) -> ConvergenceTrace:
        config = self.run_config
        start = time.time()
        name = f"{config.method}[Δ={config.delta}]"
        SimLogger.log_start(
            name, n=config.n, p=config.dim, alpha=config.alpha, D=config.graph.diameter,
            iterations=config.max_outer_iterations, seed=config.seed,
        )
        self.logger.info(
            f"certificate: eta={self.certificate.eta:.6g} b={self.certificate.b:.6g} "
            f"c={self.certificate.c:.6g} d={self.certificate.d:.6g} "
            f"condition_holds={self.certificate.condition_holds} step_size_ok={self.certificate.step_size_ok}"
        )

        initial = [np.asarray(x, dtype=float).reshape(-1) for x in config.initial_states]
        states = [QanmNodeState.initial(x0, beta) for x0, beta in zip(initial, config.betas)]
        trace = ConvergenceTrace(
            method=config.method,
            delta=config.delta,
            dim=config.dim,
            certificate=self.certificate,
            x_star=self.x_star,
            initial_error=analysis.error_metric(initial, initial, self.x_star),
            initial_distance=self._mean_distance(initial),
        )

        for k in range(config.max_outer_iterations):
            momenta = [state.momentum for state in states]
            scheduler = RoundScheduler(config.graph, config.consensus_seed(k), round_budget=config.round_budget)
            try:
                states, stats = outer_iteration(states, config, scheduler)
            except Exception as e:
                SimLogger.log_error(f"outer iteration {k} failed", e, self.__class__.__name__)
                raise

            x_list = [state.x for state in states]
            self._check_gap(k + 1, stats.consensus_gap)

            # from k = 2 on every node shares both x^[k] and x^[k-1]
            spread = analysis.lookahead_spread(stats.s, momenta, self.constants.beta_tilde)
            if k >= 2:
                self._check_spread(k, spread, float(np.max(np.abs(stats.s))))

            omega, omega_hat = analysis.gradient_averages(config.objectives, stats.s)
            record = IterationRecord(
                k=k + 1,
                error=analysis.error_metric(x_list, initial, self.x_star),
                consensus_gap=stats.consensus_gap,
                xi=max(self._xi(state.x, state.x_prev) for state in states),
                rounds=stats.rounds,
                tokens=stats.tokens,
                broadcasts=stats.consensus.broadcasts,
                bits_estimate=stats.consensus.bits_estimate,
                distance=self._mean_distance(x_list),
                lookahead_excess=spread.worst_excess,
                gradient_gap=float(np.linalg.norm(omega - omega_hat)),
            )
            trace.records.append(record)
            self.logger.debug(
                f"k={record.k} e={record.error:.6e} gap={record.consensus_gap:.3e} "
                f"rounds={record.rounds} tokens={record.tokens}"
            )

            if config.error_floor is not None and record.error <= config.error_floor:
                trace.stop_reason = 'error-floor'
                break

        SimLogger.log_end(name, 'DONE', time.time() - start)
        self.logger.info(f"{name}: final e={trace.errors()[-1]:.6e} mean distance={trace.final_distance:.6e}")
        return trace

    def _mean_distance(self, xs) -> float:
        return float(np.mean([np.linalg.norm(np.asarray(x) - self.x_star) for x in xs]))


def run(config: QanmConfig) -> ConvergenceTrace:
    return QanmOptimizer(config).run()


def baseline_config(config: QanmConfig) -> QanmConfig:
    """The same run without momentum"""
    return replace(config, momentum_override=0.0, method='baseline')
