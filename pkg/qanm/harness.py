"""
Experiment orchestration: paired QANM / no-momentum runs per quantization level
over one shared network, and CSV export of the resulting traces.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from config import Config
from qanm.analysis import ConvergenceTrace
from qanm.base import SimComponent
from qanm.digraph import Digraph, generate_strongly_connected, read_edge_list, write_edge_list
from qanm.errors import ConfigurationError, QanmError
from qanm.nesterov import QanmConfig, QanmOptimizer
from qanm.objective import Scenario, build_scenario_objectives, global_optimum, sample_initial_states
from qanm.quantize import QuantizationLevel
from utils.helpers import DataHelper, FileHelper, SeedHelper
from utils.logger import SimLogger

CSV_COLUMNS = [
    'method', 'delta', 'k', 'error_e', 'consensus_gap', 'xi', 'rounds', 'tokens', 'bits_estimate',
]
METHODS = ('qanm', 'baseline')


def _float_field(value: float) -> str:
    return format(value, '.17g')


@dataclass
class ExperimentConfig:
    scenario: str = Config.SCENARIO
    n: int = Config.NODES
    p: int = Config.DIM
    alpha: float = Config.ALPHA
    deltas: List[str] = field(default_factory=lambda: list(Config.DELTAS))
    iterations: int = Config.ITERATIONS
    seed: int = Config.SEED
    baseline: bool = False
    graph_probability: float = Config.GRAPH_PROBABILITY
    graph_file: Optional[str] = None
    output_path: Optional[str] = None
    round_budget: int = Config.ROUND_BUDGET
    error_floor: Optional[float] = None
    workers: int = Config.WORKERS
    save_graph: Optional[str] = None

    def __post_init__(self):
        try:
            self.scenario = Scenario(self.scenario).value
        except ValueError as e:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}; choose from {Config.SCENARIOS}") from e
        if isinstance(self.deltas, (str, int, float)):
            self.deltas = [self.deltas]
        if not self.deltas:
            raise ConfigurationError("at least one quantization level is required")
        self.deltas = [str(d) for d in self.deltas]
        for d in self.deltas:
            try:
                QuantizationLevel.parse(d)
            except QanmError as e:
                raise ConfigurationError(str(e)) from e
        if self.iterations < 1:
            raise ConfigurationError(f"iterations must be >= 1, got {self.iterations}")
        if self.graph_file is None and self.n < 2:
            raise ConfigurationError(f"a generated network needs at least 2 nodes, got {self.n}")
        if self.p < 1:
            raise ConfigurationError(f"dimension must be >= 1, got {self.p}")
        if not self.alpha > 0:
            raise ConfigurationError(f"step size must be positive, got {self.alpha}")
        if not 0.0 <= self.graph_probability <= 1.0:
            raise ConfigurationError(f"graph probability must lie in [0, 1], got {self.graph_probability}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")

    @property
    def methods(self) -> Sequence[str]:
        return ('baseline',) if self.baseline else METHODS

    @classmethod
    def from_sources(cls, file_values: Dict[str, Any] = None, overrides: Dict[str, Any] = None) -> "ExperimentConfig":
        """Defaults < config-file values < overrides (flags); None overrides are ignored"""
        values: Dict[str, Any] = {}
        known = set(cls.__dataclass_fields__)
        for source in (file_values or {}, overrides or {}):
            for key, value in source.items():
                key = key.replace('-', '_')
                if key not in known:
                    raise ConfigurationError(f"unknown configuration key {key!r}")
                if value is not None:
                    values[key] = value
        return cls(**values)

    @classmethod
    def from_file(cls, path: Union[str, Path], overrides: Dict[str, Any] = None) -> "ExperimentConfig":
        try:
            file_values = DataHelper.load_json_data(path)
        except (OSError, ValueError) as e:
            raise ConfigurationError(f"cannot read config file {path}: {e}") from e
        if not isinstance(file_values, dict):
            raise ConfigurationError(f"config file {path} must hold a JSON object")
        return cls.from_sources(file_values, overrides)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ExperimentSetup:
    """Network, objectives and initial states shared by every cell"""

    graph: Digraph
    objectives: list
    initial_states: list
    x_star: np.ndarray


def build_setup(config: ExperimentConfig) -> ExperimentSetup:
    if config.graph_file:
        graph = read_edge_list(config.graph_file)
    else:
        graph = generate_strongly_connected(
            config.n, config.graph_probability, SeedHelper.derive_seed(config.seed, 'graph')
        )
    objectives = build_scenario_objectives(config.scenario, graph.n, config.seed, p=config.p)
    initial_states = sample_initial_states(graph.n, config.p, config.seed)
    return ExperimentSetup(graph, objectives, initial_states, global_optimum(objectives))


def qanm_config(config: ExperimentConfig, setup: ExperimentSetup, delta: str, method: str) -> QanmConfig:
    return QanmConfig(
        alpha=config.alpha,
        delta=QuantizationLevel.parse(delta),
        max_outer_iterations=config.iterations,
        graph=setup.graph,
        objectives=setup.objectives,
        initial_states=setup.initial_states,
        momentum_override=0.0 if method == 'baseline' else None,
        seed=config.seed,
        round_budget=config.round_budget,
        error_floor=config.error_floor,
        method=method,
    )


def _run_cell(args) -> ConvergenceTrace:
    config, setup, delta, method = args
    return QanmOptimizer(qanm_config(config, setup, delta, method), x_star=setup.x_star).run()


class ExperimentRunner(SimComponent):
    """Runs every (Δ, method) cell of an experiment and exports the traces"""

    def __init__(self, experiment: ExperimentConfig):
        super().__init__()
        self.experiment = experiment

    def cells(self):
        return [(delta, method) for delta in self.experiment.deltas for method in self.experiment.methods]

    def run(self) -> List[ConvergenceTrace]:
        experiment = self.experiment
        start = time.time()
        SimLogger.log_start('experiment', **experiment.as_dict())

        setup = build_setup(experiment)
        self.logger.info(
            f"🌐 network: n={setup.graph.n} edges={len(setup.graph.edges)} D={setup.graph.diameter}"
        )
        if experiment.save_graph:
            write_edge_list(setup.graph, experiment.save_graph)

        jobs = [(experiment, setup, delta, method) for delta, method in self.cells()]
        SimLogger.log_step(f"{len(jobs)} cells on {experiment.workers} worker(s)", self.__class__.__name__)
        if experiment.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=experiment.workers) as pool:
                traces = list(pool.map(_run_cell, jobs))
        else:
            traces = [_run_cell(job) for job in jobs]

        if experiment.output_path:
            export_csv(traces, experiment.output_path)
            self.logger.info(f"📁 CSV written to {experiment.output_path}")
        SimLogger.log_end('experiment', 'DONE', time.time() - start)
        return traces


def run_experiment(config: ExperimentConfig) -> List[ConvergenceTrace]:
    return ExperimentRunner(config).run()


def export_csv(traces: Sequence[ConvergenceTrace], path: Union[str, Path]) -> Path:
    """One row per (method, Δ, k) in trace order"""
    if not traces:
        raise ConfigurationError("no traces to export")
    target = FileHelper.ensure_parent(path)
    try:
        with open(target, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for trace in traces:
                for record in trace.records:
                    writer.writerow([
                        trace.method,
                        str(trace.delta),
                        record.k,
                        _float_field(record.error),
                        _float_field(record.consensus_gap),
                        _float_field(record.xi),
                        record.rounds,
                        record.tokens,
                        record.bits_estimate,
                    ])
    except OSError as e:
        SimLogger.log_error(f"cannot write CSV to {path}", e, 'harness')
        raise
    return target


def read_csv(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Parse an exported CSV back into typed rows"""
    rows = []
    with open(path, 'r', newline='', encoding='utf-8') as handle:
        for row in csv.DictReader(handle):
            rows.append({
                'method': row['method'],
                'delta': row['delta'],
                'k': int(row['k']),
                'error_e': float(row['error_e']),
                'consensus_gap': float(row['consensus_gap']),
                'xi': float(row['xi']) if row['xi'] != 'nan' else math.nan,
                'rounds': int(row['rounds']),
                'tokens': int(row['tokens']),
                'bits_estimate': int(row['bits_estimate']),
            })
    return rows
