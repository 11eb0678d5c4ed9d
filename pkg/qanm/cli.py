"""
Command-line interface: run experiments, print a convergence certificate, or
drive one standalone consensus instance.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from config import Config
from qanm import analysis
from qanm.digraph import Digraph, generate_strongly_connected, read_edge_list
from qanm.errors import ConfigurationError, QanmError
from qanm.ftqac import JsonLinesTrace, run_to_completion
from qanm.harness import ExperimentConfig, build_setup, run_experiment
from qanm.objective import GlobalConstants
from qanm.quantize import QuantizationLevel
from utils.helpers import DataHelper, SeedHelper
from utils.logger import SimLogger

USAGE_ERROR = 2
RUNTIME_ERROR = 1
REPORT_THRESHOLD = 1e-2


class UsageError(ConfigurationError):
    """Raised by the parser instead of exiting"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    # defaults stay None so a config file value is only replaced by an explicit flag
    parser.add_argument('--config', metavar='FILE', help='JSON config file; flags win on conflict')
    parser.add_argument('--scenario', choices=Config.SCENARIOS, help='shared or personalized P matrices')
    parser.add_argument('--nodes', type=int, metavar='N', help=f'node count (default: {Config.NODES})')
    parser.add_argument('--dim', type=int, metavar='P', help=f'state dimension (default: {Config.DIM})')
    parser.add_argument('--alpha', type=float, help=f'step size (default: {Config.ALPHA})')
    parser.add_argument('--delta', action='append', metavar='DELTA',
                        help='quantization level, repeatable (default: %s)' % ','.join(Config.DELTAS))
    parser.add_argument('--iters', type=int, metavar='K', help=f'outer iterations (default: {Config.ITERATIONS})')
    parser.add_argument('--seed', type=int, help=f'experiment seed (default: {Config.SEED})')
    parser.add_argument('--baseline', action='store_const', const=True,
                        help='run only the β = 0 baseline')
    parser.add_argument('--graph-prob', type=float, metavar='P',
                        help=f'extra edge probability (default: {Config.GRAPH_PROBABILITY})')
    parser.add_argument('--graph-file', metavar='FILE', help='edge-list file instead of a generated network')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog='qanm',
        description='Quantized Nesterov distributed optimization simulator',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python qanm_runner.py run --scenario shared --delta 1e-3 --delta 1e-6 --out results/fig1.csv
  python qanm_runner.py run --scenario personalized --workers 4
  python qanm_runner.py certify --alpha 0.5
  python qanm_runner.py consensus --input inputs.txt --delta 1 --trace rounds.jsonl
        """
    )
    subparsers = parser.add_subparsers(dest='command', parser_class=_Parser)
    subparsers.required = True

    run_parser = subparsers.add_parser('run', help='run QANM against the baseline and export a CSV')
    _add_experiment_flags(run_parser)
    run_parser.add_argument('--out', metavar='FILE', help='CSV output path')
    run_parser.add_argument('--save-graph', metavar='FILE', help='write the network as an edge list')
    run_parser.add_argument('--workers', type=int, metavar='N', help='parallel experiment cells')
    run_parser.add_argument('--error-floor', type=float, metavar='E', help='stop once e^[k] falls below E')

    certify_parser = subparsers.add_parser('certify', help='print the convergence certificate')
    _add_experiment_flags(certify_parser)

    consensus_parser = subparsers.add_parser('consensus', help='run one standalone consensus instance')
    consensus_parser.add_argument('--input', required=True, metavar='FILE',
                                  help='one integer vector per node per line, or a JSON list')
    consensus_parser.add_argument('--delta', default='1', help='quantization level (default: 1)')
    consensus_parser.add_argument('--seed', type=int, default=Config.SEED)
    consensus_parser.add_argument('--graph-file', metavar='FILE')
    consensus_parser.add_argument('--graph-prob', type=float, default=Config.GRAPH_PROBABILITY, metavar='P')
    consensus_parser.add_argument('--round-budget', type=int, default=Config.ROUND_BUDGET, metavar='N')
    consensus_parser.add_argument('--trace', metavar='FILE', help='write the per-round JSON-lines trace')
    return parser


def experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        'scenario': args.scenario,
        'n': args.nodes,
        'p': args.dim,
        'alpha': args.alpha,
        'deltas': args.delta,
        'iterations': args.iters,
        'seed': args.seed,
        'baseline': args.baseline,
        'graph_probability': args.graph_prob,
        'graph_file': args.graph_file,
        'output_path': getattr(args, 'out', None),
        'save_graph': getattr(args, 'save_graph', None),
        'workers': getattr(args, 'workers', None),
        'error_floor': getattr(args, 'error_floor', None),
    }
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig.from_sources(overrides=overrides)


def cmd_run(args: argparse.Namespace) -> int:
    experiment = experiment_from_args(args)
    if not experiment.output_path:
        experiment.output_path = str(Path(Config.RESULTS_DIR) / f"{experiment.scenario}.csv")

    traces = run_experiment(experiment)
    for trace in traces:
        errors = trace.errors()
        hit = analysis.iterations_to_threshold(errors, REPORT_THRESHOLD)
        print(
            f"📊 {trace.method:<8} Δ={trace.delta}: final e={errors[-1]:.6e} "
            f"mean distance={trace.final_distance:.6e} "
            f"k(e<={REPORT_THRESHOLD:g})={hit if hit is not None else '-'}"
        )
    print(f"📁 CSV: {experiment.output_path}")
    return 0


def cmd_certify(args: argparse.Namespace) -> int:
    experiment = experiment_from_args(args)
    setup = build_setup(experiment)
    betas = [0.0] * setup.graph.n if experiment.baseline else None
    constants = GlobalConstants.from_objectives(setup.objectives, betas)
    certificate = analysis.compute_certificate(constants, experiment.alpha, setup.graph.n)
    for key, value in certificate.as_dict().items():
        print(f"{key}: {value}")
    print(f"stepSizeOk={str(certificate.step_size_ok).lower()}")
    return 0


def _consensus_graph(args: argparse.Namespace, n: int) -> Digraph:
    if args.graph_file:
        return read_edge_list(args.graph_file)
    if n == 1:
        return Digraph(1)
    return generate_strongly_connected(n, args.graph_prob, SeedHelper.derive_seed(args.seed, 'graph'))


def cmd_consensus(args: argparse.Namespace) -> int:
    try:
        rho = DataHelper.load_integer_vectors(args.input)
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"cannot read consensus input {args.input}: {e}") from e
    if not rho:
        raise ConfigurationError(f"consensus input {args.input} holds no vectors")
    delta = QuantizationLevel.parse(args.delta)
    graph = _consensus_graph(args, len(rho))
    seed = SeedHelper.derive_seed(args.seed, 'consensus', 0)

    if args.trace:
        with JsonLinesTrace(args.trace) as trace:
            result = run_to_completion(rho, graph, delta, seed, round_budget=args.round_budget, trace=trace)
    else:
        result = run_to_completion(rho, graph, delta, seed, round_budget=args.round_budget)

    output = ' '.join(format(v, 'g') for v in np.ravel(result.outputs[0]))
    print(f"output: {output}")
    print(f"rounds: {result.rounds}")
    print(f"tokens: {result.tokens_sent} broadcasts: {result.broadcasts} bits: {result.bits_estimate}")
    return 0


COMMANDS = {
    'run': cmd_run,
    'certify': cmd_certify,
    'consensus': cmd_consensus,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as e:
        # --help
        return e.code or 0
    except ConfigurationError as e:
        print(f"❌ {e}", file=sys.stderr)
        if isinstance(e, UsageError):
            parser.print_usage(sys.stderr)
        return USAGE_ERROR
    except QanmError as e:
        SimLogger.log_error("command failed", e, 'cli')
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return RUNTIME_ERROR
    except OSError as e:
        print(f"❌ I/O error: {e}", file=sys.stderr)
        return RUNTIME_ERROR
