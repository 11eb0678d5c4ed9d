import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_int(key: str, default: int) -> int:
    try:
        return int(os.getenv(key, str(default)))
    except ValueError:
        return default


def _env_float(key: str, default: float) -> float:
    try:
        return float(os.getenv(key, str(default)))
    except ValueError:
        return default


def _env_flag(key: str, default: str) -> bool:
    return os.getenv(key, default).lower() in ('true', '1', 'yes', 'on')


class Config:
    """Configuration settings for the simulator"""

    # Experiment defaults (overridden by a config file, then by CLI flags)
    SEED = _env_int('QANM_SEED', 7)
    NODES = _env_int('QANM_NODES', 20)
    DIM = _env_int('QANM_DIM', 5)
    ALPHA = _env_float('QANM_ALPHA', 0.12)
    DELTAS = [d.strip() for d in os.getenv('QANM_DELTAS', '1e-3,1e-6').split(',') if d.strip()]
    ITERATIONS = _env_int('QANM_ITERATIONS', 300)
    GRAPH_PROBABILITY = _env_float('QANM_GRAPH_PROBABILITY', 0.15)
    SCENARIO = os.getenv('QANM_SCENARIO', 'shared')

    # Consensus
    ROUND_BUDGET = _env_int('QANM_ROUND_BUDGET', 1_000_000)

    # Output
    RESULTS_DIR = os.getenv('QANM_RESULTS_DIR', 'results')
    WORKERS = _env_int('QANM_WORKERS', 1)

    # Logging configuration
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()
    LOG_TO_FILE = _env_flag('LOG_TO_FILE', 'true')
    LOG_TO_CONSOLE = _env_flag('LOG_TO_CONSOLE', 'true')
    LOG_FILE_PATH = os.getenv('LOG_FILE_PATH', 'logs/qanm.log')

    # Supported scenarios
    SCENARIOS = ['shared', 'personalized']
