"""Exception hierarchy for the simulator."""

from typing import Optional, Tuple


class QanmError(Exception):
    """Base class for every simulator error"""


class ConfigurationError(QanmError):
    """Invalid experiment or command-line configuration"""


class InvalidSizeError(ConfigurationError):
    """Node count or dimension out of range"""


class DimensionMismatchError(QanmError):
    """Vectors or matrices of incompatible dimensions"""


class ConnectivityError(QanmError):
    """A digraph is not strongly connected"""

    def __init__(self, message: str, witness: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.witness = witness


class InvalidQuantizationLevelError(QanmError):
    """Quantization level is not a positive exact rational"""


class LatticeOverflowError(QanmError):
    """A lattice integer left the supported integer range"""


class SpectrumError(QanmError):
    """A matrix expected to be symmetric positive definite is not"""


class SingularSystemError(QanmError):
    """The optimum linear system could not be solved"""


class NumericError(QanmError):
    """A non-finite value appeared in a computation"""


class ProtocolViolationError(QanmError):
    """A consensus message reached a node that cannot accept it"""


class ProtocolInvariantError(QanmError):
    """A consensus invariant (conservation, agreement, simultaneity) broke"""


class RoundBudgetExceededError(QanmError):
    """Consensus did not terminate within the round budget"""

    def __init__(self, message: str, state_dump: str = ""):
        super().__init__(message)
        self.state_dump = state_dump


class DegenerateNormalizationError(QanmError):
    """Error metric normalization by a zero initial distance"""


class DegenerateCertificateError(QanmError):
    """Certificate with d = 1 cannot define the Lyapunov value"""


class PreconditionError(QanmError):
    """Inputs outside the range an analysis check is defined on"""


class InvariantViolationError(QanmError):
    """A runtime-checked bound failed along a trajectory"""
