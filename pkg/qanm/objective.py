"""
Local quadratic sensor-fusion costs ``f_i(x) = ½ ω_i (x - x0_i)ᵀ P_i (x - x0_i)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from qanm.errors import DimensionMismatchError, InvalidSizeError, SingularSystemError, SpectrumError
from utils.helpers import SeedHelper

PERSONALIZATION_STD = 0.1
WEIGHT_CHOICES = (1, 2, 3, 4, 5)
ANCHOR_CHOICES = (1, 2, 3, 4, 5)
INITIAL_STATE_RANGE = (1.0, 5.0)


class Scenario(str, enum.Enum):
    SHARED_P = 'shared'
    PERSONALIZED_P = 'personalized'


def derive_constants(omega: float, P: np.ndarray) -> Tuple[float, float, float, float]:
    """(mu, L, kappa, beta) from the extreme eigenvalues of ω·P"""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatchError(f"P must be square, got shape {P.shape}")
    if not np.allclose(P, P.T, rtol=0.0, atol=1e-12):
        raise SpectrumError("P is not symmetric")
    if omega <= 0:
        raise SpectrumError(f"weight must be positive, got {omega}")

    if np.count_nonzero(P - np.diag(np.diag(P))) == 0:
        eigenvalues = np.sort(np.diag(P))
    else:
        eigenvalues = np.linalg.eigvalsh(P)
    if eigenvalues[0] <= 0:
        raise SpectrumError(f"P is not positive definite (smallest eigenvalue {eigenvalues[0]:.3e})")

    mu = float(omega * eigenvalues[0])
    L = float(omega * eigenvalues[-1])
    kappa = L / mu
    beta = (math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)
    return mu, L, kappa, beta


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """One node's local cost with its curvature constants"""

    omega: float
    P: np.ndarray
    anchor: np.ndarray
    mu: float = field(init=False)
    L: float = field(init=False)
    kappa: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        anchor = np.array(self.anchor, dtype=float).reshape(-1)
        if P.shape != (anchor.size, anchor.size):
            raise DimensionMismatchError(f"P has shape {P.shape} but the anchor has dimension {anchor.size}")
        P.setflags(write=False)
        anchor.setflags(write=False)
        object.__setattr__(self, 'P', P)
        object.__setattr__(self, 'anchor', anchor)
        mu, L, kappa, beta = derive_constants(self.omega, P)
        object.__setattr__(self, 'mu', mu)
        object.__setattr__(self, 'L', L)
        object.__setattr__(self, 'kappa', kappa)
        object.__setattr__(self, 'beta', beta)

    @property
    def dim(self) -> int:
        return self.anchor.size

    @property
    def hessian(self) -> np.ndarray:
        return self.omega * self.P

    def _offset(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatchError(f"expected a vector of dimension {self.dim}, got shape {x.shape}")
        return x - self.anchor

    def evaluate(self, x) -> float:
        r = self._offset(x)
        return 0.5 * self.omega * float(r @ self.P @ r)

    def gradient(self, x) -> np.ndarray:
        return self.omega * (self.P @ self._offset(x))


def evaluate(obj: QuadraticObjective, x) -> float:
    return obj.evaluate(x)


def gradient(obj: QuadraticObjective, x) -> np.ndarray:
    return obj.gradient(x)


@dataclass(frozen=True)
class GlobalConstants:
    """Network-level constants: mean smoothness, minimum strong convexity, momentum spread"""

    L: float
    mu: float
    beta_hat: float
    beta_tilde: float

    @classmethod
    def from_objectives(cls, objectives: Sequence[QuadraticObjective], betas: Sequence[float] = None) -> "GlobalConstants":
        if not objectives:
            raise InvalidSizeError("at least one objective is required")
        betas = np.array([obj.beta for obj in objectives] if betas is None else betas, dtype=float)
        beta_hat = float(np.mean(betas))
        return cls(
            L=float(np.mean([obj.L for obj in objectives])),
            mu=float(min(obj.mu for obj in objectives)),
            beta_hat=beta_hat,
            beta_tilde=float(np.max(np.abs(beta_hat - betas))),
        )


def _check_dimensions(objectives: Sequence[QuadraticObjective]) -> int:
    if not objectives:
        raise InvalidSizeError("at least one objective is required")
    dims = {obj.dim for obj in objectives}
    if len(dims) != 1:
        raise DimensionMismatchError(f"objectives disagree on dimension: {sorted(dims)}")
    return dims.pop()


def global_optimum(objectives: Sequence[QuadraticObjective]) -> np.ndarray:
    """x* = (Σ ω_i P_i)^-1 Σ ω_i P_i x0_i, the minimizer of Σ f_i"""
    _check_dimensions(objectives)
    H = sum(obj.hessian for obj in objectives)
    rhs = sum(obj.hessian @ obj.anchor for obj in objectives)
    try:
        x_star = np.linalg.solve(H, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"summed Hessian is singular: {e}") from e
    return x_star


def common_matrix(p: int) -> np.ndarray:
    """diag(2^-(p-1), ..., 1/4, 1/2, 1); diag(1/16, 1/8, 1/4, 1/2, 1) for p = 5"""
    if p < 1:
        raise InvalidSizeError(f"dimension must be positive, got p={p}")
    return np.diag([2.0 ** -(p - 1 - j) for j in range(p)])


def build_scenario_objectives(scenario, n: int, seed: int, p: int = 5) -> List[QuadraticObjective]:
    """Sensor-fusion objectives for the shared-P or personalized-P scenario"""
    scenario = Scenario(scenario)
    if n < 1:
        raise InvalidSizeError(f"need at least one node, got n={n}")
    rng = SeedHelper.rng(seed, 'objectives', scenario.value)
    P_c = common_matrix(p)

    objectives = []
    for _ in range(n):
        omega = float(rng.choice(WEIGHT_CHOICES))
        anchor = rng.choice(ANCHOR_CHOICES, size=p).astype(float)
        if scenario is Scenario.PERSONALIZED_P:
            P_n = rng.normal(0.0, PERSONALIZATION_STD, size=(p, p))
            P = P_c + P_n.T @ P_n
            P = 0.5 * (P + P.T)
        else:
            P = P_c
        objectives.append(QuadraticObjective(omega, P, anchor))
    return objectives


def sample_initial_states(n: int, p: int, seed: int) -> List[np.ndarray]:
    """Initial estimates drawn component-wise uniformly from [1, 5]"""
    rng = SeedHelper.rng(seed, 'initial-states')
    low, high = INITIAL_STATE_RANGE
    return [row for row in rng.uniform(low, high, size=(n, p))]
