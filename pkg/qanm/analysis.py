"""
Convergence constants, certificates and trajectory diagnostics.

The certificate uses the conservative network constants (mean smoothness,
minimum strong convexity, momentum mean and spread). ``d`` and ``-c`` are the
roots of ``t² - (η + b)t - b = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qanm.errors import (
    DegenerateCertificateError,
    DegenerateNormalizationError,
    DimensionMismatchError,
    InvalidSizeError,
    PreconditionError,
)
from qanm.objective import GlobalConstants, QuadraticObjective
from utils.helpers import SeedHelper

CONTRACTION_RTOL = 1e-12


@dataclass(frozen=True)
class ConvergenceCertificate:
    eta: float
    b: float
    c: float
    d: float
    condition_holds: bool
    d_in_unit: bool
    step_size_ok: bool
    alpha: float
    n: int
    constants: GlobalConstants

    def as_dict(self) -> dict:
        return {
            'eta': self.eta,
            'b': self.b,
            'c': self.c,
            'd': self.d,
            'condition_holds': self.condition_holds,
            'd_in_unit': self.d_in_unit,
            'step_size_ok': self.step_size_ok,
            'alpha': self.alpha,
            'n': self.n,
            'L': self.constants.L,
            'mu': self.constants.mu,
            'beta_hat': self.constants.beta_hat,
            'beta_tilde': self.constants.beta_tilde,
        }


def compute_certificate(constants: GlobalConstants, alpha: float, n: int) -> ConvergenceCertificate:
    """Fill η, b, c, d and flag which convergence hypotheses hold"""
    eta = 1.0 - constants.mu * alpha / n
    b = eta * constants.beta_hat + alpha * constants.L * constants.beta_tilde
    s = eta + b
    d = (s + math.sqrt(s * s + 4.0 * b)) / 2.0
    # c·d = b; the quotient avoids cancellation in -(η+b) + √(...)
    c = b / d if d != 0 else 0.0
    return ConvergenceCertificate(
        eta=eta,
        b=b,
        c=c,
        d=d,
        condition_holds=b < constants.mu * alpha / (2.0 * n),
        d_in_unit=0.0 < d < 1.0,
        step_size_ok=alpha <= 2.0 / (constants.mu + constants.L),
        alpha=alpha,
        n=n,
        constants=constants,
    )


def _stack(vectors: Sequence) -> np.ndarray:
    if len(vectors) == 0:
        raise InvalidSizeError("need at least one vector")
    try:
        return np.array([np.asarray(v, dtype=float).reshape(-1) for v in vectors])
    except ValueError as e:
        raise DimensionMismatchError(f"vectors disagree on dimension: {e}") from e


def error_metric(states: Sequence, initial_states: Sequence, x_star) -> float:
    """sqrt of the mean over nodes of ‖x_i - x*‖ / ‖x_i⁰ - x*‖"""
    X, X0 = _stack(states), _stack(initial_states)
    if X.shape != X0.shape or X.shape[1] != np.size(x_star):
        raise DimensionMismatchError(f"states {X.shape}, initial states {X0.shape}, x* of size {np.size(x_star)}")
    x_star = np.asarray(x_star, dtype=float)
    denominators = np.linalg.norm(X0 - x_star, axis=1)
    if np.any(denominators == 0):
        raise DegenerateNormalizationError(
            f"nodes {np.flatnonzero(denominators == 0).tolist()} start at the optimum"
        )
    return math.sqrt(float(np.mean(np.linalg.norm(X - x_star, axis=1) / denominators)))


def lyapunov_value(x_cur, x_prev, x_star, certificate: ConvergenceCertificate, delta, p: int) -> float:
    """‖x - x*‖ + c‖x_prev - x*‖ + 2√p·Δ/(d - 1)"""
    if certificate.d == 1.0:
        raise DegenerateCertificateError("d = 1 leaves the quantization term undefined")
    x_star = np.asarray(x_star, dtype=float)
    offset = 2.0 * math.sqrt(p) * float(delta) / (certificate.d - 1.0)
    return (
        float(np.linalg.norm(np.asarray(x_cur, dtype=float) - x_star))
        + certificate.c * float(np.linalg.norm(np.asarray(x_prev, dtype=float) - x_star))
        + offset
    )


def consensus_gap(pre_consensus_z: Sequence, post_consensus_x: Sequence) -> float:
    """max_i ‖x_i - mean(z)‖"""
    Z, X = _stack(pre_consensus_z), _stack(post_consensus_x)
    if Z.shape[1] != X.shape[1]:
        raise DimensionMismatchError(f"z vectors have dimension {Z.shape[1]}, x vectors {X.shape[1]}")
    z_hat = Z.mean(axis=0)
    return float(np.max(np.linalg.norm(X - z_hat, axis=1)))


@dataclass(frozen=True)
class SpreadCheck:
    """Per-node look-ahead spread ‖ŝ - s_i‖ against β̃‖m_i‖"""

    spreads: np.ndarray
    bounds: np.ndarray

    def holds(self, atol: float = 1e-9) -> bool:
        return bool(np.all(self.spreads <= self.bounds + atol))

    @property
    def worst_excess(self) -> float:
        return float(np.max(self.spreads - self.bounds))


def lookahead_spread(s_list: Sequence, momenta: Sequence, beta_tilde: float) -> SpreadCheck:
    """Compare each look-ahead's distance from the mean with β̃ times its momentum m_i = x_i - x_prev_i"""
    S = _stack(s_list)
    momentum = _stack(momenta)
    if momentum.shape != S.shape:
        raise DimensionMismatchError(f"look-ahead points {S.shape} and momenta {momentum.shape} differ")
    spreads = np.linalg.norm(S.mean(axis=0) - S, axis=1)
    bounds = beta_tilde * np.linalg.norm(momentum, axis=1)
    return SpreadCheck(spreads=spreads, bounds=bounds)


def gradient_averages(objectives: Sequence[QuadraticObjective], s_list: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    """(ω, ω̂): mean local gradient at each s_i, and at the mean look-ahead ŝ"""
    S = _stack(s_list)
    if len(objectives) != S.shape[0]:
        raise DimensionMismatchError(f"{len(objectives)} objectives for {S.shape[0]} look-ahead points")
    s_hat = S.mean(axis=0)
    omega = np.mean([obj.gradient(s) for obj, s in zip(objectives, S)], axis=0)
    omega_hat = np.mean([obj.gradient(s_hat) for obj in objectives], axis=0)
    return omega, omega_hat


@dataclass(frozen=True)
class ContractionReport:
    passed: bool
    trials: int
    worst_ratio: float
    violations: int


def contraction_sides(objective: QuadraticObjective, theta: float, x1, x2) -> Tuple[float, float]:
    """(‖x1 - x2 - θ(∇f(x1) - ∇f(x2))‖, (1 - μθ)‖x1 - x2‖)"""
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    lhs = float(np.linalg.norm(x1 - x2 - theta * (objective.gradient(x1) - objective.gradient(x2))))
    rhs = (1.0 - objective.mu * theta) * float(np.linalg.norm(x1 - x2))
    return lhs, rhs


def contraction_holds(lhs: float, rhs: float, scale: float) -> bool:
    """lhs <= rhs up to CONTRACTION_RTOL relative to rhs and to ‖x1 - x2‖"""
    return lhs <= rhs * (1.0 + CONTRACTION_RTOL) + CONTRACTION_RTOL * scale


def contraction_check(objectives: Sequence[QuadraticObjective], theta: float, trials: int, seed: int) -> ContractionReport:
    """Sample random pairs and test the gradient-step contraction bound"""
    if not objectives:
        raise PreconditionError("need at least one objective")
    for obj in objectives:
        if not 0.0 < theta <= 2.0 / (obj.mu + obj.L):
            raise PreconditionError(f"theta={theta} outside (0, 2/(mu+L)] = (0, {2.0 / (obj.mu + obj.L):.6g}]")

    rng = SeedHelper.rng(seed, 'contraction')
    worst, violations = 0.0, 0
    for _ in range(trials):
        obj = objectives[int(rng.integers(len(objectives)))]
        x1 = rng.normal(0.0, 5.0, size=obj.dim)
        x2 = rng.normal(0.0, 5.0, size=obj.dim)
        lhs, rhs = contraction_sides(obj, theta, x1, x2)
        if not contraction_holds(lhs, rhs, float(np.linalg.norm(x1 - x2))):
            violations += 1
            worst = max(worst, lhs / rhs if rhs > 0 else math.inf)
        elif rhs > 0:
            worst = max(worst, lhs / rhs)
    return ContractionReport(passed=violations == 0, trials=trials, worst_ratio=worst, violations=violations)


@dataclass
class IterationRecord:
    """Diagnostics of the state x^[k] produced by outer iteration k"""

    k: int
    error: float
    consensus_gap: float
    xi: float
    rounds: int
    tokens: int
    broadcasts: int
    bits_estimate: int
    distance: float
    lookahead_excess: float = float('nan')
    gradient_gap: float = float('nan')


@dataclass
class ConvergenceTrace:
    method: str
    delta: object
    dim: int
    certificate: ConvergenceCertificate
    x_star: np.ndarray
    initial_error: float
    initial_distance: float
    records: List[IterationRecord] = field(default_factory=list)
    stop_reason: str = 'budget'

    @property
    def final_distance(self) -> float:
        return self.records[-1].distance if self.records else self.initial_distance

    def errors(self) -> List[float]:
        """e^[k] for k = 0..K"""
        return [self.initial_error] + [r.error for r in self.records]

    def distances(self) -> List[float]:
        return [self.initial_distance] + [r.distance for r in self.records]

    def pre_plateau_errors(self, factor: float = 10.0) -> List[float]:
        """Leading errors whose mean distance to x* is above factor·√p·Δ"""
        floor = factor * math.sqrt(self.dim) * float(self.delta)
        errors = []
        for e, distance in zip(self.errors(), self.distances()):
            if distance <= floor:
                break
            errors.append(e)
        return errors


def iterations_to_threshold(errors: Sequence[float], threshold: float) -> Optional[int]:
    for k, e in enumerate(errors):
        if e <= threshold:
            return k
    return None


def log_error_slope(errors: Sequence[float]) -> float:
    """Least-squares slope of log e^[k] against k"""
    values = np.asarray(errors, dtype=float)
    if values.size < 2:
        raise PreconditionError("need at least two errors to fit a slope")
    if np.any(values <= 0):
        raise PreconditionError("errors must be positive on the fitted segment")
    return float(np.polyfit(np.arange(values.size), np.log(values), 1)[0])


def is_non_increasing_until_plateau(errors: Sequence[float], rtol: float = 0.0) -> bool:
    """Pass the pre-plateau segment, e.g. ConvergenceTrace.pre_plateau_errors()"""
    return all(b <= a * (1.0 + rtol) for a, b in zip(errors, errors[1:]))
