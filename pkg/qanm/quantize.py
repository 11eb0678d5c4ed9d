"""
Uniform asymmetric mid-tread quantizer ``q(x) = Δ·⌊x/Δ⌋`` applied per component.

The level Δ is held as an exact rational so lattice integers are exact. Floating
inputs that are the rounded image of a lattice point map back onto that point,
which keeps ``quantize`` idempotent in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from qanm.errors import InvalidQuantizationLevelError, LatticeOverflowError, NumericError

# y = 2ρ is summed over the whole network inside int64 consensus state
LATTICE_LIMIT = 2 ** 52


@dataclass(frozen=True)
class QuantizationLevel:
    """Positive rational lattice spacing Δ"""

    value: Fraction

    def __post_init__(self):
        value = self.value
        if not isinstance(value, Fraction):
            value = _to_fraction(value)
            object.__setattr__(self, 'value', value)
        if value <= 0:
            raise InvalidQuantizationLevelError(f"quantization level must be positive, got {value}")

    @classmethod
    def parse(cls, text: Union[str, float, int, Fraction, "QuantizationLevel"]) -> "QuantizationLevel":
        if isinstance(text, QuantizationLevel):
            return text
        return cls(_to_fraction(text))

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        return format(float(self.value), 'g')

    def scale(self, lattice: np.ndarray) -> np.ndarray:
        """Map lattice integers to the nearest floats of k·Δ"""
        return np.array([float(int(k) * self.value) for k in np.ravel(lattice)], dtype=float).reshape(np.shape(lattice))


def _to_fraction(value) -> Fraction:
    try:
        if isinstance(value, float):
            # decimal reading of the float, e.g. 0.001 -> 1/1000
            return Fraction(repr(value))
        return Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError) as e:
        raise InvalidQuantizationLevelError(f"not an exact rational quantization level: {value!r}") from e


def _lattice_component(x: float, delta: Fraction) -> int:
    if not math.isfinite(x):
        raise NumericError(f"cannot quantize non-finite value {x}")
    k = math.floor(Fraction(x) / delta)
    if float((k + 1) * delta) == x:
        k += 1
    if abs(k) > LATTICE_LIMIT:
        raise LatticeOverflowError(f"lattice integer {k} for x={x} exceeds ±{LATTICE_LIMIT}")
    return k


def to_lattice_integer(x, delta: QuantizationLevel) -> np.ndarray:
    """Component-wise ⌊x/Δ⌋ as int64"""
    delta = QuantizationLevel.parse(delta)
    values = np.asarray(x, dtype=float)
    lattice = [_lattice_component(float(v), delta.value) for v in np.ravel(values)]
    return np.array(lattice, dtype=np.int64).reshape(values.shape)


def from_lattice(lattice, delta: QuantizationLevel) -> np.ndarray:
    return QuantizationLevel.parse(delta).scale(np.asarray(lattice, dtype=np.int64))


def quantize(x, delta: QuantizationLevel) -> np.ndarray:
    """Δ·⌊x/Δ⌋ component-wise, floor toward -inf"""
    delta = QuantizationLevel.parse(delta)
    return delta.scale(to_lattice_integer(x, delta))
