"""Physical constants, the programmable bias generator and device mismatch.

All currents are plain floats in amperes, times in seconds and
capacitances in farads.  :class:`CurrentValue` exists for the places where
a validated, self-describing current is useful (bias tables, CLI output);
the simulation kernels work on floats directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import InfiniteTimeConstant, InvalidArgument

__all__ = [
    "PhysicalConstants",
    "DEFAULT_CONSTANTS",
    "BiasCode",
    "CurrentValue",
    "BiasGenerator",
    "DEFAULT_BIAS_GENERATOR",
    "MismatchModel",
    "decode_bias",
    "tau_from_bias",
    "bias_from_tau",
    "sample_mismatch",
    "mismatch_factors",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """Subthreshold transistor constants.

    Parameters
    ----------
    thermal_voltage : float
        U_T in volts.
    kappa : float
        Subthreshold slope factor.
    """

    thermal_voltage: float = 0.02585
    kappa: float = 0.70

    def __post_init__(self):
        if not (self.thermal_voltage > 0 and math.isfinite(self.thermal_voltage)):
            raise InvalidArgument(f"thermal_voltage must be > 0, got {self.thermal_voltage!r}")
        if not (0 < self.kappa <= 1):
            raise InvalidArgument(f"kappa must be in (0, 1], got {self.kappa!r}")


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class BiasCode:
    """A 10-bit bias generator code: 3 coarse bits and 7 fine bits."""

    coarse: int
    fine: int

    def __post_init__(self):
        if not (isinstance(self.coarse, (int, np.integer)) and 0 <= self.coarse <= 7):
            raise InvalidArgument(f"coarse must be an integer in [0, 7], got {self.coarse!r}")
        if not (isinstance(self.fine, (int, np.integer)) and 0 <= self.fine <= 127):
            raise InvalidArgument(f"fine must be an integer in [0, 127], got {self.fine!r}")

    @property
    def value(self) -> int:
        return self.coarse * 128 + self.fine

    @classmethod
    def from_value(cls, value: int) -> "BiasCode":
        if not 0 <= value <= 1023:
            raise InvalidArgument(f"10-bit code out of range: {value!r}")
        return cls(value // 128, value % 128)


@dataclass(frozen=True)
class CurrentValue:
    amps: float

    def __post_init__(self):
        if not math.isfinite(self.amps) or self.amps < 0:
            raise InvalidArgument(f"current must be finite and >= 0, got {self.amps!r}")

    def __float__(self):
        return float(self.amps)


@dataclass(frozen=True)
class BiasGenerator:
    """Code to current law ``(fine / 128) * base * ratio**coarse``.

    The defaults span 60 pA up to 120 uA in octaves of 8x.  Both numbers are
    placeholders for a calibrated generator and can be replaced per run.
    """

    base: float = 60e-12
    ratio: float = 8.0

    def coarse_current(self, coarse: int) -> float:
        return self.base * self.ratio**coarse

    def decode(self, code: BiasCode) -> CurrentValue:
        return CurrentValue(code.fine / 128 * self.coarse_current(code.coarse))

    def encode(self, amps: float) -> BiasCode:
        """Smallest-error code for ``amps``, preferring the finer coarse range."""
        if amps < 0 or not math.isfinite(amps):
            raise InvalidArgument(f"cannot encode current {amps!r}")
        best = BiasCode(0, 0)
        best_err = amps
        for coarse in range(8):
            fine = round(amps / self.coarse_current(coarse) * 128)
            if fine > 127:
                continue
            err = abs(fine / 128 * self.coarse_current(coarse) - amps)
            if err < best_err:
                best, best_err = BiasCode(coarse, int(fine)), err
        return best


DEFAULT_BIAS_GENERATOR = BiasGenerator()


def decode_bias(code: BiasCode, generator: BiasGenerator = DEFAULT_BIAS_GENERATOR) -> CurrentValue:
    """Current produced by the bias generator for ``code``."""
    return generator.decode(code)


def tau_from_bias(cap, i_tau, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Time constant ``C * U_T / (kappa * I_tau)`` of a current-mode filter.

    ``i_tau`` may be a float or a :class:`CurrentValue`.  A zero current has
    no finite time constant and raises :class:`InfiniteTimeConstant`.
    """
    i = float(i_tau)
    if not cap > 0:
        raise InvalidArgument(f"capacitance must be > 0, got {cap!r}")
    if i < 0:
        raise InvalidArgument(f"bias current must be >= 0, got {i!r}")
    if i == 0:
        raise InfiniteTimeConstant("i_tau = 0 gives an infinite time constant")
    return cap * consts.thermal_voltage / (consts.kappa * i)


def bias_from_tau(cap, tau, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Inverse of :func:`tau_from_bias`."""
    if not (cap > 0 and tau > 0):
        raise InvalidArgument("cap and tau must be > 0")
    return cap * consts.thermal_voltage / (consts.kappa * tau)


@dataclass(frozen=True)
class MismatchModel:
    """Multiplicative lognormal device mismatch.

    Every device index maps to a fixed factor ``exp(g)`` with
    ``g ~ N(0, sigma_ln**2)``; the draw depends only on ``(seed, index)``.
    """

    sigma_ln: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma_ln >= 0 and math.isfinite(self.sigma_ln)):
            raise InvalidArgument(f"sigma_ln must be >= 0, got {self.sigma_ln!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgument(f"seed must fit in 64 bits, got {self.seed!r}")


_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    # x is uint64; overflow wraps by design
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _standard_normals(seed: int, indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if np.any(idx < 0):
        raise InvalidArgument("device indices must be non-negative")
    with np.errstate(over="ignore"):
        key = _splitmix64(np.array([int(seed)], dtype=np.uint64))[0]
        bits = _splitmix64(idx.astype(np.uint64) * _GOLDEN ^ key)
    # 53 random bits mapped to the open interval (0, 1)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 2.0**53)
    return ndtri(u)


def mismatch_factors(model: MismatchModel, indices) -> np.ndarray:
    """Vector of multiplicative factors for the given device indices."""
    idx = np.asarray(indices)
    if model.sigma_ln == 0:
        return np.ones(idx.shape, dtype=np.float64)
    return np.exp(model.sigma_ln * _standard_normals(model.seed, idx))


def sample_mismatch(nominal, model: MismatchModel, device_index: int) -> CurrentValue:
    """Mismatched copy of ``nominal`` for one device."""
    amps = float(nominal)
    if model.sigma_ln == 0:
        return CurrentValue(amps)
    return CurrentValue(amps * float(mismatch_factors(model, [device_index])[0]))
