"""Current-mode first-order low-pass filter (differential pair integrator).

The filter obeys ``tau * dI_out/dt + I_out = gain * I_in`` with
``tau = C U_T / (kappa I_tau)`` and ``gain = I_thr / I_tau``.  Inputs are
piecewise constant, so every update is the exact closed-form solution;
:func:`drive_response` extends this to inputs that are themselves sums of
decaying exponentials (a filter driven by another filter).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .errors import InvalidArgument, TimeReversal
from .expsum import UP, ExpSum
from .params import DEFAULT_CONSTANTS, PhysicalConstants, bias_from_tau, tau_from_bias

__all__ = [
    "DpiParams",
    "DpiState",
    "Crossing",
    "ALREADY_ABOVE",
    "steady_state",
    "advance",
    "set_input",
    "value_at",
    "crossing_time",
    "trajectory",
    "drive_response",
]

# relative separation kept between a filter's own rate and any input rate
_RESONANCE_GAP = 1e-6


@dataclass(frozen=True)
class DpiParams:
    """Filter biases.  ``tau`` and ``gain`` are derived on construction."""

    cap: float
    i_tau: float
    i_thr: float
    consts: PhysicalConstants = DEFAULT_CONSTANTS
    tau: float = field(init=False)
    gain: float = field(init=False)

    def __post_init__(self):
        if not self.cap > 0:
            raise InvalidArgument(f"cap must be > 0, got {self.cap!r}")
        if not self.i_tau > 0:
            raise InvalidArgument(f"i_tau must be > 0, got {self.i_tau!r}")
        if not self.i_thr >= 0:
            raise InvalidArgument(f"i_thr must be >= 0, got {self.i_thr!r}")
        object.__setattr__(self, "tau", tau_from_bias(self.cap, self.i_tau, self.consts))
        object.__setattr__(self, "gain", self.i_thr / self.i_tau)

    @classmethod
    def from_tau(cls, tau, gain=1.0, cap=1e-12, consts=DEFAULT_CONSTANTS) -> "DpiParams":
        """Build params that realise a given time constant and gain."""
        i_tau = bias_from_tau(cap, tau, consts)
        return cls(cap=cap, i_tau=i_tau, i_thr=gain * i_tau, consts=consts)

    def with_gain(self, gain: float) -> "DpiParams":
        return replace(self, i_thr=gain * self.i_tau)


@dataclass(frozen=True)
class DpiState:
    i_out: float = 0.0
    t_last: float = 0.0
    i_in: float = 0.0


class Crossing(enum.Enum):
    ALREADY_ABOVE = "already-above"


ALREADY_ABOVE = Crossing.ALREADY_ABOVE


def steady_state(params: DpiParams, i_in: float) -> float:
    if i_in < 0:
        raise InvalidArgument(f"input current must be >= 0, got {i_in!r}")
    return params.gain * i_in


def value_at(state: DpiState, params: DpiParams, t: float) -> float:
    """Output current at ``t >= t_last`` without building a new state."""
    dt = t - state.t_last
    if dt < 0:
        raise TimeReversal(f"cannot evaluate at t={t!r} < t_last={state.t_last!r}")
    i_ss = params.gain * state.i_in
    if dt == 0:
        return state.i_out
    return i_ss + (state.i_out - i_ss) * math.exp(-dt / params.tau)


def advance(state: DpiState, params: DpiParams, t: float) -> DpiState:
    """Exact state at time ``t`` under the currently applied input."""
    if t == state.t_last:
        return state
    return DpiState(value_at(state, params, t), t, state.i_in)


def set_input(state: DpiState, params: DpiParams, t: float, i_in: float) -> DpiState:
    """Advance to ``t`` and switch the input to ``i_in`` (output stays continuous)."""
    if i_in < 0:
        raise InvalidArgument(f"input current must be >= 0, got {i_in!r}")
    out = value_at(state, params, t)
    return DpiState(out, t, float(i_in))


def crossing_time(
    state: DpiState, params: DpiParams, threshold: float
) -> Union[float, None, Crossing]:
    """Earliest time the output reaches ``threshold`` under the present input.

    Returns :data:`ALREADY_ABOVE` if the output is at or above threshold at
    ``t_last`` and ``None`` if the steady state never gets there.
    """
    if not threshold > 0:
        raise InvalidArgument(f"threshold must be > 0, got {threshold!r}")
    if state.i_out >= threshold:
        return ALREADY_ABOVE
    i_ss = params.gain * state.i_in
    if i_ss <= threshold:
        return None
    return state.t_last + params.tau * math.log((i_ss - state.i_out) / (i_ss - threshold))


def trajectory(state: DpiState, params: DpiParams) -> ExpSum:
    """Output as a function of time elapsed since ``state.t_last``."""
    i_ss = params.gain * state.i_in
    return ExpSum.single(i_ss, state.i_out - i_ss, 1.0 / params.tau)


def _own_rate(params: DpiParams, drive: ExpSum) -> float:
    rate = 1.0 / params.tau
    for _ in range(8):
        if all(abs(r / rate - 1.0) >= _RESONANCE_GAP for r in drive.rates):
            return rate
        rate *= 1.0 + 2 * _RESONANCE_GAP
    return rate


def drive_response(i_out0: float, params: DpiParams, drive: ExpSum) -> ExpSum:
    """Output trajectory of the filter when its input follows ``drive``.

    For an input term ``d exp(-r x)`` the forced response is
    ``gain d / (1 - r tau) exp(-r x)``; the homogeneous term absorbs the
    initial condition.  An input rate that coincides with the filter's own
    rate is resolved by detuning the filter by one part in 10^6.
    """
    g = params.gain
    own = _own_rate(params, drive)
    forced = [(g * d / (1.0 - r / own), r) for d, r in zip(drive.coeffs, drive.rates)]
    i_ss = g * drive.const
    free = i_out0 - i_ss - sum(k for k, _ in forced)
    if free != 0.0:
        forced.append((free, own))
        forced.sort(key=lambda term: term[1])
    return ExpSum(i_ss, tuple(c for c, _ in forced), tuple(r for _, r in forced))


def first_crossing_of(traj: ExpSum, threshold: float) -> Optional[float]:
    """Elapsed time until ``traj`` first rises through ``threshold``."""
    return traj.first_crossing(threshold, UP)
