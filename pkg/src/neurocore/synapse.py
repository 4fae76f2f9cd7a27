"""The 64-block programmable synapse array with leakage cancellation.

Each block has four current branches sharing the array-wide biases
``wht0!``..``wht3!``.  An input event carries a 4-bit branch mask; the
selected branches conduct for one pulse width.  All blocks feed a common
summing node together with the off-state (dark) current of every idle
branch.  A bank of 16 four-branch leak cells, copied 4:1, estimates that
dark current and is subtracted before the shared DPI filter:

    I_wht = max(0, I_signal + I_dark_idle - I_leak)

Branch gating follows an extend-not-stack rule: re-selecting a branch that
is already on pushes its end time out but does not add current.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from . import dpi
from .dpi import DpiParams, DpiState
from .errors import InvalidArgument, TimeReversal
from .params import MismatchModel, mismatch_factors

__all__ = [
    "N_BLOCKS",
    "N_BRANCHES",
    "N_LEAK_CELLS",
    "LEAK_COPY_RATIO",
    "DEVICES_PER_ARRAY",
    "default_synapse_dpi",
    "SynapseArrayConfig",
    "SynapseMismatch",
    "SynapseArrayState",
    "new_array_state",
    "weight_current",
    "total_dark_current",
    "leak_estimate",
    "compensated_current",
    "release",
    "advance_array",
    "apply_input_event",
    "synaptic_output",
]

N_BLOCKS = 64
N_BRANCHES = 4
N_LEAK_CELLS = 16
LEAK_COPY_RATIO = 4
DEVICES_PER_ARRAY = N_BLOCKS * N_BRANCHES + N_LEAK_CELLS * N_BRANCHES


def default_synapse_dpi() -> DpiParams:
    # 1 pF MIMCAP; 5 pA tau bias gives ~7.4 ms, 40 pA thr gives gain 8
    return DpiParams(cap=1e-12, i_tau=5e-12, i_thr=40e-12)


@dataclass(frozen=True)
class SynapseArrayConfig:
    branch_bias: tuple = (10e-9, 0.0, 0.0, 0.0)
    dark_current_nominal: float = 1e-12
    pulse_width: float = 200e-6
    nmda_enabled: bool = False
    nmda_threshold: float = 1e-9
    dpi_params: DpiParams = field(default_factory=default_synapse_dpi)
    n_leak_cells: int = N_LEAK_CELLS
    leak_copy_ratio: int = LEAK_COPY_RATIO

    def __post_init__(self):
        bias = tuple(float(b) for b in self.branch_bias)
        if len(bias) != N_BRANCHES:
            raise InvalidArgument(f"need {N_BRANCHES} branch biases, got {len(bias)}")
        if any(not (b >= 0 and math.isfinite(b)) for b in bias):
            raise InvalidArgument(f"branch biases must be finite and >= 0: {bias}")
        object.__setattr__(self, "branch_bias", bias)
        if not self.pulse_width > 0:
            raise InvalidArgument(f"pulse_width must be > 0, got {self.pulse_width!r}")
        if not self.dark_current_nominal >= 0:
            raise InvalidArgument("dark_current_nominal must be >= 0")
        if not self.nmda_threshold >= 0:
            raise InvalidArgument("nmda_threshold must be >= 0")

    @property
    def n_blocks(self) -> int:
        return N_BLOCKS


@dataclass(frozen=True, eq=False)
class SynapseMismatch:
    """Multiplicative factors for the 256 synapse and 64 leak-cell branches."""

    branch: np.ndarray  # (64, 4)
    leak: np.ndarray  # (16, 4)
    branch_total: float = field(init=False)
    leak_total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "branch_total", math.fsum(self.branch.ravel()))
        object.__setattr__(self, "leak_total", math.fsum(self.leak.ravel()))

    @classmethod
    def matched(cls) -> "SynapseMismatch":
        return cls(np.ones((N_BLOCKS, N_BRANCHES)), np.ones((N_LEAK_CELLS, N_BRANCHES)))

    @classmethod
    def sample(cls, model: MismatchModel, offset: int = 0) -> "SynapseMismatch":
        """Draw factors for devices ``offset .. offset + 319``."""
        f = mismatch_factors(model, np.arange(offset, offset + DEVICES_PER_ARRAY))
        n_syn = N_BLOCKS * N_BRANCHES
        return cls(f[:n_syn].reshape(N_BLOCKS, N_BRANCHES), f[n_syn:].reshape(N_LEAK_CELLS, N_BRANCHES))

    def factor(self, block: int, branch: int) -> float:
        return float(self.branch[block, branch])


@dataclass(frozen=True)
class SynapseArrayState:
    """Branch end times per active block, plus the shared filter.

    ``active`` maps a block id to a 4-tuple of branch end times, ``None``
    for branches that are off.
    """

    dpi: DpiState = field(default_factory=DpiState)
    mismatch: SynapseMismatch = field(default_factory=SynapseMismatch.matched)
    active: Mapping[int, tuple] = field(default_factory=dict)

    @property
    def t(self) -> float:
        return self.dpi.t_last


def new_array_state(mismatch: Optional[SynapseMismatch] = None, t0: float = 0.0) -> SynapseArrayState:
    return SynapseArrayState(
        dpi=DpiState(0.0, t0, 0.0),
        mismatch=SynapseMismatch.matched() if mismatch is None else mismatch,
    )


def _check_block(block_id, branch_mask):
    if not (isinstance(block_id, (int, np.integer)) and 0 <= block_id < N_BLOCKS):
        raise InvalidArgument(f"block id out of range [0, {N_BLOCKS}): {block_id!r}")
    if not (isinstance(branch_mask, (int, np.integer)) and 0 <= branch_mask < 16):
        raise InvalidArgument(f"branch mask out of range [0, 16): {branch_mask!r}")


def weight_current(config: SynapseArrayConfig, mismatch: SynapseMismatch, block_id, branch_mask) -> float:
    """Signal current of one block with the given branches switched on."""
    _check_block(block_id, branch_mask)
    total = 0.0
    for i in range(N_BRANCHES):
        if branch_mask >> i & 1:
            total += config.branch_bias[i] * mismatch.branch[block_id, i]
    return float(total)


def _active_factor_sum(mismatch: SynapseMismatch, active: Mapping[int, tuple]) -> float:
    s = 0.0
    for block in sorted(active):
        for i, end in enumerate(active[block]):
            if end is not None:
                s += mismatch.branch[block, i]
    return float(s)


def total_dark_current(config: SynapseArrayConfig, mismatch: SynapseMismatch, active=None) -> float:
    """Dark current summed over the synapse branches that are not pulsing."""
    total = mismatch.branch_total
    if active:
        total -= _active_factor_sum(mismatch, active)
    return config.dark_current_nominal * total


def leak_estimate(config: SynapseArrayConfig, mismatch: SynapseMismatch) -> float:
    """Replica dark current from the leak cells, scaled by the copy ratio."""
    return config.leak_copy_ratio * (config.dark_current_nominal * mismatch.leak_total)


def compensated_current(config: SynapseArrayConfig, mismatch: SynapseMismatch, active) -> float:
    """``I_wht`` for a given set of conducting branches."""
    signal = 0.0
    for block in sorted(active):
        for i, end in enumerate(active[block]):
            if end is not None:
                signal += config.branch_bias[i] * mismatch.branch[block, i]
    residual = total_dark_current(config, mismatch, active) - leak_estimate(config, mismatch)
    return max(0.0, signal + residual)


def _next_end(active) -> Optional[float]:
    ends = [e for branches in active.values() for e in branches if e is not None]
    return min(ends) if ends else None


def release(state: SynapseArrayState, config: SynapseArrayConfig, t: float) -> SynapseArrayState:
    """Switch off every branch whose pulse ended at or before ``t``.

    Ends are processed in time order so the filter sees each input step at
    the right moment.
    """
    if t < state.dpi.t_last:
        raise TimeReversal(f"synapse array at t={state.dpi.t_last!r} asked for t={t!r}")
    active = state.active
    d = state.dpi
    end = _next_end(active)
    if end is None or end > t:
        return state
    active = dict(active)
    while end is not None and end <= t:
        for block in list(active):
            branches = tuple(None if (e is not None and e <= end) else e for e in active[block])
            if all(e is None for e in branches):
                del active[block]
            else:
                active[block] = branches
        d = dpi.set_input(d, config.dpi_params, max(end, d.t_last), compensated_current(config, state.mismatch, active))
        end = _next_end(active)
    return replace(state, dpi=d, active=active)


def advance_array(state: SynapseArrayState, config: SynapseArrayConfig, t: float) -> SynapseArrayState:
    state = release(state, config, t)
    return replace(state, dpi=dpi.advance(state.dpi, config.dpi_params, t))


def apply_input_event(
    state: SynapseArrayState, config: SynapseArrayConfig, t: float, block_id, branch_mask
) -> SynapseArrayState:
    """Open the masked branches of ``block_id`` for one pulse width from ``t``."""
    _check_block(block_id, branch_mask)
    state = release(state, config, t)
    if branch_mask == 0:
        return replace(state, dpi=dpi.advance(state.dpi, config.dpi_params, t))
    end = t + config.pulse_width
    active = dict(state.active)
    old = active.get(block_id, (None,) * N_BRANCHES)
    active[block_id] = tuple(
        (end if e is None else max(e, end)) if branch_mask >> i & 1 else e for i, e in enumerate(old)
    )
    i_wht = compensated_current(config, state.mismatch, active)
    d = dpi.set_input(state.dpi, config.dpi_params, t, i_wht)
    return replace(state, dpi=d, active=active)


def gate_open(config: SynapseArrayConfig, i_mem: float) -> bool:
    return (not config.nmda_enabled) or i_mem >= config.nmda_threshold


def synaptic_output(state: SynapseArrayState, config: SynapseArrayConfig, t: float, i_mem_of_target: float) -> float:
    """Filtered synaptic current at ``t`` after the NMDA gate."""
    state = release(state, config, t)
    i_syn = dpi.value_at(state.dpi, config.dpi_params, t)
    return i_syn if gate_open(config, i_mem_of_target) else 0.0
