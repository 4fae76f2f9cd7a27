"""Current-mode integrate-and-fire neuron.

The membrane current ``I_mem`` is the output of a DPI (the LEAK block)
whose input is the effective drive

    I_eff = max(0, g_nmda * I_syn + I_const - I_ahp)

where ``I_syn`` is the output of the shared synaptic filter, ``I_ahp`` the
output of a second DPI pulsed once per spike, and ``g_nmda`` the optional
NMDA gate (open while ``I_mem`` is at or above its threshold).  When
``I_mem`` reaches ``I_ref`` the neuron fires: the membrane is reset to zero
and held there for ``t_ref``.

Between external events every quantity is a sum of decaying exponentials,
so the evolution is computed in closed form.  It is split into segments
wherever the clamp on ``I_eff`` engages or releases, the NMDA gate flips,
the refractory period ends, or the AHP pulse ends.  A segment never
contains a change of input to the synaptic filter; callers must pass the
synaptic state valid over the whole interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from . import dpi
from .aer import AerEvent
from .dpi import DpiParams, DpiState
from .errors import ContractViolation, InvalidArgument, TimeReversal
from .expsum import DOWN, UP, ExpSum

__all__ = [
    "NeuronConfig",
    "NeuronState",
    "SynapticInput",
    "FIRE_TOLERANCE",
    "default_membrane_dpi",
    "default_ahp_dpi",
    "new_neuron_state",
    "effective_input",
    "advance",
    "schedule_spike",
    "fire",
    "end_ahp_pulse",
    "membrane_current",
    "steady_rate_oracle",
]

FIRE_TOLERANCE = 1e-15  # amperes
_MODE_TOL = 1e-9  # relative band in which a mode is decided by the derivative
_MAX_SEGMENTS = 10_000


def default_membrane_dpi() -> DpiParams:
    # 1.5 pF membrane; 5 pA tau bias gives ~11 ms, gain 20
    return DpiParams(cap=1.5e-12, i_tau=5e-12, i_thr=100e-12)


def default_ahp_dpi() -> DpiParams:
    return DpiParams.from_tau(0.1, gain=2.0, cap=1e-12)


@dataclass(frozen=True)
class NeuronConfig:
    mem_dpi: DpiParams = field(default_factory=default_membrane_dpi)
    i_ref: float = 20e-9
    t_ref: float = 2e-3
    ahp_dpi: DpiParams = field(default_factory=default_ahp_dpi)
    ahp_pulse_width: float = 1e-3
    ahp_pulse_amp: float = 1e-9
    i_const: float = 0.0

    def __post_init__(self):
        if not self.i_ref > 0:
            raise InvalidArgument(f"i_ref must be > 0, got {self.i_ref!r}")
        if not self.t_ref >= 0:
            raise InvalidArgument(f"t_ref must be >= 0, got {self.t_ref!r}")
        if not (self.ahp_pulse_amp >= 0 and self.i_const >= 0):
            raise InvalidArgument("currents must be >= 0")
        if not self.ahp_pulse_width > 0:
            raise InvalidArgument("ahp_pulse_width must be > 0")

    @property
    def ahp_enabled(self) -> bool:
        return self.ahp_pulse_amp > 0


@dataclass(frozen=True)
class NeuronState:
    mem: DpiState = field(default_factory=DpiState)
    ahp: DpiState = field(default_factory=DpiState)
    refractory_until: Optional[float] = None
    ahp_pulse_end: Optional[float] = None
    spike_count: int = 0
    last_spike_time: Optional[float] = None
    # last decided modes, used only to break ties at exact boundaries
    clamped: bool = True
    gate_open: bool = False

    @property
    def t(self) -> float:
        return self.mem.t_last

    def in_refractory(self, t: float) -> bool:
        return self.refractory_until is not None and t < self.refractory_until


def new_neuron_state(t0: float = 0.0) -> NeuronState:
    return NeuronState(mem=DpiState(0.0, t0, 0.0), ahp=DpiState(0.0, t0, 0.0))


@dataclass(frozen=True)
class SynapticInput:
    """The synaptic filter seen by a neuron over an event-free interval.

    ``nmda_threshold`` is ``None`` when the gate is disabled.
    """

    state: DpiState
    params: DpiParams
    nmda_threshold: Optional[float] = None

    def trajectory_at(self, t: float) -> ExpSum:
        return dpi.trajectory(dpi.advance(self.state, self.params, t), self.params)


def effective_input(state: NeuronState, config: NeuronConfig, i_syn: float) -> float:
    if i_syn < 0:
        raise InvalidArgument(f"i_syn must be >= 0, got {i_syn!r}")
    return max(0.0, i_syn + config.i_const - state.ahp.i_out)


def _decide(value, slope, scale, previous) -> bool:
    """True when ``value`` is on (or heading to) the positive side."""
    if abs(value) > _MODE_TOL * scale:
        return value > 0
    if slope != 0:
        return slope > 0
    return previous


@dataclass
class _Segment:
    t0: float
    a: ExpSum
    m: ExpSum
    drive: ExpSum
    refractory: bool
    clamped: bool
    gate: bool
    end: float
    end_kind: Optional[str]
    spike: Optional[float]


def _segment(state: NeuronState, config: NeuronConfig, syn: Optional[SynapticInput], t0: float, want_spike: bool) -> _Segment:
    s = syn.trajectory_at(t0) if syn is not None else ExpSum()
    a = dpi.trajectory(state.ahp, config.ahp_dpi)
    m0 = state.mem.i_out

    end, kind = math.inf, None
    if state.in_refractory(t0):
        end, kind = state.refractory_until, "refractory-end"
    if state.ahp_pulse_end is not None and state.ahp_pulse_end > t0 and state.ahp_pulse_end < end:
        end, kind = state.ahp_pulse_end, "ahp-pulse-end"

    if state.in_refractory(t0):
        return _Segment(t0, a, ExpSum(), ExpSum(), True, state.clamped, state.gate_open, end, kind, None)

    mp = config.mem_dpi
    c = config.i_const
    nmda = syn.nmda_threshold if syn is not None else None
    if nmda is None:
        gate = True
    else:
        d_open = s(0.0) + c - a(0.0)
        slope = (mp.gain * max(d_open, 0.0) - m0) / mp.tau
        gate = _decide(m0 - nmda, slope, max(nmda, m0, 1e-30), state.gate_open)
    drive = (s if gate else ExpSum()) + ExpSum(c) - a
    scale = abs(s(0.0)) + c + abs(a(0.0)) + 1e-30
    clamped = not _decide(drive(0.0), drive.derivative(0.0), scale, not state.clamped)

    if clamped:
        m = ExpSum.single(0.0, m0, 1.0 / mp.tau)
    else:
        m = dpi.drive_response(m0, mp, drive)

    span = end - t0 if end < math.inf else None

    def horizon(f: ExpSum):
        h = f.default_horizon()
        return h if span is None else min(span, h) if h > 0 else span

    # clamp flips
    if clamped:
        if drive.upper_bound(horizon(drive)) > 0:
            x = drive.first_crossing(0.0, UP, horizon(drive))
            if x is not None and t0 + x < end:
                end, kind = t0 + x, "clamp"
    elif drive.lower_bound(horizon(drive)) <= 0:
        x = drive.first_crossing(0.0, DOWN, horizon(drive))
        if x is not None and t0 + x < end:
            end, kind = t0 + x, "clamp"
    # gate flips
    if nmda is not None:
        if gate and m.lower_bound(horizon(m)) < nmda:
            x = m.first_crossing(nmda, DOWN, horizon(m))
        elif not gate and m.upper_bound(horizon(m)) >= nmda:
            x = m.first_crossing(nmda, UP, horizon(m))
        else:
            x = None
        if x is not None and t0 + x < end:
            end, kind = t0 + x, "gate"
    spike = None
    if want_spike and not clamped:
        if m0 >= config.i_ref:
            spike = t0
        elif m.upper_bound(horizon(m)) >= config.i_ref:
            x = m.first_crossing(config.i_ref, UP, horizon(m))
            if x is not None and t0 + x <= end:
                spike = t0 + x
    return _Segment(t0, a, m, drive, False, clamped, gate, end, kind, spike)


def _evaluate(seg: _Segment, state: NeuronState, config: NeuronConfig, t: float) -> NeuronState:
    x = t - seg.t0
    if seg.refractory:
        mem = DpiState(0.0, t, 0.0)
    else:
        # at the segment origin the summed terms only reproduce m0 up to rounding
        m = state.mem.i_out if x == 0 else max(0.0, seg.m(x))
        drive = 0.0 if seg.clamped else max(0.0, seg.drive(x))
        mem = DpiState(m, t, drive)
    ahp = dpi.advance(state.ahp, config.ahp_dpi, t)
    return replace(state, mem=mem, ahp=ahp, clamped=seg.clamped, gate_open=seg.gate)


def _apply_boundary(seg: _Segment, state: NeuronState) -> NeuronState:
    if seg.end_kind == "refractory-end":
        return replace(state, refractory_until=None)
    if seg.end_kind == "ahp-pulse-end":
        return replace(state, ahp=DpiState(state.ahp.i_out, state.ahp.t_last, 0.0), ahp_pulse_end=None)
    if seg.end_kind == "clamp":
        return replace(state, clamped=not seg.clamped)
    if seg.end_kind == "gate":
        return replace(state, gate_open=not seg.gate)
    return state


def advance(state: NeuronState, config: NeuronConfig, t: float, syn: Optional[SynapticInput] = None) -> NeuronState:
    """Exact neuron state at ``t`` assuming no spike is due before ``t``.

    A spike that would have happened earlier is not emitted here; the
    membrane simply keeps integrating and :func:`schedule_spike` will then
    report it as due immediately.
    """
    if t < state.t:
        raise TimeReversal(f"neuron at t={state.t!r} asked for t={t!r}")
    for _ in range(_MAX_SEGMENTS):
        seg = _segment(state, config, syn, state.t, want_spike=False)
        if seg.end > t:
            return _evaluate(seg, state, config, t)
        state = _apply_boundary(seg, _evaluate(seg, state, config, seg.end))
    raise ContractViolation(f"neuron evolution did not settle before t={t!r}")


def schedule_spike(
    state: NeuronState, config: NeuronConfig, syn: Optional[SynapticInput] = None, horizon: float = math.inf
) -> Optional[float]:
    """Predicted time of the next spike if no further input arrives."""
    limit = state.t + horizon
    for _ in range(_MAX_SEGMENTS):
        seg = _segment(state, config, syn, state.t, want_spike=True)
        if seg.spike is not None:
            return seg.spike if seg.spike <= limit else None
        if seg.end == math.inf or seg.end > limit:
            return None
        state = _apply_boundary(seg, _evaluate(seg, state, config, seg.end))
    raise ContractViolation("spike prediction did not settle")


def membrane_current(state: NeuronState, config: NeuronConfig, t: float, syn: Optional[SynapticInput] = None) -> float:
    return advance(state, config, t, syn).mem.i_out


def fire(state: NeuronState, config: NeuronConfig, t: float, address: int = 0) -> tuple[NeuronState, AerEvent]:
    """Reset the membrane, start the refractory period and pulse the AHP."""
    if t != state.t:
        raise ContractViolation(f"fire at t={t!r} but neuron is at t={state.t!r}")
    if state.in_refractory(t):
        raise ContractViolation(f"fire at t={t!r} inside refractory period")
    if state.mem.i_out < config.i_ref - FIRE_TOLERANCE:
        raise ContractViolation(
            f"fire at t={t!r} with I_mem={state.mem.i_out!r} below I_ref={config.i_ref!r}"
        )
    ahp = state.ahp
    ahp_end = state.ahp_pulse_end
    if config.ahp_enabled:
        ahp = dpi.set_input(ahp, config.ahp_dpi, t, config.ahp_pulse_amp)
        end = t + config.ahp_pulse_width
        ahp_end = end if ahp_end is None else max(ahp_end, end)
    new = replace(
        state,
        mem=DpiState(0.0, t, 0.0),
        ahp=ahp,
        ahp_pulse_end=ahp_end,
        refractory_until=t + config.t_ref,
        spike_count=state.spike_count + 1,
        last_spike_time=t,
        clamped=True,
    )
    return new, AerEvent(t, address)


def end_ahp_pulse(state: NeuronState, config: NeuronConfig, t: float, syn: Optional[SynapticInput] = None) -> NeuronState:
    """Handle an AHP pulse-end event; a no-op if the pulse was extended."""
    state = advance(state, config, t, syn)
    if state.ahp_pulse_end is not None and state.ahp_pulse_end <= t:
        state = replace(state, ahp=DpiState(state.ahp.i_out, t, 0.0), ahp_pulse_end=None)
    return state


def steady_rate_oracle(config: NeuronConfig, i_drive: float) -> float:
    """Firing rate under constant drive with adaptation switched off.

    ``1 / (t_ref + tau ln(I_ss / (I_ss - I_ref)))`` with ``I_ss = gain I_drive``.
    """
    i_ss = config.mem_dpi.gain * i_drive
    if i_ss <= config.i_ref:
        return 0.0
    return 1.0 / (config.t_ref + config.mem_dpi.tau * math.log(i_ss / (i_ss - config.i_ref)))
