"""Deterministic discrete-event simulation kernel.

A single heap orders every event by ``(time, kind, core, neuron,
sequence)``.  Kinds sharing a timestamp are handled in the order of
:class:`Kind`: pulse ends first, then the AHP pulse ends, input spikes,
routed deliveries, predicted threshold crossings, refractory ends and
finally trace samples.

Every neuron carries a prediction generation.  Whenever anything that can
move its spike time happens (a pulse edge, an AHP change, a spike, the end
of a refractory period) the generation is bumped and a fresh crossing is
queued; crossings carrying an older generation are discarded when popped.
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from . import neuron as nr
from . import synapse as syn
from .aer import AerEvent, RouterTable, RouteStats, decode_input, encode_output, route
from .errors import InvalidArgument, NumericFault, TimeReversal
from .params import MismatchModel

__all__ = [
    "Kind",
    "CoreConfig",
    "SimConfig",
    "SimResult",
    "Simulation",
    "run",
]


class Kind(enum.IntEnum):
    PULSE_END = 0
    AHP_PULSE_END = 1
    INPUT_SPIKE = 2
    ROUTED_DELIVERY = 3
    PREDICTED_CROSSING = 4
    REFRACTORY_END = 5
    RECORD_SAMPLE = 6


@dataclass(frozen=True)
class CoreConfig:
    """One core: ``n_neurons`` neurons, each with its own 64-block array."""

    synapses: syn.SynapseArrayConfig = field(default_factory=syn.SynapseArrayConfig)
    neuron: nr.NeuronConfig = field(default_factory=nr.NeuronConfig)
    n_neurons: int = 1

    def __post_init__(self):
        if not 1 <= self.n_neurons <= 64:
            raise InvalidArgument(f"n_neurons must be in [1, 64], got {self.n_neurons!r}")


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    cores: tuple = (CoreConfig(),)
    record_dt: Optional[float] = None
    seed: int = 0
    mismatch_sigma: float = 0.0
    router: RouterTable = field(default_factory=RouterTable)
    hs_latency: float = 100e-9

    def __post_init__(self):
        if not self.t_end > 0:
            raise InvalidArgument(f"t_end must be > 0, got {self.t_end!r}")
        if self.record_dt is not None and not self.record_dt > 0:
            raise InvalidArgument(f"record_dt must be > 0, got {self.record_dt!r}")
        if not self.hs_latency >= 0:
            raise InvalidArgument("hs_latency must be >= 0")
        object.__setattr__(self, "cores", tuple(self.cores))
        if not 1 <= len(self.cores) <= 256:
            raise InvalidArgument("need between 1 and 256 cores")


@dataclass
class SimResult:
    """Spikes, sampled traces and counters of one run."""

    spikes: list = field(default_factory=list)  # (time, core, neuron)
    trace_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    traces: dict = field(default_factory=dict)  # (core, neuron) -> (i_syn, i_mem)
    output_events: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    t_end: float = 0.0

    def spike_times(self, core: int = 0, neuron: int = 0) -> np.ndarray:
        return np.array([t for t, c, n in self.spikes if c == core and n == neuron])

    def i_syn(self, core: int = 0, neuron: int = 0) -> np.ndarray:
        return self.traces[(core, neuron)][0]

    def i_mem(self, core: int = 0, neuron: int = 0) -> np.ndarray:
        return self.traces[(core, neuron)][1]

    def trace_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        if header:
            buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "entity", "i_syn", "i_mem"])
        for k, t in enumerate(self.trace_times):
            for (c, n), (s, m) in sorted(self.traces.items()):
                w.writerow([repr(float(t)), f"c{c}n{n}", repr(float(s[k])), repr(float(m[k]))])
        return buf.getvalue()

    def spike_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        if header:
            buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "core", "neuron"])
        for t, c, n in sorted(self.spikes):
            w.writerow([repr(t), c, n])
        return buf.getvalue()

    def summary(self) -> dict:
        per = {}
        for (c, n) in sorted(self.traces) or sorted({(c, n) for _, c, n in self.spikes}):
            per[f"c{c}n{n}"] = len(self.spike_times(c, n))
        rates = {k: v / self.t_end for k, v in per.items()} if self.t_end > 0 else {}
        return {"t_end": self.t_end, "spike_counts": per, "mean_rates_hz": rates, "counters": dict(self.counters)}

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


class _Unit:
    """Synapse array plus neuron, with its prediction generation."""

    __slots__ = ("core", "index", "syn_cfg", "nrn_cfg", "syn", "nrn", "generation", "address", "name")

    def __init__(self, core, index, core_cfg: CoreConfig, mismatch: syn.SynapseMismatch):
        self.core = core
        self.index = index
        self.syn_cfg = core_cfg.synapses
        self.nrn_cfg = core_cfg.neuron
        self.syn = syn.new_array_state(mismatch)
        self.nrn = nr.new_neuron_state()
        self.generation = 0
        self.address = encode_output(core, index)
        self.name = f"c{core}n{index}"

    def synaptic_input(self) -> nr.SynapticInput:
        cfg = self.syn_cfg
        return nr.SynapticInput(self.syn.dpi, cfg.dpi_params, cfg.nmda_threshold if cfg.nmda_enabled else None)

    def sync(self, t: float):
        if t < self.nrn.t:
            raise TimeReversal(f"{self.name}: event at t={t!r} but state is at t={self.nrn.t!r}")
        self.nrn = nr.advance(self.nrn, self.nrn_cfg, t, self.synaptic_input())
        self.syn = syn.advance_array(self.syn, self.syn_cfg, t)

    def check(self, t: float):
        values = (self.nrn.mem.i_out, self.nrn.ahp.i_out, self.syn.dpi.i_out)
        if not all(math.isfinite(v) for v in values):
            raise NumericFault(self.name, t, f"i_mem={values[0]!r} i_ahp={values[1]!r} i_syn={values[2]!r}")


class Simulation:
    """Event loop over a set of cores.

    ``stimulus`` is an iterable of input :class:`AerEvent`; lists are sorted
    here, lazy iterables must already be in timestamp order.  The loop can
    be resumed with a later horizon via :meth:`run_until`.
    """

    def __init__(self, config: SimConfig, stimulus: Iterable[AerEvent] = ()):
        self.config = config
        model = MismatchModel(config.mismatch_sigma, config.seed)
        self.units: dict[tuple, _Unit] = {}
        for c, core_cfg in enumerate(config.cores):
            for n in range(core_cfg.n_neurons):
                offset = (c * 64 + n) * syn.DEVICES_PER_ARRAY
                self.units[(c, n)] = _Unit(c, n, core_cfg, syn.SynapseMismatch.sample(model, offset))
        if isinstance(stimulus, (list, tuple)):
            stimulus = sorted(stimulus, key=lambda e: e.timestamp)
        self._stim: Iterator[AerEvent] = iter(stimulus)
        self._next_stim: Optional[AerEvent] = next(self._stim, None)
        self._last_stim_t = -math.inf
        self._heap: list = []
        self._seq = 0
        self.now = 0.0
        self.horizon = 0.0
        self.spikes: list = []
        self.output_events: list = []
        self.route_stats = RouteStats()
        self.counters = {k.name.lower(): 0 for k in Kind}
        self.counters.update(stale_predictions=0, fires=0, dropped_inputs=0, pulse_starts=0)
        self._times: list = []
        self._trace: dict = {key: ([], []) for key in self.units}
        if config.record_dt is not None:
            self._record_k = 0
            self._push(0.0, Kind.RECORD_SAMPLE, 0, 0, None)
        # constant injection can make a unit fire before any event reaches it
        for u in self.units.values():
            self._repredict(u)

    # -- queue ---------------------------------------------------------------

    def _push(self, t, kind, core, neuron, payload):
        self._seq += 1
        heapq.heappush(self._heap, (t, int(kind), core, neuron, self._seq, payload))

    def _feed_stimulus(self):
        top = self._heap[0][0] if self._heap else math.inf
        while self._next_stim is not None and self._next_stim.timestamp <= top:
            ev = self._next_stim
            if ev.timestamp < self._last_stim_t:
                raise InvalidArgument("stimulus iterable is not sorted by timestamp")
            self._last_stim_t = ev.timestamp
            self._push_input(ev, Kind.INPUT_SPIKE)
            self._next_stim = next(self._stim, None)
            top = self._heap[0][0] if self._heap else math.inf

    def _push_input(self, ev: AerEvent, kind: Kind):
        core, block, mask, neuron = decode_input(ev.address)
        if (core, neuron) not in self.units:
            self.counters["dropped_inputs"] += 1
            return
        self._push(ev.timestamp, kind, core, neuron, (block, mask))

    def _repredict(self, u: _Unit):
        u.generation += 1
        t_sp = nr.schedule_spike(u.nrn, u.nrn_cfg, u.synaptic_input())
        if t_sp is not None:
            self._push(t_sp, Kind.PREDICTED_CROSSING, u.core, u.index, u.generation)

    # -- main loop -------------------------------------------------------------

    def run_until(self, t_end: float) -> "Simulation":
        if t_end < self.horizon:
            raise TimeReversal(f"horizon {t_end!r} is before {self.horizon!r}")
        self.horizon = t_end
        heap = self._heap
        while True:
            self._feed_stimulus()
            if not heap or heap[0][0] > t_end:
                break
            t, kind, core, neuron, _, payload = heapq.heappop(heap)
            self.now = t
            self._dispatch(t, kind, core, neuron, payload)
        for u in self.units.values():
            u.sync(t_end)
            u.check(t_end)
        self.now = t_end
        return self

    def _dispatch(self, t, kind, core, neuron, payload):
        counters = self.counters
        if kind == Kind.RECORD_SAMPLE:
            counters["record_sample"] += 1
            self._record(t)
            return
        u = self.units[(core, neuron)]
        if kind == Kind.PREDICTED_CROSSING:
            if payload != u.generation:
                counters["stale_predictions"] += 1
                return
            counters["predicted_crossing"] += 1
            u.sync(t)
            self._fire(u, t)
        elif kind == Kind.INPUT_SPIKE or kind == Kind.ROUTED_DELIVERY:
            counters[Kind(kind).name.lower()] += 1
            u.sync(t)
            block, mask = payload
            u.syn = syn.apply_input_event(u.syn, u.syn_cfg, t, block, mask)
            if mask:
                counters["pulse_starts"] += 1
                self._push(t + u.syn_cfg.pulse_width, Kind.PULSE_END, core, neuron, block)
        elif kind == Kind.PULSE_END:
            counters["pulse_end"] += 1
            u.sync(t)
        elif kind == Kind.AHP_PULSE_END:
            counters["ahp_pulse_end"] += 1
            u.sync(t)
            u.nrn = nr.end_ahp_pulse(u.nrn, u.nrn_cfg, t)
        elif kind == Kind.REFRACTORY_END:
            counters["refractory_end"] += 1
            u.sync(t)
        u.check(t)
        self._repredict(u)

    def _fire(self, u: _Unit, t: float):
        u.nrn, out = nr.fire(u.nrn, u.nrn_cfg, t, u.address)
        self.counters["fires"] += 1
        self.spikes.append((t, u.core, u.index))
        self.output_events.append(out)
        cfg = u.nrn_cfg
        self._push(t + cfg.t_ref, Kind.REFRACTORY_END, u.core, u.index, None)
        self._push(t + cfg.ahp_pulse_width, Kind.AHP_PULSE_END, u.core, u.index, None)
        for ev in route(out, self.config.router, self.config.hs_latency, self.route_stats):
            self._push_input(ev, Kind.ROUTED_DELIVERY)

    def _record(self, t: float):
        self._times.append(t)
        for key, u in self.units.items():
            u.sync(t)
            u.check(t)
            s = u.syn.dpi.i_out
            trace = self._trace[key]
            trace[0].append(s)
            trace[1].append(u.nrn.mem.i_out)
        self._record_k += 1
        self._push(self._record_k * self.config.record_dt, Kind.RECORD_SAMPLE, 0, 0, None)

    def result(self) -> SimResult:
        counters = dict(self.counters)
        counters.update(
            routed=self.route_stats.routed,
            delivered=self.route_stats.delivered,
            route_drops=self.route_stats.dropped,
            events_processed=sum(self.counters[k.name.lower()] for k in Kind) + self.counters["stale_predictions"],
        )
        traces = {k: (np.array(v[0]), np.array(v[1])) for k, v in self._trace.items()}
        return SimResult(
            spikes=list(self.spikes),
            trace_times=np.array(self._times),
            traces=traces,
            output_events=list(self.output_events),
            counters=counters,
            t_end=self.horizon,
        )


def run(config: SimConfig, stimulus: Iterable[AerEvent] = ()) -> SimResult:
    """Simulate from 0 to ``config.t_end`` and collect the results."""
    return Simulation(config, stimulus).run_until(config.t_end).result()
