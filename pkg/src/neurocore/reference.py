"""Fixed-step exponential-Euler reference for a single synapse array + neuron.

This is the brute-force counterpart of the event-driven engine and is used
only to check it.  It shares the circuit definitions (bias values, the
compensated-current rule of the synapse array) but none of the closed-form
machinery: each filter is stepped with

    x(t + h) = x_inf + (x(t) - x_inf) exp(-h / tau)

where the membrane's ``x_inf`` is frozen at the start of every step.
Steps are shortened so that pulse edges, refractory ends and sample times
fall exactly on step boundaries; a threshold crossing inside a step is
located by linear interpolation.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import neuron as nr
from . import synapse as syn

__all__ = ["ReferenceResult", "simulate_reference"]


@dataclass
class ReferenceResult:
    spike_times: np.ndarray
    sample_times: np.ndarray
    i_syn: np.ndarray
    i_mem: np.ndarray


def simulate_reference(
    syn_cfg: syn.SynapseArrayConfig,
    nrn_cfg: nr.NeuronConfig,
    inputs: Sequence[tuple],
    t_end: float,
    dt: float = 1e-7,
    sample_times: Sequence[float] = (),
    mismatch: Optional[syn.SynapseMismatch] = None,
) -> ReferenceResult:
    """Integrate one neuron driven by ``inputs`` = [(time, block, mask), ...]."""
    mismatch = syn.SynapseMismatch.matched() if mismatch is None else mismatch
    gs, taus = syn_cfg.dpi_params.gain, syn_cfg.dpi_params.tau
    gm, taum = nrn_cfg.mem_dpi.gain, nrn_cfg.mem_dpi.tau
    ga, taua = nrn_cfg.ahp_dpi.gain, nrn_cfg.ahp_dpi.tau
    i_ref, c = nrn_cfg.i_ref, nrn_cfg.i_const
    nmda = syn_cfg.nmda_threshold if syn_cfg.nmda_enabled else None
    ds_full, dm_full, da_full = math.exp(-dt / taus), math.exp(-dt / taum), math.exp(-dt / taua)

    inputs = sorted(inputs)
    samples = sorted(sample_times)
    # (time, order, payload); order mirrors the engine's tie-break
    bps: list = []
    for k, (t, block, mask) in enumerate(inputs):
        heapq.heappush(bps, (t, 2, k, ("in", block, mask)))
    for k, t in enumerate(samples):
        heapq.heappush(bps, (t, 6, k, ("rec",)))
    seq = len(inputs) + len(samples)

    active: dict = {}
    s = s_in = a = a_in = m = 0.0
    refractory = False
    ahp_end = None
    t = 0.0
    spikes, rec_s, rec_m = [], [], []

    def current():
        return syn.compensated_current(syn_cfg, mismatch, active)

    while True:
        # all breakpoints at the current time
        while bps and bps[0][0] <= t:
            _, _, _, what = heapq.heappop(bps)
            kind = what[0]
            if kind == "in":
                _, block, mask = what
                if mask:
                    end = t + syn_cfg.pulse_width
                    old = active.get(block, (None,) * 4)
                    active[block] = tuple(
                        (end if e is None else max(e, end)) if mask >> i & 1 else e for i, e in enumerate(old)
                    )
                    seq += 1
                    heapq.heappush(bps, (end, 0, seq, ("end",)))
                    s_in = current()
            elif kind == "end":
                for block in list(active):
                    br = tuple(None if (e is not None and e <= t) else e for e in active[block])
                    if all(e is None for e in br):
                        del active[block]
                    else:
                        active[block] = br
                s_in = current()
            elif kind == "ref":
                refractory = False
            elif kind == "ahp":
                if ahp_end is not None and ahp_end <= t:
                    a_in, ahp_end = 0.0, None
            elif kind == "rec":
                rec_s.append(s)
                rec_m.append(m)
        if t >= t_end:
            break
        nxt = min(bps[0][0] if bps else math.inf, t_end)
        if nxt - t <= dt:
            h, t_new = nxt - t, nxt
            ds, dm, da = math.exp(-h / taus), math.exp(-h / taum), math.exp(-h / taua)
        else:
            h, t_new = dt, t + dt
            ds, dm, da = ds_full, dm_full, da_full
        s_ss, a_ss = gs * s_in, ga * a_in
        s_new = s_ss + (s - s_ss) * ds
        a_new = a_ss + (a - a_ss) * da
        if refractory:
            m_new = 0.0
        else:
            gate = nmda is None or m >= nmda
            drive = (s if gate else 0.0) + c - a
            m_ss = gm * drive if drive > 0 else 0.0
            m_new = m_ss + (m - m_ss) * dm
        if not refractory and m_new >= i_ref:
            frac = (i_ref - m) / (m_new - m) if m_new != m else 0.0
            hs = frac * h
            t_sp = t + hs
            s = s_ss + (s - s_ss) * math.exp(-hs / taus)
            a = a_ss + (a - a_ss) * math.exp(-hs / taua)
            m = 0.0
            t = t_sp
            spikes.append(t_sp)
            refractory = True
            seq += 1
            heapq.heappush(bps, (t_sp + nrn_cfg.t_ref, 5, seq, ("ref",)))
            if nrn_cfg.ahp_enabled:
                a_in = nrn_cfg.ahp_pulse_amp
                end = t_sp + nrn_cfg.ahp_pulse_width
                ahp_end = end if ahp_end is None else max(ahp_end, end)
                seq += 1
                heapq.heappush(bps, (end, 1, seq, ("ahp",)))
            continue
        s, a, m = s_new, a_new, max(m_new, 0.0)
        t = t_new
    return ReferenceResult(np.array(spikes), np.array(samples), np.array(rec_s), np.array(rec_m))
