"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import math
import time
from dataclasses import replace

import numpy as np
from hypothesis import given, settings, strategies as st

from neurocore import aer
from neurocore import neuron as nr
from neurocore import synapse as syn
from neurocore.aer import AerEvent, RouterTable, RouteStats
from neurocore.dpi import DpiParams
from neurocore.engine import CoreConfig, SimConfig, run
from neurocore.harness import experiments as ex
from neurocore.harness import output
from neurocore.harness.config import preset
from neurocore.params import MismatchModel, tau_from_bias
from neurocore.reference import simulate_reference


def test_01_trace_matches_fixed_step(acceptance):
    spec = replace(preset("trace"), duration=0.1)
    events = ex.make_stimulus(spec, spec.rate, spec.duration)
    start = time.perf_counter()
    res = run(ex._sim_config(spec, spec.duration, spec.record_dt), events)
    elapsed = time.perf_counter() - start
    inputs = [(e.timestamp, *aer.decode_input(e.address)[1:3]) for e in events]
    ref = simulate_reference(
        spec.synapse_config(), spec.neuron_config(), inputs, spec.duration, dt=1e-7, sample_times=res.trace_times
    )
    spikes = res.spike_times()
    same_count = len(spikes) == len(ref.spike_times) > 0
    spike_err = float(np.max(np.abs(spikes - ref.spike_times))) if same_count else math.inf
    errs = [
        float(np.max(np.abs(got - want)) / np.max(np.abs(want)))
        for got, want in ((res.i_syn(), ref.i_syn), (res.i_mem(), ref.i_mem))
    ]
    ok = same_count and spike_err <= 1e-6 and max(errs) <= 1e-4 and elapsed < 5.0
    acceptance(
        1,
        "trace vs fixed-step",
        ok,
        f"spikes={len(spikes)}/{len(ref.spike_times)} spike_err={spike_err:.2e}s "
        f"i_syn_err={errs[0]:.2e} i_mem_err={errs[1]:.2e} runtime={elapsed:.2f}s",
    )
    assert ok


def test_02_ff_curve_saturates(acceptance):
    start = time.perf_counter()
    curve = ex.run_ff_curve(preset("ff-curve"))
    elapsed = time.perf_counter() - start
    ok = curve.monotone and curve.within_bound() and curve.plateau_ok(0.01) and elapsed < 10.0
    acceptance(
        2,
        "ff curve",
        ok,
        f"monotone={curve.monotone} plateau={curve.plateau:.2f}Hz bound={curve.rate_bound:.1f}Hz "
        f"max={curve.output_rates.max():.2f}Hz runtime={elapsed:.2f}s",
    )
    assert ok


def test_03_relu_gain(acceptance):
    rc = ex.run_relu_curve(preset("relu-curve"))
    lo, hi = rc.gain_factors
    r2 = min(f.r_squared for f in rc.fits.values())
    ratio = rc.slope_ratio(hi)
    dead = all(rc.dead_region(g) for g in rc.gain_factors)
    ok = dead and r2 >= 0.999 and abs(ratio / (hi / lo) - 1.0) <= 0.02
    acceptance(
        3,
        "relu transfer",
        ok,
        f"dead_region={dead} min_r2={r2:.6f} slopes={rc.fits[lo].slope:.4f},{rc.fits[hi].slope:.4f} "
        f"ratio={ratio:.4f}",
    )
    assert ok


def _isi_oracle(i_ss, i_ref, tau, t_ref):
    return 1.0 / (t_ref + tau * math.log(i_ss / (i_ss - i_ref)))


ISI_CASES = [
    (40e-9, 20e-9, 5e-3, 5e-3),
    (40e-9, 20e-9, 5e-3, 0.0),
    (25e-9, 20e-9, 5e-3, 2e-3),
    (100e-9, 20e-9, 5e-3, 1e-3),
    (40e-9, 10e-9, 1e-3, 5e-3),
    (21e-9, 20e-9, 2e-3, 1e-3),
    (60e-9, 30e-9, 10e-3, 2e-3),
    (5e-9, 1e-9, 0.5e-3, 0.2e-3),
    (200e-9, 150e-9, 20e-3, 10e-3),
    (1e-9, 0.5e-9, 50e-3, 0.0),
    (80e-9, 79e-9, 1e-3, 1e-3),
]


def test_04_isi_oracle(acceptance):
    worst = 0.0
    for i_ss, i_ref, tau, t_ref in ISI_CASES:
        cfg = nr.NeuronConfig(
            mem_dpi=DpiParams.from_tau(tau, gain=1.0, cap=1.5e-12),
            i_ref=i_ref,
            t_ref=t_ref,
            ahp_pulse_amp=0.0,
            i_const=i_ss,
        )
        want = _isi_oracle(i_ss, i_ref, tau, t_ref)
        res = run(SimConfig(t_end=12.0 / want, cores=(CoreConfig(neuron=cfg),)))
        times = res.spike_times()
        # the first interval starts from rest without a refractory period
        got = (len(times) - 2) / (times[-1] - times[1])
        worst = max(worst, abs(got / want - 1.0))
    headline = _isi_oracle(40e-9, 20e-9, 5e-3, 5e-3)
    ok = worst <= 1e-3 and abs(headline / 118.13 - 1) <= 1e-3 and abs(headline - 118.1232) < 5e-5
    acceptance(4, "ISI oracle", ok, f"cases={len(ISI_CASES)} worst_rel_err={worst:.2e} headline={headline:.4f}Hz")
    assert ok


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**63 - 1), st.integers(0, 10_000), st.floats(1e-14, 1e-9))
def _zero_sigma_exact(seed, instance, dark):
    cfg = syn.SynapseArrayConfig(dark_current_nominal=dark)
    mm = syn.SynapseMismatch.sample(MismatchModel(0.0, seed), instance * syn.DEVICES_PER_ARRAY)
    assert syn.leak_estimate(cfg, mm) - syn.total_dark_current(cfg, mm) == 0.0


def test_05_leak_compensation(acceptance):
    _zero_sigma_exact()
    zero = ex.run_montecarlo(replace(preset("montecarlo"), sigma=0.0))
    zero_exact = bool(np.all(zero.residuals == 0.0))
    start = time.perf_counter()
    mc = ex.run_montecarlo(preset("montecarlo"))
    elapsed = time.perf_counter() - start
    ok = zero_exact and mc.residual_std < 0.009 and len(mc.residuals) == 1000 and elapsed < 5.0
    acceptance(
        5,
        "leak compensation",
        ok,
        f"sigma0_exact={zero_exact} std={mc.residual_std:.4%} N={len(mc.residuals)} runtime={elapsed:.2f}s",
    )
    assert ok


def _synapse_run(cfg, events, samples):
    state = syn.new_array_state()
    out = []
    queue = sorted([(t, 0, b, m) for t, b, m in events] + [(t, 1, 0, 0) for t in samples])
    for t, kind, b, m in queue:
        if kind == 0:
            state = syn.apply_input_event(state, cfg, t, b, m)
        else:
            state = syn.advance_array(state, cfg, t)
            out.append(state.dpi.i_out)
    return np.array(out)


def test_06_superposition(acceptance):
    rng = np.random.default_rng(2024)
    cfg = syn.SynapseArrayConfig(branch_bias=(1e-9, 2e-9, 4e-9, 8e-9))
    samples = np.linspace(0.0, 0.05, 101)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(64, 200))
        events = list(
            zip(
                rng.uniform(0.0, 0.04, n).tolist(),
                rng.integers(0, 64, n).tolist(),
                rng.integers(1, 16, n).tolist(),
            )
        )
        events[:64] = [(t, b, m) for b, (t, _, m) in enumerate(events[:64])]  # every block fires
        combined = _synapse_run(cfg, events, samples)
        parts = sum(_synapse_run(cfg, [e for e in events if e[1] == b], samples) for b in range(64))
        worst = max(worst, float(np.max(np.abs(combined - parts)) / np.max(np.abs(combined))))
    ok = worst <= 1e-9
    acceptance(6, "superposition", ok, f"schedules=20 blocks=64 worst_rel_err={worst:.2e}")
    assert ok


def test_07_time_constant(acceptance):
    tau = tau_from_bias(1e-12, 5e-12)
    scaled = [tau_from_bias(1e-12 * 10.0**k, 5e-12) / (tau * 10.0**k) - 1.0 for k in range(5)]
    inverse = [tau_from_bias(1e-12, 5e-12 * 10.0**k) * 10.0**k / tau - 1.0 for k in range(5)]
    worst = max(abs(x) for x in scaled + inverse)
    ok = abs(tau - 7.386e-3) < 5e-7 and worst <= 1e-14
    acceptance(7, "time constant", ok, f"tau={tau * 1e3:.4f}ms scaling_err={worst:.1e}")
    assert ok


def test_08_aer(acceptance):
    seen = set()
    for core in range(256):
        for block in range(64):
            for mask in range(16):
                w = aer.encode_input(core, block, mask)
                seen.add(w)
                assert aer.decode_input(w)[:3] == (core, block, mask)
    bijective = len(seen) == 2**18

    rng = np.random.default_rng(77)
    routes = {
        (c, n): tuple(
            aer.encode_input(int(rng.integers(0, 4)), int(rng.integers(0, 64)), int(rng.integers(1, 16)))
            for _ in range(int(rng.integers(0, 4)))
        )
        for c in range(4)
        for n in range(16)
    }
    table = RouterTable(routes)
    stats = RouteStats()
    expected = 0
    causal = True
    for t, s in zip(np.sort(rng.uniform(0.0, 1.0, 100_000)).tolist(), rng.integers(0, 64, 100_000).tolist()):
        src = divmod(s, 16)
        out = aer.route(AerEvent(t, aer.encode_output(*src)), table, 100e-9, stats)
        expected += len(routes[src])
        causal &= all(e.timestamp > t for e in out)
    conserved = stats.routed == 100_000 and stats.delivered == expected
    ok = bijective and conserved and causal
    acceptance(
        8, "AER", ok, f"bijective={bijective} routed={stats.routed} delivered={stats.delivered} causal={causal}"
    )
    assert ok


def _scenarios():
    ff = replace(preset("ff-curve"), rates=(0.0, 300.0, 1000.0), duration=0.5, max_duration=1.0)
    relu = replace(preset("relu-curve"), rates=(0.0, 1000.0, 2000.0, 3000.0), duration=0.2, max_duration=0.4)
    mc = replace(preset("montecarlo"), instances=200)
    trace = replace(preset("trace"), duration=0.2, mismatch_sigma=0.05)
    return [
        ("trace", lambda d, f: output.write_trace(trace, ex.run_trace(trace), d, f)),
        ("ff", lambda d, f: output.write_ff(ff, ex.run_ff_curve(ff), d, f)),
        ("relu", lambda d, f: output.write_relu(relu, ex.run_relu_curve(relu), d, f)),
        ("montecarlo", lambda d, f: output.write_montecarlo(mc, ex.run_montecarlo(mc), d, f)),
        ("report", lambda d, f: output.write_report(preset("resource-report"), ex.resource_report(256, 64), d, f)),
    ]


def test_09_determinism(acceptance, tmp_path):
    files = 0
    mismatched = []
    for name, write in _scenarios():
        for fmt in ("csv", "json"):
            a = write(tmp_path / name / fmt / "a", fmt)
            b = write(tmp_path / name / fmt / "b", fmt)
            for pa, pb in zip(a, b):
                files += 1
                if pa.read_bytes() != pb.read_bytes():
                    mismatched.append(f"{name}/{fmt}/{pa.name}")
    ok = files > 0 and not mismatched
    acceptance(9, "determinism", ok, f"files={files} mismatched={mismatched or 'none'}")
    assert ok


def test_10_resource_report(acceptance):
    one = ex.resource_report(1, 64)["total_area_um2"]
    full = ex.resource_report(256, 64)["total_area_um2"]
    ok = one == 237.0 and full == 60672.0
    acceptance(10, "resource report", ok, f"1x64={one:g}um2 256x64={full:g}um2")
    assert ok
