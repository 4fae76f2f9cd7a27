"""The experiment runners behind the CLI subcommands.

Rates are measured from inter-spike intervals: with ``n`` spikes after the
warm-up, the rate is ``(n - 1) / (t_last - t_first)``.  For a periodic
output this is exact, and it can never exceed ``1 / t_ref``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .. import synapse as syn
from ..aer import encode_input
from ..engine import CoreConfig, SimConfig, SimResult, Simulation, run
from ..errors import InvalidArgument
from ..params import MismatchModel, mismatch_factors
from .config import ExperimentSpec
from .stimulus import periodic_train, poisson_train

__all__ = [
    "LinearFit",
    "linear_fit",
    "RatePoint",
    "measure_rate",
    "isi_rate",
    "TraceResult",
    "run_trace",
    "FfCurve",
    "run_ff_curve",
    "ReluCurve",
    "run_relu_curve",
    "MonteCarloResult",
    "run_montecarlo",
    "ResourceModel",
    "resource_report",
]


@dataclass(frozen=True)
class LinearFit:
    """Ordinary least squares ``y = slope x + intercept``.

    ``r_squared = 1 - SS_res / SS_tot`` with ``SS_res`` the sum of squared
    residuals and ``SS_tot`` the sum of squared deviations of ``y`` from its
    mean.
    """

    slope: float
    intercept: float
    r_squared: float
    residuals: tuple
    n: int


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.size != y.size:
        raise InvalidArgument("need at least two (x, y) pairs of equal length")
    res = stats.linregress(x, y)
    resid = y - (res.slope * x + res.intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(res.slope), float(res.intercept), r2, tuple(float(r) for r in resid), int(x.size))


# -- stimulus and rate measurement ----------------------------------------------


def _address(spec: ExperimentSpec) -> int:
    return encode_input(0, spec.block, spec.mask)


def make_stimulus(spec: ExperimentSpec, rate: float, t_end: float, stream: int = 0):
    if spec.poisson:
        return poisson_train(rate, t_end, _address(spec), spec.seed, stream)
    return periodic_train(rate, t_end, _address(spec))


def _sim_config(spec: ExperimentSpec, t_end: float, record_dt: Optional[float] = None) -> SimConfig:
    core = CoreConfig(synapses=spec.synapse_config(), neuron=spec.neuron_config())
    return SimConfig(
        t_end=t_end, cores=(core,), record_dt=record_dt, seed=spec.seed, mismatch_sigma=spec.mismatch_sigma
    )


def isi_rate(times: Sequence[float], window: float) -> float:
    """``(n - 1) / span`` for two or more spikes, else ``n / window``."""
    n = len(times)
    if n >= 2:
        return (n - 1) / (times[-1] - times[0])
    return n / window if window > 0 else 0.0


@dataclass(frozen=True)
class RatePoint:
    input_rate: float
    output_rate: float
    spikes: int
    window: float


def measure_rate(spec: ExperimentSpec, rate: float) -> RatePoint:
    """Steady-state output rate for one input rate.

    The run starts at ``spec.duration`` and is extended in steps of the same
    length until at least ``min_spikes`` spikes fall after the warm-up or
    ``max_duration`` is reached.
    """
    warm = spec.resolved_warmup()
    cap = max(spec.duration, spec.max_duration or spec.duration)
    if cap <= warm:
        raise InvalidArgument(f"duration {cap!r} does not exceed the warm-up {warm!r}")
    stream = int(round(rate * 1000))
    sim = Simulation(_sim_config(spec, cap), make_stimulus(spec, rate, cap, stream))
    t = spec.duration
    sim.run_until(t)
    while True:
        times = [s for s, _, _ in sim.spikes if s >= warm]
        if len(times) >= spec.min_spikes or t >= cap:
            break
        t = min(cap, t + spec.duration)
        sim.run_until(t)
    return RatePoint(float(rate), isi_rate(times, t - warm), len(times), t - warm)


def _sweep(spec: ExperimentSpec, jobs: int = 1) -> list[RatePoint]:
    if jobs > 1 and len(spec.rates) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(measure_rate, [spec] * len(spec.rates), spec.rates))
    return [measure_rate(spec, r) for r in spec.rates]


# -- trace ------------------------------------------------------------------------


@dataclass
class TraceResult:
    result: SimResult
    expected_mean_i_syn: float
    measured_mean_i_syn: float
    settle_time: float

    @property
    def mean_rel_error(self) -> float:
        if self.expected_mean_i_syn == 0:
            return abs(self.measured_mean_i_syn)
        return abs(self.measured_mean_i_syn / self.expected_mean_i_syn - 1.0)


def run_trace(spec: ExperimentSpec, stimulus=None) -> TraceResult:
    """Sampled I_syn / I_mem traces and spikes for one stimulus.

    Also compares the mean synaptic output after 20 filter time constants
    with ``gain * rate * pulse_width * I_w``.
    """
    record_dt = spec.record_dt or 100e-6
    if stimulus is None:
        stimulus = make_stimulus(spec, spec.rate, spec.duration)
    result = run(_sim_config(spec, spec.duration, record_dt), stimulus)
    sc = spec.synapse_config()
    i_w = sum(b for i, b in enumerate(sc.branch_bias) if spec.mask >> i & 1)
    expected = sc.dpi_params.gain * spec.rate * spec.pulse_width * i_w
    settle = 20.0 * sc.dpi_params.tau
    sel = result.trace_times >= settle
    i_syn = result.i_syn()
    measured = float(i_syn[sel].mean()) if sel.any() else math.nan
    return TraceResult(result, expected, measured, settle)


# -- ff curve -----------------------------------------------------------------------


@dataclass
class FfCurve:
    points: list
    rate_bound: float

    @property
    def input_rates(self) -> np.ndarray:
        return np.array([p.input_rate for p in self.points])

    @property
    def output_rates(self) -> np.ndarray:
        return np.array([p.output_rate for p in self.points])

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.output_rates) >= 0))

    @property
    def plateau(self) -> float:
        """Mean of the two highest-input points."""
        return float(self.output_rates[-2:].mean())

    def plateau_ok(self, rel: float = 0.01) -> bool:
        return abs(self.plateau / self.rate_bound - 1.0) <= rel

    def within_bound(self) -> bool:
        return bool(np.all(self.output_rates <= self.rate_bound))


def run_ff_curve(spec: ExperimentSpec, jobs: int = 1) -> FfCurve:
    t_ref = spec.neuron_config().t_ref
    bound = 1.0 / t_ref if t_ref > 0 else math.inf
    return FfCurve(_sweep(spec, jobs), bound)


# -- relu curve ---------------------------------------------------------------------


@dataclass
class ReluCurve:
    gain_factors: tuple
    curves: dict = field(default_factory=dict)  # factor -> list[RatePoint]
    fits: dict = field(default_factory=dict)  # factor -> LinearFit
    rate_bound: float = math.inf

    def slope_ratio(self, factor: float) -> float:
        return self.fits[factor].slope / self.fits[self.gain_factors[0]].slope

    def dead_region(self, factor: float) -> list:
        """Input rates with zero output."""
        return [p.input_rate for p in self.curves[factor] if p.output_rate == 0.0]

    def onset(self, factor: float) -> float:
        fit = self.fits[factor]
        return -fit.intercept / fit.slope


def linear_region(points: Sequence[RatePoint], upper: float) -> list:
    return [p for p in points if 0.0 < p.output_rate <= upper]


def run_relu_curve(spec: ExperimentSpec, jobs: int = 1) -> ReluCurve:
    """Transfer curve and linear fit, repeated for scaled ``dpi_thr!``."""
    t_ref = spec.neuron_config().t_ref
    bound = 1.0 / t_ref if t_ref > 0 else math.inf
    out = ReluCurve(spec.gain_factors, rate_bound=bound)
    base = spec.biases["dpi_thr!"]
    for g in spec.gain_factors:
        points = _sweep(spec.with_biases(**{"dpi_thr!": base * g}), jobs)
        out.curves[g] = points
        region = linear_region(points, spec.fit_max_fraction * bound)
        if len(region) < 2:
            raise InvalidArgument(f"gain factor {g}: fewer than two points in the linear region")
        out.fits[g] = linear_fit([p.input_rate for p in region], [p.output_rate for p in region])
    return out


# -- Monte Carlo ---------------------------------------------------------------------


@dataclass
class MonteCarloResult:
    sigma: float
    instances: int
    residuals: np.ndarray
    onsets: np.ndarray
    analytic_std: float

    @property
    def residual_mean(self) -> float:
        return float(self.residuals.mean())

    @property
    def residual_std(self) -> float:
        return float(self.residuals.std(ddof=1))

    @property
    def bound(self) -> float:
        # analytic propagation plus 25% slack for a finite sample
        return 1.25 * self.analytic_std

    def within_bound(self) -> bool:
        return self.residual_std <= self.bound

    def summary(self) -> dict:
        finite = self.onsets[np.isfinite(self.onsets)]
        return {
            "sigma": self.sigma,
            "instances": self.instances,
            "residual_mean": self.residual_mean,
            "residual_std": self.residual_std,
            "residual_min": float(self.residuals.min()),
            "residual_max": float(self.residuals.max()),
            "analytic_std": self.analytic_std,
            "bound": self.bound,
            "within_bound": self.within_bound(),
            "onset_mean_hz": float(finite.mean()) if finite.size else None,
            "onset_std_hz": float(finite.std(ddof=1)) if finite.size > 1 else None,
            "onset_min_hz": float(finite.min()) if finite.size else None,
            "onset_max_hz": float(finite.max()) if finite.size else None,
        }


def run_montecarlo(spec: ExperimentSpec) -> MonteCarloResult:
    """Leak-cancellation residual and ff onset over mismatch instances.

    Instance ``i`` uses devices ``i * 320 .. i * 320 + 319``, the same
    layout the engine uses for a neuron's array.  The onset is the input
    rate at which the mean drive brings the steady membrane current to
    ``I_ref``.
    """
    sc = spec.synapse_config()
    nc = spec.neuron_config()
    n = spec.instances
    n_syn = syn.N_BLOCKS * syn.N_BRANCHES
    model = MismatchModel(spec.sigma, spec.seed)
    f = mismatch_factors(model, np.arange(n * syn.DEVICES_PER_ARRAY)).reshape(n, syn.DEVICES_PER_ARRAY)
    branch, leak = f[:, :n_syn], f[:, n_syn:]
    dark = sc.dark_current_nominal * branch.sum(axis=1)
    estimate = sc.leak_copy_ratio * (sc.dark_current_nominal * leak.sum(axis=1))
    if sc.dark_current_nominal > 0:
        residuals = (estimate - dark) / dark
    else:
        residuals = np.zeros(n)

    idle = np.maximum(0.0, dark - estimate)
    cols = [spec.block * syn.N_BRANCHES + i for i in range(syn.N_BRANCHES) if spec.mask >> i & 1]
    step = sum((sc.branch_bias[c % syn.N_BRANCHES] - sc.dark_current_nominal) * branch[:, c] for c in cols)
    target = (nc.i_ref / nc.mem_dpi.gain - nc.i_const) / sc.dpi_params.gain
    with np.errstate(divide="ignore", invalid="ignore"):
        onsets = np.where(step > 0, (target - idle) / (spec.pulse_width * step), np.inf)
    onsets = np.maximum(onsets, 0.0)

    n_leak = sc.n_leak_cells * syn.N_BRANCHES
    # the common exp(sigma^2 / 2) scale of a median-one lognormal cancels in the ratio
    sd = math.sqrt(math.expm1(spec.sigma**2)) if spec.sigma > 0 else 0.0
    analytic = sd * math.sqrt(n_syn + sc.leak_copy_ratio**2 * n_leak) / n_syn
    return MonteCarloResult(spec.sigma, n, residuals, onsets, analytic)


# -- resources -------------------------------------------------------------------------


@dataclass(frozen=True)
class ResourceModel:
    """Layout areas in µm² and capacitances in farads."""

    synapse_block_area: float = 3.0
    dpi_area: float = 12.5
    neuron_area: float = 20.0
    dpi_cap: float = 1e-12
    neuron_cap: float = 1.5e-12

    def __post_init__(self):
        if min(self.synapse_block_area, self.dpi_area, self.neuron_area, self.dpi_cap, self.neuron_cap) <= 0:
            raise InvalidArgument("resource constants must be positive")


def resource_report(n_neurons: int, n_blocks: int, model: ResourceModel = ResourceModel()) -> dict:
    """Area and capacitance of ``n_neurons`` neurons with ``n_blocks`` synapse blocks each.

    Each neuron is counted with two DPIs: its membrane filter and the
    synapse filter it shares with its blocks.
    """
    if n_neurons < 0 or n_blocks < 0:
        raise InvalidArgument("counts must be >= 0")
    neuron_part = n_neurons * (model.neuron_area + 2 * model.dpi_area)
    synapse_part = n_neurons * n_blocks * model.synapse_block_area
    area = neuron_part + synapse_part
    # same structure as the area: the neuron's own cap plus one per DPI
    cap = n_neurons * (model.neuron_cap + 2 * model.dpi_cap)
    return {
        "n_neurons": n_neurons,
        "n_blocks_per_neuron": n_blocks,
        "neuron_area_um2": neuron_part,
        "synapse_area_um2": synapse_part,
        "total_area_um2": area,
        "total_area_mm2": area * 1e-6,
        "total_capacitance_f": cap,
        "total_capacitance_pf": cap * 1e12,
    }
