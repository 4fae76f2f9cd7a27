"""Serialisation of experiment results to CSV and JSON."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

from .config import ExperimentSpec, config_hash
from .experiments import FfCurve, MonteCarloResult, ReluCurve, TraceResult

__all__ = ["header", "write_trace", "write_ff", "write_relu", "write_montecarlo", "write_report"]


def header(spec: ExperimentSpec) -> str:
    return f"# config_hash={config_hash(spec)} kind={spec.kind} seed={spec.seed}\n"


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _table(head: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(head)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_trace(spec: ExperimentSpec, tr: TraceResult, out: os.PathLike, fmt: str) -> list[Path]:
    out = Path(out)
    head = header(spec)
    res = tr.result
    summary = res.summary()
    summary.update(
        config_hash=config_hash(spec),
        expected_mean_i_syn=tr.expected_mean_i_syn,
        measured_mean_i_syn=tr.measured_mean_i_syn,
        mean_rel_error=tr.mean_rel_error,
        settle_time=tr.settle_time,
    )
    if fmt == "json":
        doc = {
            "summary": summary,
            "spikes": [{"time": t, "core": c, "neuron": n} for t, c, n in sorted(res.spikes)],
            "time": [float(t) for t in res.trace_times],
            "i_syn": [float(v) for v in res.i_syn()],
            "i_mem": [float(v) for v in res.i_mem()],
        }
        return [_write(out / "trace.json", _dump_json(doc))]
    return [
        _write(out / "trace.csv", res.trace_csv(head)),
        _write(out / "spikes.csv", res.spike_csv(head)),
        _write(out / "summary.json", _dump_json(summary)),
    ]


def _ff_rows(points, factor=None):
    for p in points:
        row = [p.input_rate, p.output_rate, p.spikes, p.window]
        yield row if factor is None else [factor, *row]


def write_ff(spec: ExperimentSpec, curve: FfCurve, out: os.PathLike, fmt: str) -> list[Path]:
    out = Path(out)
    stats = {
        "config_hash": config_hash(spec),
        "monotone": curve.monotone,
        "plateau_hz": curve.plateau,
        "rate_bound_hz": curve.rate_bound,
        "within_bound": curve.within_bound(),
    }
    if fmt == "json":
        stats["points"] = [dict(zip(("input_hz", "output_hz", "spikes", "window_s"), r)) for r in _ff_rows(curve.points)]
        return [_write(out / "ff_curve.json", _dump_json(stats))]
    cols = ["input_hz", "output_hz", "spikes", "window_s"]
    return [
        _write(out / "ff_curve.csv", _table(header(spec), cols, _ff_rows(curve.points))),
        _write(out / "ff_summary.json", _dump_json(stats)),
    ]


def write_relu(spec: ExperimentSpec, rc: ReluCurve, out: os.PathLike, fmt: str) -> list[Path]:
    out = Path(out)
    fits = []
    for g in rc.gain_factors:
        f = rc.fits[g]
        fits.append(
            {
                "gain_factor": g,
                "slope": f.slope,
                "intercept_hz": f.intercept,
                "r_squared": f.r_squared,
                "n_points": f.n,
                "onset_hz": rc.onset(g),
                "slope_ratio": rc.slope_ratio(g),
                "dead_region_hz": rc.dead_region(g),
            }
        )
    if fmt == "json":
        doc = {
            "config_hash": config_hash(spec),
            "fits": fits,
            "curves": {
                repr(g): [dict(zip(("input_hz", "output_hz", "spikes", "window_s"), r)) for r in _ff_rows(rc.curves[g])]
                for g in rc.gain_factors
            },
        }
        return [_write(out / "relu.json", _dump_json(doc))]
    rows = [r for g in rc.gain_factors for r in _ff_rows(rc.curves[g], g)]
    fit_cols = ["gain_factor", "slope", "intercept_hz", "r_squared", "n_points", "onset_hz", "slope_ratio"]
    return [
        _write(out / "relu_curve.csv", _table(header(spec), ["gain_factor", "input_hz", "output_hz", "spikes", "window_s"], rows)),
        _write(out / "relu_fit.csv", _table(header(spec), fit_cols, ([f[c] for c in fit_cols] for f in fits))),
    ]


def write_montecarlo(spec: ExperimentSpec, mc: MonteCarloResult, out: os.PathLike, fmt: str) -> list[Path]:
    out = Path(out)
    summary = mc.summary()
    summary["config_hash"] = config_hash(spec)
    paths = [_write(out / "montecarlo.json", _dump_json(summary))]
    if fmt == "csv":
        rows = ([i, float(r), float(o)] for i, (r, o) in enumerate(zip(mc.residuals, mc.onsets)))
        paths.append(_write(out / "montecarlo.csv", _table(header(spec), ["instance", "residual", "onset_hz"], rows)))
    return paths


def write_report(spec: ExperimentSpec, report: dict, out: os.PathLike, fmt: str) -> list[Path]:
    out = Path(out)
    if fmt == "csv":
        rows = sorted(report.items())
        return [_write(out / "report.csv", _table(header(spec), ["quantity", "value"], rows))]
    doc = dict(report, config_hash=config_hash(spec))
    return [_write(out / "report.json", _dump_json(doc))]
