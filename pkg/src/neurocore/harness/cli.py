"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric fault,
4 failed check.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from typing import Optional, Sequence

from ..aer import read_events
from ..errors import ConfigError, InvalidArgument, MalformedEvent, NumericFault
from . import experiments as ex
from . import output
from .config import config_hash, load_config, preset

log = logging.getLogger("neurocore")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4

_KIND = {
    "trace": "trace",
    "ff-curve": "ff-curve",
    "relu": "relu-curve",
    "montecarlo": "montecarlo",
    "report": "resource-report",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="neurocore", description="Event-driven neuromorphic core experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _KIND:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config layered over the built-in preset")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
        p.add_argument("--check", action="store_true", help="exit 4 if the experiment's checks fail")
        if name in ("ff-curve", "relu"):
            p.add_argument("--jobs", type=int, default=1, help="worker processes for the sweep")
        if name in ("trace", "ff-curve", "relu"):
            p.add_argument("--poisson", action="store_true", help="Poisson instead of periodic input")
        if name == "trace":
            p.add_argument("--stimulus", help="event-stream CSV to use instead of the generated train")
        if name == "report":
            p.add_argument("--neurons", type=int)
            p.add_argument("--blocks", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _spec(args):
    kind = _KIND[args.command]
    spec = load_config(args.config, kind) if args.config else preset(kind)
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"seed out of range: {args.seed}")
        changes["seed"] = args.seed
    if args.format:
        changes["output_format"] = args.format
    if getattr(args, "poisson", False):
        changes["poisson"] = True
    if getattr(args, "neurons", None) is not None:
        changes["neurons"] = args.neurons
    if getattr(args, "blocks", None) is not None:
        changes["blocks"] = args.blocks
    try:
        return replace(spec, **changes)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None


def _run(args) -> int:
    spec = _spec(args)
    fmt = spec.output_format
    log.info("%s config_hash=%s seed=%d", spec.kind, config_hash(spec), spec.seed)
    ok = True
    if spec.kind == "trace":
        stim = None
        if args.stimulus:
            try:
                stim = read_events(args.stimulus)
            except (OSError, MalformedEvent) as exc:
                raise ConfigError(f"stimulus: {exc}", path=args.stimulus) from None
        tr = ex.run_trace(spec, stim)
        paths = output.write_trace(spec, tr, args.out, fmt)
        print(f"spikes={len(tr.result.spikes)} mean_i_syn={tr.measured_mean_i_syn:.6g} A "
              f"expected={tr.expected_mean_i_syn:.6g} A")
        ok = stim is not None or tr.mean_rel_error <= 0.01
    elif spec.kind == "ff-curve":
        curve = ex.run_ff_curve(spec, args.jobs)
        paths = output.write_ff(spec, curve, args.out, fmt)
        for p in curve.points:
            print(f"{p.input_rate:10.1f} Hz -> {p.output_rate:10.3f} Hz")
        ok = curve.monotone and curve.within_bound() and curve.plateau_ok()
    elif spec.kind == "relu-curve":
        rc = ex.run_relu_curve(spec, args.jobs)
        paths = output.write_relu(spec, rc, args.out, fmt)
        for g in rc.gain_factors:
            f = rc.fits[g]
            print(f"gain x{g:g}: slope={f.slope:.6g} intercept={f.intercept:.6g} Hz R2={f.r_squared:.6f}")
        ok = all(rc.fits[g].r_squared >= 0.999 for g in rc.gain_factors)
        ok = ok and all(abs(rc.slope_ratio(g) / (g / rc.gain_factors[0]) - 1) <= 0.02 for g in rc.gain_factors)
    elif spec.kind == "montecarlo":
        mc = ex.run_montecarlo(spec)
        paths = output.write_montecarlo(spec, mc, args.out, fmt)
        print(f"residual std={mc.residual_std:.4%} bound={mc.bound:.4%} over {mc.instances} instances")
        if not mc.within_bound():
            log.error("residual spread exceeds the propagation bound")
            return EXIT_CHECK
    else:
        report = ex.resource_report(spec.neurons, spec.blocks)
        paths = output.write_report(spec, report, args.out, fmt)
        print(f"area={report['total_area_um2']:g} um2 capacitance={report['total_capacitance_pf']:g} pF")
    for p in paths:
        log.info("wrote %s", p)
    if args.check and not ok:
        log.error("checks failed")
        return EXIT_CHECK
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NumericFault as exc:
        log.error("numeric fault: %s", exc)
        return EXIT_NUMERIC
    except InvalidArgument as exc:
        log.error("invalid setting: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
