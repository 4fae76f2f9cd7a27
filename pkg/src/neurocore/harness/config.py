"""Experiment specifications and the INI-style config format.

A config file overrides a built-in preset.  Recognised sections::

    [experiment]  kind
    [biases]      wht0! .. wht3!, dpi_tau!, dpi_thr!, nrn_tau!, nrn_thr!,
                  ahp_tau!, ahp_thr!, ahp_amp, ahp_width, I_ref, t_ref,
                  I_const, I_dark, nmda_thr
    [stimulus]    rate, rates, pulse_width, duration, warmup, block, mask,
                  poisson
    [engine]      record_dt, seed, mismatch_sigma
    [analysis]    min_spikes, max_duration, gain_factors, fit_max_fraction,
                  instances, sigma, neurons, blocks
    [output]      format

Currents are written either as a literal with SI prefix (``10nA``,
``40 pA``, ``1.5e-9``) or as a ``coarse:fine`` bias-generator code
(``2:96``).  Times take an ``s`` unit (``200us``), rates ``Hz``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from ..dpi import DpiParams
from ..errors import ConfigError, InvalidArgument
from ..neuron import NeuronConfig
from ..params import BiasCode, bias_from_tau, decode_bias
from ..synapse import SynapseArrayConfig

__all__ = [
    "KINDS",
    "ExperimentSpec",
    "preset",
    "load_config",
    "parse_config",
    "parse_quantity",
    "config_hash",
]

KINDS = ("trace", "ff-curve", "relu-curve", "montecarlo", "resource-report")

SYN_CAP = 1e-12
MEM_CAP = 1.5e-12
AHP_CAP = 1e-12

# canonical name -> unit
BIAS_KEYS = {
    "wht0!": "A",
    "wht1!": "A",
    "wht2!": "A",
    "wht3!": "A",
    "dpi_tau!": "A",
    "dpi_thr!": "A",
    "nrn_tau!": "A",
    "nrn_thr!": "A",
    "ahp_tau!": "A",
    "ahp_thr!": "A",
    "ahp_amp": "A",
    "ahp_width": "s",
    "I_ref": "A",
    "t_ref": "s",
    "I_const": "A",
    "I_dark": "A",
    "nmda_thr": "A",
}

_PREFIX = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3, "": 1.0, "k": 1e3, "M": 1e6}
_QUANTITY = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([fpnuµmkM]?)(A|s|Hz)?$")
_CODE = re.compile(r"^(\d+)\s*:\s*(\d+)$")


def parse_quantity(text: str, unit: str) -> float:
    """``'200us'`` -> 2e-4.  Bare numbers are taken in base units."""
    text = text.strip()
    if unit == "A":
        code = _CODE.match(text)
        if code:
            return float(decode_bias(BiasCode(int(code.group(1)), int(code.group(2)))))
    m = _QUANTITY.match(text)
    if not m:
        raise ValueError(f"cannot parse {text!r} as a quantity in {unit}")
    number, prefix, found = m.groups()
    if found is None and prefix:
        # a lone 'm' or 'k' without unit is ambiguous
        raise ValueError(f"prefix without unit in {text!r}")
    if found is not None and found != unit:
        raise ValueError(f"expected unit {unit}, got {found} in {text!r}")
    value = float(number) * _PREFIX[prefix]
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _base_biases() -> dict:
    ahp_tau = bias_from_tau(AHP_CAP, 0.1)
    return {
        "wht0!": 10e-9,
        "wht1!": 0.0,
        "wht2!": 0.0,
        "wht3!": 0.0,
        "dpi_tau!": 5e-12,
        "dpi_thr!": 40e-12,
        "nrn_tau!": 5e-12,
        "nrn_thr!": 100e-12,
        "ahp_tau!": ahp_tau,
        "ahp_thr!": 2.0 * ahp_tau,
        "ahp_amp": 1e-9,
        "ahp_width": 1e-3,
        "I_ref": 20e-9,
        "t_ref": 2e-3,
        "I_const": 0.0,
        "I_dark": 1e-12,
        "nmda_thr": 0.0,
    }


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment run."""

    kind: str
    biases: dict = field(default_factory=_base_biases)
    rate: float = 100.0
    rates: tuple = ()
    pulse_width: float = 200e-6
    duration: float = 0.5
    warmup: Optional[float] = None
    block: int = 0
    mask: int = 1
    poisson: bool = False
    record_dt: Optional[float] = 100e-6
    seed: int = 0
    mismatch_sigma: float = 0.0
    min_spikes: int = 50
    max_duration: Optional[float] = None
    gain_factors: tuple = (1.0, 2.0)
    fit_max_fraction: float = 0.5
    instances: int = 1000
    sigma: float = 0.05
    neurons: int = 1
    blocks: int = 64
    output_format: str = "csv"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown experiment kind {self.kind!r}")
        unknown = set(self.biases) - set(BIAS_KEYS)
        if unknown:
            raise InvalidArgument(f"unknown bias names: {sorted(unknown)}")
        object.__setattr__(self, "biases", {k: float(self.biases[k]) for k in BIAS_KEYS if k in self.biases})
        rates = tuple(float(r) for r in self.rates)
        if self.kind in ("ff-curve", "relu-curve"):
            if not rates:
                raise InvalidArgument("rate sweep must not be empty")
            if list(rates) != sorted(rates) or rates[0] < 0:
                raise InvalidArgument("rate sweep must be sorted and >= 0")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "gain_factors", tuple(float(g) for g in self.gain_factors))
        if not self.rate >= 0:
            raise InvalidArgument("rate must be >= 0")
        if not self.duration > 0:
            raise InvalidArgument("duration must be > 0")
        if self.kind == "montecarlo" and self.instances < 100:
            raise InvalidArgument(f"montecarlo needs at least 100 instances, got {self.instances}")
        if self.neurons < 0 or self.blocks < 0:
            raise InvalidArgument("resource counts must be >= 0")
        if self.output_format not in ("csv", "json"):
            raise InvalidArgument(f"format must be csv or json, got {self.output_format!r}")

    # -- derived circuit configs ---------------------------------------------

    def synapse_config(self) -> SynapseArrayConfig:
        b = self.biases
        nmda = b["nmda_thr"]
        return SynapseArrayConfig(
            branch_bias=(b["wht0!"], b["wht1!"], b["wht2!"], b["wht3!"]),
            dark_current_nominal=b["I_dark"],
            pulse_width=self.pulse_width,
            nmda_enabled=nmda > 0,
            nmda_threshold=nmda if nmda > 0 else 1e-9,
            dpi_params=DpiParams(SYN_CAP, b["dpi_tau!"], b["dpi_thr!"]),
        )

    def neuron_config(self) -> NeuronConfig:
        b = self.biases
        return NeuronConfig(
            mem_dpi=DpiParams(MEM_CAP, b["nrn_tau!"], b["nrn_thr!"]),
            i_ref=b["I_ref"],
            t_ref=b["t_ref"],
            ahp_dpi=DpiParams(AHP_CAP, b["ahp_tau!"], b["ahp_thr!"]),
            ahp_pulse_width=b["ahp_width"],
            ahp_pulse_amp=b["ahp_amp"],
            i_const=b["I_const"],
        )

    def with_biases(self, **changes) -> "ExperimentSpec":
        biases = dict(self.biases)
        for key, value in changes.items():
            biases[_canonical_bias(key)] = value
        return replace(self, biases=biases)

    def resolved_warmup(self) -> float:
        if self.warmup is not None:
            return self.warmup
        taus = (self.synapse_config().dpi_params.tau, self.neuron_config().mem_dpi.tau)
        return 10.0 * max(taus)

    def canonical(self) -> dict:
        return dataclasses.asdict(self)


def _canonical_bias(name: str) -> str:
    for key in BIAS_KEYS:
        if key.lower() == name.lower():
            return key
    raise KeyError(name)


def preset(kind: str) -> ExperimentSpec:
    """Default spec for each experiment kind."""
    if kind == "trace":
        return ExperimentSpec(kind, rate=100.0, pulse_width=200e-6, duration=0.5, record_dt=100e-6)
    if kind == "ff-curve":
        i_tau = bias_from_tau(MEM_CAP, 0.1e-3)
        spec = ExperimentSpec(
            kind,
            rates=tuple(range(0, 1001, 100)),
            pulse_width=1e-3,
            duration=3.0,
            max_duration=6.0,
            record_dt=None,
        )
        return spec.with_biases(**{"nrn_tau!": i_tau, "nrn_thr!": 0.75 * i_tau, "t_ref": 5e-3, "ahp_amp": 0.0})
    if kind == "relu-curve":
        i_tau = bias_from_tau(MEM_CAP, 5e-3)
        spec = ExperimentSpec(
            kind,
            rates=(0, 200, 500, 1000, 2000, 3000, 4000, 5000),
            pulse_width=50e-6,
            duration=0.5,
            max_duration=1.0,
            record_dt=None,
        )
        return spec.with_biases(**{"nrn_tau!": i_tau, "nrn_thr!": 12.5 * i_tau, "t_ref": 1e-6, "ahp_amp": 0.0})
    if kind == "montecarlo":
        ff = preset("ff-curve")
        return replace(ff, kind=kind, rates=(), instances=1000, sigma=0.05)
    if kind == "resource-report":
        return ExperimentSpec(kind, neurons=1, blocks=64, record_dt=None)
    raise InvalidArgument(f"unknown experiment kind {kind!r}")


# -- file parsing ---------------------------------------------------------------

_SECTIONS = {
    "experiment": {"kind"},
    "biases": None,
    "stimulus": {"rate", "rates", "pulse_width", "duration", "warmup", "block", "mask", "poisson"},
    "engine": {"record_dt", "seed", "mismatch_sigma"},
    "analysis": {
        "min_spikes", "max_duration", "gain_factors", "fit_max_fraction",
        "instances", "sigma", "neurons", "blocks",
    },
    "output": {"format"},
}


def _line_index(text: str) -> dict:
    """(section, key) -> 1-based line number, both lower-cased."""
    index = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            index[(section, None)] = lineno
        elif "=" in line and section is not None:
            index[(section, line.split("=", 1)[0].strip().lower())] = lineno
    return index


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str, unit: str) -> tuple:
    return tuple(parse_quantity(p, unit) for p in text.split(",") if p.strip())


def _optional_time(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none", "auto") else parse_quantity(text, "s")


_FIELD_PARSERS = {
    ("stimulus", "rate"): ("rate", lambda v: parse_quantity(v, "Hz")),
    ("stimulus", "rates"): ("rates", lambda v: _list(v, "Hz")),
    ("stimulus", "pulse_width"): ("pulse_width", lambda v: parse_quantity(v, "s")),
    ("stimulus", "duration"): ("duration", lambda v: parse_quantity(v, "s")),
    ("stimulus", "warmup"): ("warmup", _optional_time),
    ("stimulus", "block"): ("block", lambda v: int(v, 0)),
    ("stimulus", "mask"): ("mask", lambda v: int(v, 0)),
    ("stimulus", "poisson"): ("poisson", _bool),
    ("engine", "record_dt"): ("record_dt", _optional_time),
    ("engine", "seed"): ("seed", lambda v: int(v, 0)),
    ("engine", "mismatch_sigma"): ("mismatch_sigma", float),
    ("analysis", "min_spikes"): ("min_spikes", int),
    ("analysis", "max_duration"): ("max_duration", _optional_time),
    ("analysis", "gain_factors"): ("gain_factors", lambda v: tuple(float(p) for p in v.split(",") if p.strip())),
    ("analysis", "fit_max_fraction"): ("fit_max_fraction", float),
    ("analysis", "instances"): ("instances", int),
    ("analysis", "sigma"): ("sigma", float),
    ("analysis", "neurons"): ("neurons", int),
    ("analysis", "blocks"): ("blocks", int),
    ("output", "format"): ("output_format", lambda v: v.strip().lower()),
}


def parse_config(text: str, kind: Optional[str] = None, path: Optional[str] = None) -> ExperimentSpec:
    """Build a spec from config ``text`` layered over the preset for ``kind``."""
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=path or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any section", exc.lineno, path) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", lineno, path) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, path) from None
    lines = _line_index(text)

    sections = {s.lower(): s for s in parser.sections()}
    for low, name in sections.items():
        if low not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]", lines.get((low, None)), path)

    file_kind = None
    if "experiment" in sections:
        exp = parser[sections["experiment"]]
        for key in exp:
            if key.lower() != "kind":
                raise ConfigError(f"unknown key {key!r} in [experiment]", lines.get(("experiment", key.lower())), path)
        if "kind" in exp:
            file_kind = exp["kind"].strip()
    if kind is not None and file_kind is not None and file_kind != kind:
        raise ConfigError(
            f"config is for {file_kind!r} but {kind!r} was requested", lines.get(("experiment", "kind")), path
        )
    kind = kind or file_kind
    if kind is None:
        raise ConfigError("experiment kind not given", None, path)
    try:
        spec = preset(kind)
    except InvalidArgument as exc:
        raise ConfigError(str(exc), lines.get(("experiment", "kind")), path) from None

    biases = dict(spec.biases)
    changes = {}
    for low, name in sections.items():
        if low == "experiment":
            continue
        for key, value in parser[name].items():
            lineno = lines.get((low, key.lower()))
            try:
                if low == "biases":
                    try:
                        canon = _canonical_bias(key)
                    except KeyError:
                        raise ConfigError(f"unknown bias {key!r}", lineno, path) from None
                    amps = parse_quantity(value, BIAS_KEYS[canon])
                    if amps < 0:
                        raise ValueError(f"{canon} must be >= 0")
                    biases[canon] = amps
                else:
                    entry = _FIELD_PARSERS.get((low, key.lower()))
                    if entry is None:
                        raise ConfigError(f"unknown key {key!r} in [{name}]", lineno, path)
                    attr, conv = entry
                    changes[attr] = conv(value)
            except (ValueError, InvalidArgument) as exc:
                raise ConfigError(f"{key}: {exc}", lineno, path) from None
    try:
        spec = replace(spec, biases=biases, **changes)
        spec.synapse_config()
        spec.neuron_config()
    except (InvalidArgument, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(str(exc), None, path) from None
    return spec


def load_config(path: Union[str, os.PathLike], kind: Optional[str] = None) -> ExperimentSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, kind, str(path))


def config_hash(spec: ExperimentSpec) -> str:
    """Short stable digest of the fully resolved spec."""
    blob = json.dumps(spec.canonical(), sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
