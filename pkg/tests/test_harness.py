import json
from dataclasses import replace

import numpy as np
import pytest

from neurocore.errors import ConfigError, NumericFault
from neurocore.harness import cli, experiments as ex
from neurocore.harness.config import config_hash, load_config, parse_config, parse_quantity, preset
from neurocore.harness.stimulus import periodic_train, poisson_train


@pytest.mark.parametrize(
    "text,unit,value",
    [
        ("10nA", "A", 10e-9),
        ("40 pA", "A", 40e-12),
        ("1.5e-9", "A", 1.5e-9),
        ("2:96", "A", 2.88e-9),
        ("0:64", "A", 30e-12),
        ("200us", "s", 200e-6),
        ("5ms", "s", 5e-3),
        ("1kHz", "Hz", 1000.0),
        ("0", "Hz", 0.0),
    ],
)
def test_parse_quantity(text, unit, value):
    assert parse_quantity(text, unit) == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize("text,unit", [("10nS", "A"), ("abc", "A"), ("5m", "s"), ("2:96", "s"), ("1:200", "A")])
def test_parse_quantity_rejects(text, unit):
    with pytest.raises(ValueError):
        parse_quantity(text, unit)


def test_linear_fit_three_point_fixture():
    fit = ex.linear_fit([0, 1, 2], [1, 3, 4])
    assert fit.slope == pytest.approx(1.5, rel=1e-12)
    assert fit.intercept == pytest.approx(7 / 6, rel=1e-12)
    assert fit.r_squared == pytest.approx(27 / 28, rel=1e-12)
    assert fit.r_squared == pytest.approx(0.964286, abs=1e-6)
    assert fit.residuals == pytest.approx((-1 / 6, 1 / 3, -1 / 6), abs=1e-12)


@pytest.mark.parametrize(
    "n,b,area",
    [(1, 64, 237.0), (0, 0, 0.0), (256, 64, 60672.0), (3, 0, 135.0)],
)
def test_resource_report(n, b, area):
    rep = ex.resource_report(n, b)
    assert rep["total_area_um2"] == area
    assert rep["total_capacitance_pf"] == pytest.approx(n * 3.5, rel=1e-12)


def test_resource_mm2():
    assert ex.resource_report(256, 64)["total_area_mm2"] == pytest.approx(0.0607, abs=1e-4)


CONFIG = """\
# default trace with a weaker synapse
[experiment]
kind = trace

[biases]
wht0! = 5nA
dpi_thr! = 0:96
I_ref = 15 nA

[stimulus]
rate = 50Hz
pulse_width = 100us
duration = 0.2s

[engine]
seed = 42
"""


def test_config_overrides_preset():
    spec = parse_config(CONFIG)
    assert spec.kind == "trace"
    assert spec.biases["wht0!"] == pytest.approx(5e-9)
    assert spec.biases["dpi_thr!"] == pytest.approx(45e-12)
    assert spec.biases["I_ref"] == pytest.approx(15e-9)
    assert spec.rate == 50.0 and spec.pulse_width == pytest.approx(100e-6)
    assert spec.seed == 42
    # untouched values come from the preset
    assert spec.biases["dpi_tau!"] == preset("trace").biases["dpi_tau!"]
    assert spec.synapse_config().dpi_params.gain == pytest.approx(9.0)


@pytest.mark.parametrize(
    "text,line",
    [
        ("[biases]\nwht0! = 10nA\nbogus! = 1nA\n", 3),
        ("[biases]\nwht0! = 10 parsecs\n", 2),
        ("[stimulus]\nrate = 10Hz\n\n[nonsense]\nx = 1\n", 4),
        ("[stimulus]\nrate = 10Hz\nrate = 20Hz\n", 3),
        ("wht0! = 1nA\n", 1),
        ("[stimulus]\nduration = 1s\nflavour = 3\n", 3),
    ],
)
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "trace")
    assert info.value.line == line


def test_config_kind_mismatch():
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nkind = relu-curve\n", "trace")


def test_config_semantic_error():
    with pytest.raises(ConfigError):
        parse_config("[stimulus]\nrates = 300Hz, 100Hz\n", "ff-curve")
    with pytest.raises(ConfigError):
        parse_config("[biases]\ndpi_tau! = 0\n", "trace")


def test_load_config_file(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(CONFIG)
    assert load_config(path) == parse_config(CONFIG)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_config_hash_stable_and_sensitive():
    a = preset("ff-curve")
    assert config_hash(a) == config_hash(preset("ff-curve"))
    assert config_hash(a) != config_hash(replace(a, seed=1))
    assert config_hash(a) != config_hash(a.with_biases(**{"wht0!": 9e-9}))


def test_periodic_train():
    evs = periodic_train(100.0, 0.1, 7)
    assert len(evs) == 10
    assert [e.timestamp for e in evs] == pytest.approx([k / 100 for k in range(10)])
    assert periodic_train(0.0, 1.0, 7) == []


def test_poisson_train_seeded():
    a = poisson_train(500.0, 2.0, 1, seed=3)
    b = poisson_train(500.0, 2.0, 1, seed=3)
    c = poisson_train(500.0, 2.0, 1, seed=4)
    assert a == b and a != c
    assert len(a) == pytest.approx(1000, rel=0.1)
    assert all(x.timestamp < y.timestamp for x, y in zip(a, a[1:]))


def test_zero_rate_trace_is_flat():
    spec = replace(preset("trace"), rate=0.0, duration=0.05)
    tr = ex.run_trace(spec)
    assert np.all(tr.result.i_syn() == 0) and np.all(tr.result.i_mem() == 0)
    assert tr.result.spikes == []


def test_trace_mean_current_law():
    tr = ex.run_trace(preset("trace"))
    assert tr.expected_mean_i_syn == pytest.approx(1.6e-9)
    assert tr.mean_rel_error < 0.01


def test_ff_zero_input():
    spec = replace(preset("ff-curve"), rates=(0.0,), duration=0.5, max_duration=0.5)
    assert ex.run_ff_curve(spec).output_rates.tolist() == [0.0]


def test_isi_rate_estimator():
    assert ex.isi_rate([0.1, 0.2, 0.3], 1.0) == pytest.approx(10.0)
    assert ex.isi_rate([0.5], 2.0) == 0.5
    assert ex.isi_rate([], 2.0) == 0.0


def test_montecarlo_zero_sigma_exact():
    spec = replace(preset("montecarlo"), sigma=0.0, instances=100)
    mc = ex.run_montecarlo(spec)
    assert np.all(mc.residuals == 0.0)
    assert np.all(mc.onsets == mc.onsets[0])


def test_montecarlo_seeded():
    spec = replace(preset("montecarlo"), instances=200, seed=5)
    a, b = ex.run_montecarlo(spec), ex.run_montecarlo(spec)
    assert a.summary() == b.summary()
    assert ex.run_montecarlo(replace(spec, seed=6)).summary() != a.summary()


# -- CLI --------------------------------------------------------------------------


def _write_cfg(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    return str(p)


SHORT_TRACE = "[stimulus]\nduration = 0.2s\n"


def test_cli_trace_outputs_and_determinism(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, SHORT_TRACE)
    assert cli.main(["trace", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["trace", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    for name in ("trace.csv", "spikes.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    head = (tmp_path / "a" / "trace.csv").read_text().splitlines()[:2]
    assert head[0].startswith("# config_hash=")
    assert head[1] == "time,entity,i_syn,i_mem"
    assert (tmp_path / "a" / "spikes.csv").read_text().splitlines()[1] == "time,core,neuron"


def test_cli_seed_changes_hash(tmp_path):
    cfg = _write_cfg(tmp_path, SHORT_TRACE)
    cli.main(["trace", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["trace", "--config", cfg, "--seed", "9", "--out", str(tmp_path / "b")])
    ha = (tmp_path / "a" / "trace.csv").read_text().splitlines()[0]
    hb = (tmp_path / "b" / "trace.csv").read_text().splitlines()[0]
    assert ha != hb and "seed=9" in hb


def test_cli_json_format(tmp_path):
    cfg = _write_cfg(tmp_path, SHORT_TRACE)
    assert cli.main(["trace", "--config", cfg, "--format", "json", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "trace.json").read_text())
    assert len(doc["time"]) == len(doc["i_syn"]) == len(doc["i_mem"])


def test_cli_report(tmp_path, capsys):
    assert cli.main(["report", "--neurons", "256", "--blocks", "64", "--format", "json", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["total_area_um2"] == 60672.0
    assert "60672" in capsys.readouterr().out


def test_cli_stimulus_file(tmp_path):
    ev = tmp_path / "ev.csv"
    ev.write_text("timestamp,address\n0.0,0x00000001\n0.01,0x00000001\n")
    cfg = _write_cfg(tmp_path, SHORT_TRACE)
    assert cli.main(["trace", "--config", cfg, "--stimulus", str(ev), "--out", str(tmp_path)]) == 0


def test_cli_exit_config_error(tmp_path):
    cfg = _write_cfg(tmp_path, "[biases]\nnope = 1nA\n")
    assert cli.main(["trace", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.csv"
    bad.write_text("0.0,0xFF000000\n")
    assert cli.main(["trace", "--stimulus", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_cli_exit_check_failure(tmp_path):
    # too short to settle for the mean-current check
    cfg = _write_cfg(tmp_path, "[stimulus]\nduration = 0.1s\n")
    assert cli.main(["trace", "--config", cfg, "--check", "--out", str(tmp_path)]) == cli.EXIT_CHECK
    assert cli.main(["trace", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_OK


def test_cli_exit_numeric_fault(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericFault("c0n0", 0.1, "nan")

    monkeypatch.setattr(ex, "run_trace", boom)
    assert cli.main(["trace", "--out", str(tmp_path)]) == cli.EXIT_NUMERIC


def test_cli_montecarlo(tmp_path):
    cfg = _write_cfg(tmp_path, "[analysis]\ninstances = 150\n")
    assert cli.main(["montecarlo", "--config", cfg, "--out", str(tmp_path)]) == 0
    stats = json.loads((tmp_path / "montecarlo.json").read_text())
    assert stats["instances"] == 150 and stats["within_bound"]
    assert len((tmp_path / "montecarlo.csv").read_text().splitlines()) == 152
