import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from spikearray.errors import ValidationError
from spikearray.simctl import (PROFILES, EnergyTable, emit_raster, emit_stats, energy_estimate, load_config,
                               resolve_profile, run_simulation, sweep)
from spikearray.simctl.cli import main
from spikearray.simctl.output import read_raster
from spikearray.simctl.runner import bench, trial_seeds
from spikearray.simctl.stimulus import build_events

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
DATA = Path(__file__).resolve().parent / "data"


def wta_doc(**kw):
    doc = yaml.safe_load((CONFIGS / "wta_ring.yaml").read_text())
    doc.update(kw)
    return doc


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_every_shipped_config_runs(name, tmp_path):
    art = run_simulation(CONFIGS / name, tmp_path)
    assert art.stats_path.exists() and art.timing_path.exists()
    assert all(p.exists() for p in art.rasters)
    stats = json.loads(art.stats_path.read_text())
    assert stats["engine"] == load_config(CONFIGS / name).engine
    tot = stats["totals"]
    assert tot["energy"]["total_pJ"] == pytest.approx(
        tot["synaptic_events"] * tot["energy"]["pJ_per_synaptic_event"]
        + tot["spikes"] * tot["energy"]["pJ_per_spike"]
        + tot["router_hops"] * tot["energy"]["pJ_per_router_hop"])


def test_golden_raster(tmp_path):
    art = run_simulation(CONFIGS / "wta_ring.yaml", tmp_path)
    assert art.rasters[0].read_bytes() == (DATA / "wta_ring_raster.csv").read_bytes()


def test_same_seed_byte_identical(tmp_path):
    a = run_simulation(CONFIGS / "hiaer_small.yaml", tmp_path / "a")
    b = run_simulation(CONFIGS / "hiaer_small.yaml", tmp_path / "b")
    assert a.stats_path.read_bytes() == b.stats_path.read_bytes()
    assert a.rasters[0].read_bytes() == b.rasters[0].read_bytes()


def test_different_seed_changes_output(tmp_path):
    a = run_simulation(CONFIGS / "wta_ring.yaml", tmp_path / "a", seed=1)
    b = run_simulation(CONFIGS / "wta_ring.yaml", tmp_path / "b", seed=2)
    assert a.rasters[0].read_bytes() != b.rasters[0].read_bytes()


def test_trials_independent_of_worker_count(tmp_path):
    doc = wta_doc(trials=4, ticks=300)
    one = run_simulation(doc, tmp_path / "one", workers=1)
    many = run_simulation(doc, tmp_path / "many", workers=3)
    assert [p.name for p in one.rasters] == [f"raster_trial{i:03d}.csv" for i in range(4)]
    assert one.stats_path.read_bytes() == many.stats_path.read_bytes()
    for p, q in zip(one.rasters, many.rasters):
        assert p.read_bytes() == q.read_bytes()
    assert len(set(trial_seeds(load_config(doc)))) == 4


def test_empty_stimulus(tmp_path):
    doc = wta_doc(stimulus={})
    art = run_simulation(doc, tmp_path)
    assert art.rasters[0].read_text() == "tick,address\n"
    tot = art.stats["totals"]
    assert tot["spikes"] == 0 and tot["synaptic_events"] == 0 and tot["energy"]["total_pJ"] == 0


def test_ticks_override_truncates(tmp_path):
    art = run_simulation(CONFIGS / "wta_ring.yaml", tmp_path, ticks=100)
    r = read_raster(art.rasters[0])
    assert art.stats["trials"][0]["ticks"] == 100 and (r[:, 0] < 100).all()


def test_stimulus_merge_order(tmp_path):
    (tmp_path / "ev.csv").write_text("tick,address\n2,3\n0,1\n")
    doc = {"format_version": 1, "engine": "wta", "ticks": 10,
           "wta": {"rows": 1, "cols": 4},
           "stimulus": {"file": "ev.csv", "events": [[2, 0], [9, 2], [12, 2]],
                        "generators": [{"kind": "regular", "addresses": [1, 2], "period": 4, "duration": 6}]}}
    cfg = load_config(doc, base_dir=str(tmp_path))
    t, a, _ = build_events(cfg, 0, 5)
    assert list(zip(t.tolist(), a.tolist())) == [(0, 1), (0, 1), (0, 2), (2, 3), (2, 0), (4, 1), (4, 2), (9, 2)]


def test_poisson_generator_rate():
    doc = {"format_version": 1, "engine": "wta", "ticks": 20000, "tick_seconds": 1e-3,
           "wta": {"rows": 1, "cols": 2},
           "stimulus": {"generators": [{"kind": "poisson", "addresses": [0, 1], "rate_hz": 100}]}}
    t, a, _ = build_events(load_config(doc), 5, 3)
    assert abs(len(t) / 2 - 2000) < 4 * np.sqrt(2000)
    assert (np.diff(t) >= 0).all()


def test_energy_linearity():
    tab = EnergyTable(2.5, 1.0, 0.5)
    e1 = energy_estimate(tab, 100, 10, 4)
    e2 = energy_estimate(tab, 200, 20, 8)
    assert e1["total_pJ"] == pytest.approx(250 + 10 + 2)
    assert e2["total_pJ"] == pytest.approx(2 * e1["total_pJ"])
    assert e1["total_uJ"] == pytest.approx(e1["total_pJ"] * 1e-6)


def test_energy_profiles():
    assert resolve_profile("MNIFAT").pJ_per_synaptic_event == 360.0
    assert resolve_profile({"pJ_per_synaptic_event": 1.0}).pJ_per_router_hop == 0.0
    assert len(PROFILES) == 7
    with pytest.raises(ValidationError):
        resolve_profile("Nope")
    with pytest.raises(ValidationError):
        EnergyTable(-1.0)


def test_raster_writer_formats():
    buf = io.BytesIO()
    assert emit_raster([(0, 3), (0, 1), (4, 2)], buf) == 3
    assert buf.getvalue() == b"tick,address\n0,3\n0,1\n4,2\n"
    buf = io.BytesIO()
    emit_raster(np.array([[1, 2, 5]]), buf)
    assert buf.getvalue() == b"tick,address,count\n1,2,5\n"
    with pytest.raises(ValidationError):
        emit_raster([(3, 0), (1, 0)], io.BytesIO())
    with pytest.raises(ValidationError):
        emit_raster([(3, 0, 1), (4, 0)], io.BytesIO())


def test_stats_writer_is_canonical(tmp_path):
    p = tmp_path / "s.json"
    emit_stats({"b": np.int64(2), "a": [np.float64(0.5)]}, p)
    assert p.read_text() == '{\n  "a": [\n    0.5\n  ],\n  "b": 2\n}\n'
    assert [x.name for x in tmp_path.iterdir()] == ["s.json"]


def test_unwritable_output_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_stats({}, blocker / "sub" / "s.json")


def test_sweep_writes_table(tmp_path):
    records, path = sweep(CONFIGS / "crossbar.yaml", tmp_path)
    lines = path.read_text().splitlines()
    assert lines[0] == "levels,bits,mean_rel_error,std_rel_error,max_rel_error" and len(lines) == 5
    with pytest.raises(ValidationError):
        sweep(CONFIGS / "wta_ring.yaml", tmp_path)


def test_bench_reports_throughput():
    res = bench(CONFIGS / "ifat_minimal.yaml", repeats=2)
    assert len(res["events_per_sec"]) == 2 and res["synaptic_events"] > 0


def test_cortex_neuron_record(tmp_path):
    doc = yaml.safe_load((CONFIGS / "cortex_small.yaml").read_text())
    doc["cortex"]["record_neurons"] = True
    art = run_simulation(doc, tmp_path)
    assert [p.name for p in art.extra] == ["neurons.csv"]


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["validate", str(CONFIGS / "ifat_lut.yaml")]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("format_version: 1\nengine: ifat\nticks: -3\nifat: {rows: 0, cols: 2}\n")
    assert main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "ticks" in err and "ifat.rows" in err
    assert main(["run", str(CONFIGS / "wta_ring.yaml"), "--out-dir", str(tmp_path / "o"), "--ticks", "50"]) == 0
    assert (tmp_path / "o" / "stats.json").exists()
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", str(CONFIGS / "wta_ring.yaml"), "--out-dir", str(blocker)]) == 3


def test_cli_as_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "spikearray", "validate", str(CONFIGS / "wta_2d.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "ok" in proc.stdout


def test_three_record_golden_bytes(tmp_path):
    p = tmp_path / "r.csv"
    assert emit_raster([(0, 5), (0, 2), (7, 4095)], p) == 3
    assert p.read_bytes() == (DATA / "three_records.csv").read_bytes()


def test_large_raster_line_count():
    n = 10 ** 6
    recs = np.column_stack([np.arange(n) // 7, np.arange(n) % 4080])
    buf = io.BytesIO()
    assert emit_raster(recs, buf) == n
    assert buf.getvalue().count(b"\n") == n + 1


def test_empty_raster_is_header_only():
    buf = io.BytesIO()
    assert emit_raster([], buf) == 0
    assert buf.getvalue() == b"tick,address\n"
