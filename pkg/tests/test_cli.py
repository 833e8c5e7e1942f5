import json

import numpy as np
import pytest

from risrsma.cli import (
    ExperimentSpec,
    PRESETS,
    Variant,
    list_presets,
    main,
    run_experiment,
)
from risrsma.errors import SimError

SMALL_TEMPLATE = {
    "num_bs": 1,
    "num_antennas": 8,
    "num_users": 2,
    "ris_elements": 4,
    "rician_factor": 1.0,
    "noise_variance_w": 1.0,
    "unit_path_loss": True,
}


def small_spec(**kw):
    base = dict(
        scenario_template=SMALL_TEMPLATE,
        sweep_variable="snr_db",
        grid=(0.0, 10.0),
        methods=("jensen",),
        trials=200,
        seed=3,
    )
    base.update(kw)
    return ExperimentSpec(**base)


def test_csv_deterministic(tmp_path):
    spec = small_spec(methods=("jensen", "montecarlo"))
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    run_experiment(spec, a)
    run_experiment(spec, b)
    assert a.read_bytes() == b.read_bytes()


def test_csv_schema(tmp_path):
    spec = small_spec()
    out = tmp_path / "out.csv"
    run_experiment(spec, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "sweep_var,sweep_value,method,bs_index,metric,value,stderr,seed"
    for line in lines[1:]:
        parts = line.split(",")
        assert len(parts) == 8
        assert parts[0] == "snr_db"
        float(parts[1])
        float(parts[5])


def test_empty_methods_rejected_before_compute():
    with pytest.raises(SimError):
        small_spec(methods=()).validate()


def test_unsorted_grid_rejected():
    with pytest.raises(SimError):
        small_spec(grid=(10.0, 0.0)).validate()


def test_unknown_method_rejected():
    with pytest.raises(SimError):
        small_spec(methods=("warp",)).validate()


def test_preset_listing():
    presets = list_presets()
    names = [n for n, _ in presets]
    assert len(names) == 12
    assert len(set(names)) == 12
    assert "fig8" in names
    fig8_desc = dict(presets)["fig8"]
    assert "fraction" in fig8_desc or "t" in fig8_desc


def test_variant_labels_reach_method_column(tmp_path):
    spec = small_spec(
        variants=(
            Variant(label="N=8"),
            Variant(label="N=10", overrides={"num_antennas": 10}),
        )
    )
    out = tmp_path / "v.csv"
    run_experiment(spec, out)
    text = out.read_text()
    assert "jensen:N=8" in text
    assert "jensen:N=10" in text


def test_main_list_presets(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    assert "fig7" in out


def test_main_run_spec_file(tmp_path):
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(
        json.dumps(
            {
                "scenario": SMALL_TEMPLATE,
                "sweep_variable": "snr_db",
                "grid": [0.0, 10.0],
                "methods": ["jensen", "nors"],
                "trials": 200,
                "seed": 1,
            }
        )
    )
    out = tmp_path / "out.csv"
    assert main(["run", "--spec", str(spec_file), "--out", str(out)]) == 0
    assert out.exists()
    assert "nors" in out.read_text()


def test_main_validation_error_exit_code(tmp_path):
    spec_file = tmp_path / "bad.json"
    spec_file.write_text(
        json.dumps(
            {
                "scenario": SMALL_TEMPLATE,
                "sweep_variable": "snr_db",
                "grid": [0.0, 10.0],
                "methods": [],
            }
        )
    )
    assert main(["run", "--spec", str(spec_file), "--out", str(tmp_path / "x.csv")]) == 2


def test_main_unknown_preset(tmp_path):
    assert main(["preset", "fig99", "--out", str(tmp_path / "x.csv")]) == 2


def test_main_missing_spec_file(tmp_path):
    assert main(["run", "--spec", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x.csv")]) == 2


def test_preset_overrides_seed_and_trials(tmp_path):
    out1 = tmp_path / "p1.csv"
    out2 = tmp_path / "p2.csv"
    assert main(["preset", "fig1a", "--out", str(out1), "--trials", "150", "--seed", "9"]) == 0
    assert main(["preset", "fig1a", "--out", str(out2), "--trials", "150", "--seed", "9"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert ",9\n" in out1.read_text()


def test_t_sweep_variable(tmp_path):
    spec = small_spec(
        sweep_variable="t_s",
        grid=(0.2, 0.8),
        scenario_template={**SMALL_TEMPLATE, "snr_db": 20.0},
    )
    out = tmp_path / "t.csv"
    run_experiment(spec, out)
    rows = out.read_text().strip().splitlines()[1:]
    assert any(r.startswith("t_s,0.2") for r in rows)
    assert any(r.startswith("t_s,0.8") for r in rows)


def test_worker_env_var_matches_serial(tmp_path, monkeypatch):
    spec = small_spec(methods=("jensen", "nors"))
    serial = tmp_path / "serial.csv"
    run_experiment(spec, serial)
    monkeypatch.setenv("RISRSMA_WORKERS", "2")
    parallel = tmp_path / "parallel.csv"
    run_experiment(spec, parallel)
    assert serial.read_bytes() == parallel.read_bytes()
