import json
import os

import numpy as np
import pytest

import feederid

FEEDER = {
    "s_base_va": 100000.0,
    "v_base_v": 400.0,
    "edges": [
        {"from": 0, "to": 1, "length_m": 40.0},
        {"from": 1, "to": 2, "length_m": 35.0},
        {"from": 2, "to": 3, "length_m": 30.0},
        {"from": 1, "to": 4, "length_m": 25.0},
        {"from": 4, "to": 5, "length_m": 20.0},
    ],
}

LIBRARY = {
    "cables": [
        {"r_ohm_per_km": 0.32, "x_ohm_per_km": 0.075},
        {"r_ohm_per_km": 0.64, "x_ohm_per_km": 0.080},
        {"r_ohm_per_km": 1.15, "x_ohm_per_km": 0.085},
    ]
}


def base_cfg(tmp_path):
    (tmp_path / "feeder.json").write_text(json.dumps(FEEDER))
    (tmp_path / "library.json").write_text(json.dumps(LIBRARY))
    return feederid.config(
        feeder=str(tmp_path / "feeder.json"),
        library=str(tmp_path / "library.json"),
        out_dir=str(tmp_path / "runs"),
        # light household draws keep the linearized fit inside the cable box
        synth_T=8,
        synth_p_lo=0.01,
        synth_p_hi=0.06,
        synth_q_lo=0.0,
        synth_q_hi=0.02,
        m=200,
        seed=5,
    )


def simulate_inputs(cfg):
    run = feederid.simulate(cfg)
    cfg.meter = os.path.join(run, "meter.csv")
    cfg.truth = os.path.join(run, "truth.json")
    return run


def test_simulate_writes_dataset(tmp_path):
    cfg = base_cfg(tmp_path)
    run = simulate_inputs(cfg)
    assert os.path.isfile(os.path.join(run, "meter.csv"))
    assert os.path.isfile(os.path.join(run, "truth.json"))
    assert os.path.isfile(os.path.join(run, "config.json"))


def test_identify_end_to_end(tmp_path):
    cfg = base_cfg(tmp_path)
    simulate_inputs(cfg)
    out = feederid.identify(cfg)
    assert out.ok
    assert out.exit_code == 0
    assert out.B.shape == (200, 10)
    assert out.C.shape == (200, 10)
    assert out.final.shape == (200, 10)
    assert out.delta_star_max > 0.0
    assert len(out.parts) >= 1
    report = out.report
    assert report.has_truth
    assert len(report.contained) == 5
    assert np.isfinite(report.mape_r) and report.mape_r >= 0.0
    assert len(report.r) == 5 and report.r[0].min <= report.r[0].max
    run = os.path.join(str(cfg.out_dir), feederid.config_hash(cfg))
    for name in ("report.json", "diagnostics.json", "B.csv", "C.csv"):
        assert os.path.isfile(os.path.join(run, name))


def test_identify_is_deterministic(tmp_path):
    cfg = base_cfg(tmp_path)
    simulate_inputs(cfg)
    a = feederid.identify(cfg)
    b = feederid.identify(cfg)
    assert a.ok and b.ok
    assert np.array_equal(np.asarray(a.B), np.asarray(b.B))
    assert np.array_equal(np.asarray(a.C), np.asarray(b.C))


def test_diagnose_reports_parts(tmp_path):
    cfg = base_cfg(tmp_path)
    simulate_inputs(cfg)
    out = feederid.diagnose(cfg)
    assert len(out.parts) >= 1
    assert out.delta_star_max >= 0.0
    assert out.parts[0].diag.numerical_rank > 0


def test_errors_surface_as_exceptions(tmp_path):
    cfg = base_cfg(tmp_path)
    cfg.meter = str(tmp_path / "missing.csv")
    with pytest.raises(RuntimeError):
        feederid.identify(cfg)
    bad = base_cfg(tmp_path)
    bad.kappa = 0.5
    with pytest.raises(RuntimeError):
        feederid.identify(bad)


def test_config_rejects_unknown_fields():
    with pytest.raises(AttributeError):
        feederid.config(not_a_field=1)
