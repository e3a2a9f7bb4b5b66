import json
import math
import os
import subprocess

import numpy as np
import pytest

import nvzeno


def small_bath(n=4, seed=3):
    return nvzeno.sample_bath(nvzeno.BathConfig(seed=seed, n_spins=n))


def test_resonance_field():
    assert nvzeno.anticrossing_field() * 1e4 == pytest.approx(1024.588, rel=1e-5)
    assert abs(nvzeno.omega_a(nvzeno.anticrossing_field())) < 1e-6


def test_bath_is_deterministic_and_nested():
    a = small_bath(12)
    b = small_bath(25)
    assert len(a) == 12 and len(b) == 25
    np.testing.assert_array_equal(a.positions, b.positions[:12])
    np.testing.assert_array_equal(small_bath(12).omega, a.omega)
    back = nvzeno.Bath.from_json(a.to_json())
    np.testing.assert_array_equal(back.positions, a.positions)


def test_cce_matches_exact_at_full_order():
    bath = small_bath(4)
    times = nvzeno.uniform_grid(2e-4, 100)
    exact = nvzeno.exact_survival(bath, times)
    values, diag = nvzeno.cce_survival(bath, times, order=4)
    assert values[0] == pytest.approx(1.0)
    assert np.max(np.abs(values - exact)) < 1e-10
    assert diag["clusters"] == 15
    assert diag["max_unitarity_residual"] <= 1e-11


def test_zeno_helpers():
    assert nvzeno.repeated_measurement_survival(0.99, 10) == pytest.approx(0.9043820750088044)
    tau = 12e-6
    wa = nvzeno.omega_a(0.102498)
    assert nvzeno.broadening(wa, tau, wa) == pytest.approx(tau / (2 * math.pi))
    times = np.linspace(0.0, 1e-5, 11)
    values = np.exp(-1e3 * times)
    assert nvzeno.effective_rate(times, values, 5e-6) == pytest.approx(1e3)
    assert nvzeno.overlap_rate(small_bath(), tau) > 0.0
    omega, weight = nvzeno.spectral_weights(small_bath())
    assert omega.shape == weight.shape == (4,)
    assert np.all(weight >= 0)


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(nvzeno.ConfigError):
        nvzeno.BathConfig(abundance=2.0)
    with pytest.raises(nvzeno.BudgetExceeded):
        nvzeno.exact_survival(small_bath(6), [0.0, 1e-6], max_spins=4)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"tau_us": []}))
    with pytest.raises(ValueError):
        nvzeno.config_hash(str(bad))


def test_run_simulation(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 2, "n_spins": 3, "cce_order": 2, "t_max_us": 50,
                               "n_time_points": 26, "tau_us": [2, 10], "progress_interval_s": 0}))
    files = nvzeno.run_simulation(str(cfg), str(tmp_path / "out"))
    names = {os.path.basename(str(f)) for f in files}
    assert {"survival.csv", "zeno_report.csv", "zeno_measured.csv", "meta.json"} <= names
    meta = json.loads((tmp_path / "out" / "meta.json").read_text())
    assert meta["config_hash"] == nvzeno.config_hash(str(cfg))


@pytest.mark.skipif("NVZENO_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_validate_exit_codes(tmp_path):
    cli = os.environ["NVZENO_CLI"]
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"n_spins": 4, "cce_order": 2, "tau_us": [1]}))
    assert subprocess.run([cli, "validate", str(good)], capture_output=True).returncode == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_spins": 4, "cce_order": 5, "tau_us": [1]}))
    assert subprocess.run([cli, "validate", str(bad)], capture_output=True).returncode == 2
