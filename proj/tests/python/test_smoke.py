import math

import pytest

import qsense


def test_contrast_and_probability():
    s = qsense.SensorModel(fidelity=0.91, t2=7.97e-3)
    assert qsense.contrast(s, 0.5e-3) == pytest.approx(0.9082, abs=1e-4)
    assert qsense.excitation_probability(qsense.SensorModel(0.903, 1e9, 0.0), 0.0, 0.0) == pytest.approx(0.0485)
    assert qsense.qpn_variance(0.5, qsense.EnsembleConfig(1000, 1)) == pytest.approx(2.5e-4)


def test_intermittent_gmin_is_near_290_hz():
    tones = qsense.TwoTone(2 * math.pi * 2000, 0.0, 2 * math.pi * 275)
    r = qsense.gmin_intermittent(0.903, qsense.EnsembleConfig(1000, 1), tones)
    assert abs(r.g_min / (2 * math.pi * 290) - 1) < 0.02
    assert r.valid
    assert r.method == "closed_form"


def test_compensation_and_excess():
    assert qsense.compensation_sensors("constant", 0.5) == 4
    assert qsense.excess_sensors(1.0, 0.01, 1000) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        qsense.compensation_sensors("other", 0.5)


def test_simulation_and_inversion():
    tones = qsense.TwoTone(2 * math.pi * 2000, 2 * math.pi * 500, 2 * math.pi * 275)
    spec = qsense.IntermittentTwoTone(tones, tones.period())
    sensor = qsense.SensorModel(0.9048, 7.97e-3, 0.0)
    est = qsense.simulate_population(spec, sensor, qsense.EnsembleConfig(20000, 1), tones.period(), seed=1)
    assert abs(est.p_hat - qsense.mean_population(spec, sensor, tones.period())) < 4 * est.qpn_std_err
    g = qsense.estimate_frequency_separation(est.p_hat, sensor, spec)
    assert g is not None and abs(g / tones.g - 1) < 0.1
    assert qsense.estimate_frequency_separation(0.0, sensor, spec) is None


def test_pipelines_return_reports():
    fig2 = qsense.run_fig2([0.1, 0.5, 1.0])
    assert fig2["all_pass"]
    assert "compensation" in fig2["tables"]
    rep = qsense.run_experiment_replica(seed=7, excess_factor=1.0)
    assert rep["pipeline_id"] == "replica"
    assert '"seed": 7' in rep["manifest"]
