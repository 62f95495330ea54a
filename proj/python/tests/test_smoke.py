import math

import numpy as np
import pytest

import dapref


def test_version():
    assert dapref.__version__ == "0.1.0"


def test_normal_normal_run():
    out = dapref.run_experiment({"model": "normal-normal", "algo": "da", "iters": 3000, "seed": 4})
    report = out["report"]
    assert 0.0 < report["acceptance_rate"] < 1.0
    assert out["samples"].shape == (3000, 1)
    assert len(out["stage"]) == 3000
    mean, var = dapref.nn_posterior_params(3.0, 10.0)
    assert abs(out["samples"].mean() - mean) < 0.3
    assert math.isclose(var, 0.990099, rel_tol=1e-6)


def test_prefetch_matches_serial():
    base = {"model": "beta-binomial", "parts": 10, "iters": 1500, "seed": 9}
    serial = dapref.run_experiment({**base, "algo": "da"})
    parallel = dapref.run_experiment({**base, "algo": "da+prefetch", "workers": 4})
    assert np.array_equal(serial["samples"], parallel["samples"])
    assert serial["stage"] == parallel["stage"]


def test_invalid_settings():
    with pytest.raises(ValueError):
        dapref.run_experiment({"iters": 0})
    with pytest.raises(ValueError):
        dapref.run_experiment({"colour": "red"})


def test_compare_and_gain():
    report = dapref.run_experiment({"iters": 2000})["report"]
    rg, row = dapref.compare(report, report)
    assert rg == 1.0
    assert "normal-normal" in row
    assert dapref.relative_gain(100, 10, 200, 40) == pytest.approx(2.0)


def test_worked_tour():
    nodes = dapref.build_tour(8, "observed-rate", 0.234)
    assert [n[0] for n in nodes] == [2, 4, 8, 16, 32, 64, 6, 128]
    assert [round(n[2], 2) for n in nodes] == [1.0, 0.77, 0.59, 0.45, 0.34, 0.26, 0.23, 0.2]
    assert [n[0] for n in dapref.build_tour(7)] == [2, 4, 6, 8, 10, 12, 14]


def test_diagnostics():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(5000)
    assert dapref.autocorrelation(list(x), 3)[0] == 1.0
    assert abs(dapref.integrated_autocorrelation_time(list(x)) - 1.0) < 0.15
    with pytest.raises(ValueError):
        dapref.integrated_autocorrelation_time([0.0] * 10)
    assert dapref.combined_acceptance_prob([0.5, 0.8]) == pytest.approx(0.4)


def test_mixture_helpers():
    w, mu, sd = np.array([1.0]), np.array([0.0]), np.array([2.0])
    info = dapref.fisher_info(w, mu, sd)
    assert np.allclose(info, np.diag([0.25, 0.5]), atol=1e-6)
    assert dapref.mixture_logpdf(w, mu, sd, 0.0) == pytest.approx(-math.log(2.0) - 0.5 * math.log(2 * math.pi))
    sample = dapref.simulate_mixture(1000, 3)
    assert len(sample) == 1000 and sample == dapref.simulate_mixture(1000, 3)
