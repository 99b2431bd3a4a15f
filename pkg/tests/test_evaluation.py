import json

import numpy as np
import numpy.testing as npt
import pytest

from christoffel_reach.christoffel import fit
from christoffel_reach.conformal import ReachSetEstimate, calibrate, calibrate_robust
from christoffel_reach.evaluation import (
    GridField,
    TrialConfig,
    TrialReport,
    build_estimate,
    coverage_trials,
    derive_seeds,
    export_grid,
    false_positive_rate,
    manifest_hash,
    marching_squares,
    write_grid,
)
from christoffel_reach.monomials import MonomialBasis
from christoffel_reach.systems import UnsupportedOracleError, duffing, four_squares, sample_reach_set

BOX = ((-4.0, -4.0), (4.0, 4.0))


def test_derive_seeds_stable():
    assert derive_seeds(0, 3) == derive_seeds(0, 3)
    assert derive_seeds(0, 3) != derive_seeds(0, 4)
    assert derive_seeds(1, 3) != derive_seeds(0, 3)
    assert len(set(derive_seeds(7, 0))) == 4


def test_config_validation():
    with pytest.raises(ValueError):
        TrialConfig(M=100, N=100)
    with pytest.raises(ValueError):
        TrialConfig(mode="robust", N=50, p=30, epsilon=0.1)
    with pytest.raises(ValueError):
        TrialConfig(mode="robust", N=50, p=1)
    with pytest.raises(ValueError):
        TrialConfig(mode="transductive", M=100, N=50)
    with pytest.raises(ValueError):
        TrialConfig(mode="bogus")


def test_coverage_trials_report_consistent():
    cfg = TrialConfig(M=300, N=100, degree=4, n_eval=2000)
    rep = coverage_trials(cfg, 6, master_seed=11)
    assert rep.violations == rep.recount()
    assert len(rep.per_trial) == 6
    for t in rep.per_trial:
        assert 0.0 <= t["empirical_coverage"] <= 1.0
        assert len(t["seed"]) == 4
    doc = rep.to_dict()
    assert doc["config"]["degree"] == 4 and len(doc["manifest_sha256"]) == 64


def test_coverage_trials_reproducible():
    cfg = TrialConfig(M=300, N=100, degree=4, n_eval=1000)
    a = json.dumps(coverage_trials(cfg, 3, master_seed=5).to_dict(), sort_keys=True)
    b = json.dumps(coverage_trials(cfg, 3, master_seed=5).to_dict(), sort_keys=True)
    assert a == b


def test_trial_errors_recorded_with_seed():
    # 20 training points cannot support degree 6 (28 monomials)
    cfg = TrialConfig(M=40, N=20, degree=6, n_eval=100)
    rep = coverage_trials(cfg, 2)
    assert len(rep.failures) == 2
    assert "InsufficientSamples" in rep.failures[0]["error"]
    assert rep.failures[0]["seed"] == derive_seeds(0, 0)


def test_epsilon_one_means_no_violations():
    per_trial = [{"empirical_coverage": c} for c in (0.0, 0.3, 1.0)]
    rep = TrialReport(3, 1.0, 0, per_trial)
    assert rep.recount() == 0


def test_fp_rate_empty_region_is_zero():
    model = fit(sample_reach_set(four_squares(), 500, 0).points, MonomialBasis(2, 4))
    empty = ReachSetEstimate(model, 0.0, 1)
    assert false_positive_rate(empty, four_squares(), BOX, 5000, 0) == 0.0


def test_fp_rate_needs_oracle():
    model = fit(np.random.default_rng(0).normal(size=(50, 2)), MonomialBasis(2, 2))
    with pytest.raises(UnsupportedOracleError):
        false_positive_rate(ReachSetEstimate(model, 1.0, 1), duffing(), BOX, 100, 0)


def test_fp_rate_monotone_under_nesting():
    data = sample_reach_set(four_squares(), 3000, 1).points
    model = fit(data[:2000], MonomialBasis(2, 8))
    cal = data[2000:]
    rates = [
        false_positive_rate(calibrate_robust(model, cal, p, 0.1), four_squares(), BOX, 10_000, 9)
        for p in (0, 1, 5, 20)
    ]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert rates[0] == false_positive_rate(calibrate(model, cal), four_squares(), BOX, 10_000, 9)


def test_score_grid_positive_and_shaped():
    model = fit(sample_reach_set(four_squares(), 800, 2).points, MonomialBasis(2, 6))
    g = export_grid(model, (-4, -4), (4, 4), 25, kind="score")
    assert g.values.shape == (625,)
    assert np.all(g.values > 0)
    npt.assert_array_equal(g.as_array()[3, 7], g.values[3 * 25 + 7])
    npt.assert_allclose(g.nodes()[3 * 25 + 7], [g.axes()[0][3], g.axes()[1][7]])


def test_membership_grid_contains_calibration_nodes():
    data = sample_reach_set(four_squares(), 1200, 3).points
    est = calibrate(fit(data[:1000], MonomialBasis(2, 6)), data[1000:])
    res = 201
    g = export_grid(est, (-4, -4), (4, 4), res)
    axis = g.axes()[0]
    arr = g.as_array()
    for c in data[1000:]:
        i = int(np.argmin(np.abs(axis - c[0])))
        j = int(np.argmin(np.abs(axis - c[1])))
        if est.contains(g.nodes()[i * res + j]):
            assert arr[i, j] == 1.0


def test_four_components_on_most_seeds():
    # the max-of-2000 threshold is heavy tailed at d=15, so single seeds
    # can merge the squares; most seeds keep them apart
    cfg = TrialConfig(M=10_000, N=2000, degree=15)
    comps, origin = [], []
    for i in range(10):
        est, _, _ = build_estimate(cfg, four_squares(), derive_seeds(0, i))
        comps.append(export_grid(est, (-4, -4), (4, 4), 400).components())
        origin.append(bool(est.contains([0.0, 0.0])))
    assert sum(c == 4 for c in comps) >= 6
    assert sum(origin) <= 2


def test_marching_squares_square():
    xs = ys = np.linspace(-1, 1, 21)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    segs = marching_squares(X**2 + Y**2, 0.5, xs, ys)
    assert len(segs) > 10
    radii = [np.hypot(*p) for s in segs for p in s]
    npt.assert_allclose(radii, np.sqrt(0.5), atol=0.02)


def test_marching_squares_saddle():
    xs = ys = np.array([0.0, 1.0])
    f = np.array([[0.0, 1.0], [1.0, 0.0]])  # corners 0 and 2 below the level
    assert len(marching_squares(f, 0.5, xs, ys)) == 2


def test_write_grid_artifacts(tmp_path):
    model = fit(sample_reach_set(four_squares(), 500, 4).points, MonomialBasis(2, 4))
    est = calibrate(model, sample_reach_set(four_squares(), 50, 5).points)
    g = export_grid(est, (-4, -4), (4, 4), 30)
    cfg = {"system": "four_squares", "degree": 4}
    doc = write_grid(g, tmp_path / "a", cfg)
    write_grid(export_grid(est, (-4, -4), (4, 4), 30), tmp_path / "b", cfg)
    for ext in (".csv", ".svg", ".json"):
        assert (tmp_path / f"a{ext}").read_bytes() == (tmp_path / f"b{ext}").read_bytes()
    assert doc["manifest_sha256"] == manifest_hash(cfg)
    assert manifest_hash(cfg) in (tmp_path / "a.svg").read_text()
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[1] == "x1,x2,membership" and len(lines) == 2 + 900


def test_grid_rejects_low_resolution():
    model = fit(np.random.default_rng(0).normal(size=(50, 2)), MonomialBasis(2, 2))
    with pytest.raises(ValueError):
        export_grid(model, (0, 0), (1, 1), 1, kind="score")
    assert isinstance(export_grid(model, (0, 0), (1, 1), 2, kind="score"), GridField)
