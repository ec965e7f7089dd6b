import warnings

import numpy as np
import pytest
from scipy.stats import ortho_group

import oracles
from trendsynth.expand import (LoadingDistribution, LoadingMatrix, draw_loadings,
                               expand_from_loadings, expand_with_report,
                               fit_loading_distribution, max_trend_ratios, pca_decompose,
                               reconstruct, resolve_ratio_cap)
from trendsynth.ingest import PanelError, ReturnPanel, sim_day_labels


def _panel(x):
    x = np.asarray(x, dtype=float)
    return ReturnPanel([f"a{i}" for i in range(x.shape[0])], sim_day_labels(x.shape[1]), x)


def test_perfectly_correlated_rank_one(rng):
    z = rng.normal(0, 0.01, 500)
    _, comps = pca_decompose(_panel([z, 2 * z]))
    assert comps.eigenvalues[0] > 0
    assert abs(comps.eigenvalues[1]) < 1e-12 * comps.eigenvalues[0]


def test_isotropic_eigenvalues():
    x = np.random.default_rng(3).standard_normal((2, 100_000))
    _, comps = pca_decompose(_panel(x))
    np.testing.assert_allclose(comps.eigenvalues, 1.0, rtol=0.02)


def test_eigenvalues_sorted_and_signs_fixed(small_panel):
    w, comps = pca_decompose(small_panel)
    assert np.all(np.diff(comps.eigenvalues) <= 0)
    pivot = np.abs(w.rows).argmax(axis=0)
    assert np.all(w.rows[pivot, np.arange(w.rows.shape[1])] > 0)
    np.testing.assert_allclose(w.rows.T @ w.rows, np.eye(w.rows.shape[0]), atol=1e-12)


def test_round_trip(small_panel):
    w, comps = pca_decompose(small_panel)
    assert np.max(np.abs(reconstruct(w, comps) - small_panel.returns)) < 1e-10


def test_pca_needs_two_assets():
    with pytest.raises(PanelError):
        pca_decompose(_panel(np.ones((1, 10))))


def test_pca_warns_when_rank_deficient(rng):
    with pytest.warns(RuntimeWarning, match="rank-deficient"):
        pca_decompose(_panel(rng.normal(size=(5, 4))))


def test_loading_distribution_examples():
    d = fit_loading_distribution(LoadingMatrix([[1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_array_equal(d.mean, [0.5, 0.5])
    d = fit_loading_distribution(LoadingMatrix(np.tile([0.3, -0.1, 0.2], (4, 1))))
    assert not d.factor.any()
    with pytest.raises(ValueError):
        fit_loading_distribution(LoadingMatrix([[1.0, 2.0]]))


def test_loading_distribution_matches_two_pass():
    w = ortho_group.rvs(10, random_state=4)
    d = fit_loading_distribution(LoadingMatrix(w))
    mean, cov = oracles.two_pass_covariance(w)
    np.testing.assert_allclose(d.mean, mean, rtol=0, atol=1e-12)
    np.testing.assert_allclose(d.covariance, cov, rtol=0, atol=1e-12)


def test_draw_loadings_degenerate_and_deterministic():
    d = LoadingDistribution(np.array([0.1, 0.2]), np.zeros((2, 3)))
    rows = draw_loadings(d, 5, np.random.default_rng(0)).rows
    assert (rows == [0.1, 0.2]).all()
    d = fit_loading_distribution(LoadingMatrix(ortho_group.rvs(4, random_state=1)))
    a = draw_loadings(d, 6, np.random.default_rng(9)).rows
    b = draw_loadings(d, 6, np.random.default_rng(9)).rows
    assert a.tobytes() == b.tobytes()
    with pytest.raises(ValueError):
        draw_loadings(d, 0)


def test_draw_loadings_converge():
    d = fit_loading_distribution(LoadingMatrix(ortho_group.rvs(3, random_state=2)))
    rows = draw_loadings(d, 10_000, np.random.default_rng(5)).rows
    assert np.max(np.abs(rows.mean(axis=0) - d.mean)) < 0.02


def test_extra_zero_is_identity(small_panel):
    out, info = expand_with_report(small_panel, 0)
    assert out is small_panel and info["redraw_rounds"] == 0
    with pytest.raises(ValueError):
        expand_with_report(small_panel, 0, drop_originals=True)
    with pytest.raises(ValueError):
        expand_with_report(small_panel, -1)


def test_original_loadings_reproduce_originals(small_panel):
    w, _ = pca_decompose(small_panel)
    exact = LoadingDistribution(np.zeros(w.n_rows), np.zeros((w.n_rows, 1)))
    # Drawing from a zero-factor distribution centred on one original row
    # returns that asset exactly.
    for s in (0, 3):
        d = LoadingDistribution(w.rows[s], exact.factor)
        out, _ = expand_from_loadings(small_panel, w, d, 1, np.random.default_rng(0),
                                      drop_originals=True, ratio_cap=None)
        assert np.max(np.abs(out.returns[0] - small_panel.returns[s])) < 1e-10


def test_expansion_shape_names_and_order(small_panel):
    out, info = expand_with_report(small_panel, 5, np.random.default_rng(1), ratio_cap=None)
    assert out.returns.shape == (13, small_panel.n_days)
    assert out.assets[:8] == small_panel.assets
    assert out.assets[8:] == [f"synth-{i:04d}" for i in range(1, 6)]
    np.testing.assert_array_equal(out.returns[:8], small_panel.returns)
    assert info["extra"] == 5 and info["redrawn"] == 0
    only, _ = expand_with_report(small_panel, 5, np.random.default_rng(1), drop_originals=True,
                                 ratio_cap=None)
    np.testing.assert_array_equal(only.returns, out.returns[8:])


def test_expansion_deterministic(small_panel):
    a = expand_with_report(small_panel, 4, np.random.default_rng(2))[0]
    b = expand_with_report(small_panel, 4, np.random.default_rng(2))[0]
    assert a.returns.tobytes() == b.returns.tobytes()


def test_artificial_variance_in_sanity_range(small_panel):
    out = expand_with_report(small_panel, 50, np.random.default_rng(3), ratio_cap="auto")[0]
    v0 = small_panel.returns.var(axis=1)
    v1 = out.returns[8:].var(axis=1)
    assert np.all(np.isfinite(v1))
    assert v1.min() >= 0.1 * v0.min() and v1.max() <= 10 * v0.max()


def test_redraw_loop_replaces_outliers(small_panel):
    cap = resolve_ratio_cap("auto", small_panel.returns)
    out, info = expand_with_report(small_panel, 40, np.random.default_rng(0), ratio_cap=cap * 0.8,
                                   max_rounds=50)
    assert info["redraw_rounds"] >= 1 and info["redrawn"] >= 1
    if info["remaining_outliers"] == 0:
        assert np.nanmax(max_trend_ratios(out.returns[8:])) <= cap * 0.8


def test_redraw_gives_up_with_warning(small_panel):
    with pytest.warns(RuntimeWarning, match="still exceed"):
        _, info = expand_with_report(small_panel, 3, np.random.default_rng(0), ratio_cap=1e-6,
                                     max_rounds=2)
    assert info["redraw_rounds"] == 2 and info["remaining_outliers"] == 3


def test_resolve_ratio_cap(small_panel):
    assert resolve_ratio_cap(None, small_panel.returns) is None
    assert resolve_ratio_cap(7, small_panel.returns) == 7.0
    auto = resolve_ratio_cap("auto", small_panel.returns)
    assert auto == pytest.approx(np.nanmax(max_trend_ratios(small_panel.returns)))
    for bad in ("big", 0, -3):
        with pytest.raises(ValueError):
            resolve_ratio_cap(bad, small_panel.returns)


def test_max_trend_ratios_flags_impossible_paths():
    x = np.array([[0.1, -0.1, 0.1], [0.1, -1.0, 0.1]])
    out = max_trend_ratios(x, 0.05)
    assert np.isfinite(out[0]) and np.isnan(out[1])


def test_loadings_row_mismatch(small_panel):
    w = LoadingMatrix(np.eye(3))
    with pytest.raises(PanelError, match="loadings cover"):
        expand_from_loadings(small_panel, w, fit_loading_distribution(w), 2)


def test_no_warning_on_well_posed_panel(small_panel):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        expand_with_report(small_panel, 3, np.random.default_rng(0), ratio_cap="auto",
                           max_rounds=50)
