import numpy as np
import pandas as pd
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from trendsynth import (GBM, Garch11, PCAAssetExpander, ReturnPanel, ScenarioSpec,
                        TrendScenarioGenerator, build_trend_library, expand_with_report,
                        simulate_garch11, synthesize_scenario)
from trendsynth.baselines import GarchParams


@pytest.fixture(scope="module")
def frame(small_panel):
    return small_panel.to_frame()


def test_generator_matches_functional_core(small_panel, frame):
    gen = TrendScenarioGenerator(random_state=7, first_sign="upward").fit(frame)
    out = gen.sample(900)
    lib = build_trend_library(small_panel, 0.05, 20)
    ref = synthesize_scenario(ScenarioSpec(900, 7, lib, "upward"))
    assert isinstance(out, pd.DataFrame) and out.shape == (900, 8)
    assert list(out.columns) == small_panel.assets
    np.testing.assert_array_equal(out.to_numpy(), ref.returns.T)
    assert gen.n_features_in_ == 8
    assert list(gen.feature_names_in_) == small_panel.assets


def test_generator_accepts_arrays_and_panels(small_panel, frame):
    a = TrendScenarioGenerator(random_state=1).fit(frame.to_numpy()).sample(300)
    b = TrendScenarioGenerator(random_state=1).fit(small_panel).sample(300)
    np.testing.assert_array_equal(a.to_numpy(), b.to_numpy())
    assert list(a.columns)[0] == "asset-0001"


def test_generator_seed_and_threads(frame):
    gen = TrendScenarioGenerator(random_state=3, n_jobs=3).fit(frame)
    serial = clone(gen).set_params(n_jobs=1).fit(frame)
    np.testing.assert_array_equal(gen.sample(1000).to_numpy(), serial.sample(1000).to_numpy())
    assert not np.array_equal(gen.sample(1000).to_numpy(),
                              gen.sample(1000, random_state=4).to_numpy())


def test_generator_hand_sequence(frame):
    gen = TrendScenarioGenerator(random_state=0).fit(frame)
    lib = gen.library_
    up, down = lib.indices_by_sign("upward")[0], lib.indices_by_sign("downward")[0]
    days = lib.trends[up].n_days + lib.trends[down].n_days
    out = gen.sample(days, sequence=[up, down])
    assert out.shape == (days, 8)


def test_generator_not_fitted():
    with pytest.raises(NotFittedError):
        TrendScenarioGenerator().sample(10)


def test_generator_rejects_bad_input():
    with pytest.raises(ValueError):
        TrendScenarioGenerator().fit(np.array([[0.1, np.nan], [0.2, 0.1]]))
    with pytest.raises(ValueError):
        TrendScenarioGenerator(random_state=-1).fit(np.zeros((5, 2)) + 0.01).sample(3)


def test_get_params_and_clone():
    gen = TrendScenarioGenerator(theta=0.03, window_len=10, random_state=5)
    assert gen.get_params() == {"theta": 0.03, "window_len": 10, "first_sign": "random",
                                "random_state": 5, "n_jobs": 1}
    c = clone(gen)
    assert c.get_params() == gen.get_params() and c is not gen
    exp = PCAAssetExpander(n_extra=3, ratio_cap="auto")
    assert clone(exp).get_params()["ratio_cap"] == "auto"
    assert set(Garch11().get_params()) == {"innovation", "max_iter", "tol"}


def test_expander_matches_functional_core(small_panel, frame):
    exp = PCAAssetExpander(n_extra=4, ratio_cap=None, random_state=2)
    out = exp.fit_transform(frame)
    ref, info = expand_with_report(small_panel, 4, np.random.default_rng(2), ratio_cap=None)
    np.testing.assert_array_equal(out.to_numpy(), ref.returns.T)
    assert list(out.columns[-4:]) == [f"synth-{i:04d}" for i in range(1, 5)]
    assert exp.expansion_info_ == info
    assert np.all(np.diff(exp.eigenvalues_) <= 0)


def test_expander_zero_extra_is_identity(frame):
    out = PCAAssetExpander(n_extra=0).fit_transform(frame)
    pd.testing.assert_frame_equal(out, frame)
    with pytest.raises(ValueError):
        PCAAssetExpander(n_extra=0, drop_originals=True).fit_transform(frame)


def test_expander_shape_check(frame):
    exp = PCAAssetExpander(n_extra=1).fit(frame)
    with pytest.raises(ValueError, match="fitted on"):
        exp.transform(frame.iloc[:, :3])


def test_gbm_estimator(rng):
    x = rng.normal(0.0005, 0.01, 3000)
    m = GBM().fit(x)
    assert m.params_.mu == pytest.approx(x.mean())
    a, b = m.sample(50, random_state=1), m.sample(50, random_state=1)
    assert a.shape == (50,) and a.tobytes() == b.tobytes()


def test_garch_estimator():
    x = simulate_garch11(GarchParams(1e-5, 0.08, 0.90), 8000, np.random.default_rng(0))
    m = Garch11().fit(pd.Series(x))
    assert abs(m.params_.alpha - 0.08) < 0.05 and m.n_iter_ > 0
    assert m.sample(100, random_state=0).shape == (100,)
    with pytest.raises(NotFittedError):
        Garch11().sample(5)


def test_return_panel_frame_round_trip(small_panel):
    back = ReturnPanel(list(small_panel.to_frame().columns), list(small_panel.days),
                       small_panel.to_frame().to_numpy().T)
    np.testing.assert_array_equal(back.returns, small_panel.returns)
