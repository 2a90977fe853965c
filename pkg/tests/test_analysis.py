import json

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.special import erfc

from u1scramble.analysis import (
    FitResult,
    InsufficientDataError,
    NoFrontError,
    WindowError,
    bootstrap_ci,
    fit_exponential_rate,
    fit_powerlaw_exponent,
    front_velocity,
)
from u1scramble.observables import CurveEstimate, Profile


def growth_curve(rate, amp=1e-4, sat=1.0, t_max=80, se=1e-7):
    t = np.arange(t_max + 1)
    v = np.minimum(amp * np.exp(rate * t), sat)
    return CurveEstimate(t, v, np.full(t.size, se), 100)


def test_growth_rate_noise_free():
    fit = fit_exponential_rate(growth_curve(0.5), saturation=1.0)
    assert fit.value == pytest.approx(0.5, abs=1e-6)
    assert fit.method == "exponential-growth"
    assert fit.n_points >= 4
    lo, hi = fit.window
    assert 1e-4 * np.exp(0.5 * lo) >= 1e-6 and 1e-4 * np.exp(0.5 * hi) <= 0.05


def test_decay_rate_with_baseline():
    t = np.arange(60)
    curve = CurveEstimate(t, 0.25 + 0.7 * np.exp(-0.2 * t), np.full(60, 1e-6), 50)
    fit = fit_exponential_rate(curve, baseline=0.25)
    assert fit.extra["mode"] == "decay"
    assert fit.value == pytest.approx(0.2, abs=1e-6)


@given(st.floats(0.05, 1.5), st.floats(1e-5, 1e-3))
@settings(max_examples=40, deadline=None)
def test_growth_rate_recovered(rate, amp):
    # integer times: the curve needs >= 4 points below 5% of saturation
    assume(np.log(0.05 / amp) / rate >= 4)
    t_max = int(np.log(1.0 / amp) / rate) + 10
    fit = fit_exponential_rate(growth_curve(rate, amp, t_max=t_max, se=amp * 1e-3), saturation=1.0)
    assert fit.value == pytest.approx(rate, rel=1e-6)


def test_steep_growth_has_too_few_points():
    with pytest.raises(InsufficientDataError):
        fit_exponential_rate(growth_curve(1.5, 7.5e-4, t_max=20, se=7.5e-7), saturation=1.0)


def test_noisy_growth_rate_within_error():
    gen = np.random.default_rng(1)
    t = np.arange(100)
    true = np.minimum(1e-4 * np.exp(0.15 * t), 1.0)
    se = 1e-6 + 0.01 * true
    curve = CurveEstimate(t, true + gen.normal(0, se), se, 100)
    fit = fit_exponential_rate(curve, saturation=1.0)
    assert abs(fit.value - 0.15) < 4 * fit.uncertainty + 1e-3


def test_explicit_window_and_errors():
    curve = growth_curve(0.3)
    fit = fit_exponential_rate(curve, window=(5, 15))
    assert fit.window == (5.0, 15.0)
    assert fit.value == pytest.approx(0.3, abs=1e-9)
    with pytest.raises(WindowError):
        fit_exponential_rate(curve, baseline=0.5, window=(0, 20))
    with pytest.raises(InsufficientDataError):
        fit_exponential_rate(curve, window=(5, 7))
    with pytest.raises(InsufficientDataError):
        fit_exponential_rate(CurveEstimate([0, 1, 2], [1, 2, 3], [0, 0, 0], 1))
    with pytest.raises(ValueError):
        fit_exponential_rate(curve, mode="sideways")


def test_fit_result_serializes(tmp_path):
    fit = fit_exponential_rate(growth_curve(0.5), saturation=1.0)
    data = json.loads(fit.to_json(tmp_path / "fit.json"))
    assert data["value"] == pytest.approx(0.5, abs=1e-6)
    assert json.loads((tmp_path / "fit.json").read_text())["method"] == "exponential-growth"
    with pytest.raises(ValueError):
        FitResult(1.0, float("nan"), (0, 1), 1.0, "x", 4)


def test_powerlaw_exact_and_invariant():
    x = np.array([0.02, 0.04, 0.08, 0.16])
    fit = fit_powerlaw_exponent(zip(x, 3.0 * x ** 2))
    assert fit.value == pytest.approx(2.0, abs=1e-12)
    scaled = fit_powerlaw_exponent(zip(x, 1e4 * x ** 2, 1e4 * 0.01 * x ** 2))
    assert scaled.value == pytest.approx(2.0, abs=1e-12)
    assert fit_powerlaw_exponent(zip(7 * x, x ** 2)).value == pytest.approx(2.0, abs=1e-12)


@given(st.floats(-3, 3), st.floats(1e-3, 1e3))
def test_powerlaw_property(alpha, c):
    x = np.array([0.1, 0.2, 0.3, 0.5])
    assert fit_powerlaw_exponent(zip(x, c * x ** alpha)).value == pytest.approx(alpha, abs=1e-9)


def test_powerlaw_errors():
    with pytest.raises(InsufficientDataError):
        fit_powerlaw_exponent([(1, 1), (2, 4)])
    with pytest.raises(ValueError):
        fit_powerlaw_exponent([(1, 1), (2, -4), (3, 9)])


def make_profile(fn, times, r_max=300):
    r = np.arange(r_max + 1)
    vals = np.array([fn(r, t) for t in times], float)
    return Profile(r, times, vals, np.zeros_like(vals), 1)


def test_threshold_on_step_front():
    times = np.arange(40, 441, 40)
    prof = make_profile(lambda r, t: (r <= 0.25 * t).astype(float), times)
    fit = front_velocity(prof, "threshold")
    assert fit.value == pytest.approx(0.25, abs=1e-12)
    assert set(fit.extra["theta_sensitivity"]) == {"0.3", "0.7"}


@pytest.mark.parametrize("method", ["threshold", "collapse"])
def test_front_invariances(method):
    times = np.arange(40, 441, 40)

    def front(r, t, shift=0.0, scale=1.0):
        return scale / (1 + np.exp((r - 0.3 * (t - shift)) / 3.0))

    base = front_velocity(make_profile(front, times), method).value
    assert base == pytest.approx(0.3, abs=2e-3)
    scaled = front_velocity(make_profile(lambda r, t: front(r, t, scale=7.5), times), method).value
    assert scaled == pytest.approx(base, abs=1e-9)
    shifted = front_velocity(make_profile(lambda r, t: front(r, t, shift=25.0), times + 25), method).value
    assert shifted == pytest.approx(base, abs=2e-3)


def test_methods_agree_on_diffusive_front():
    times = np.arange(50, 601, 50)
    prof = make_profile(lambda r, t: 0.5 * erfc((r - 0.2 * t) / np.sqrt(4 * 0.5 * t)), times)
    v_thr = front_velocity(prof, "threshold").value
    v_col = front_velocity(prof, "collapse")
    # per-slice maxima sit slightly below 1 at early times
    assert v_thr == pytest.approx(0.2, rel=1e-2)
    assert v_col.value == pytest.approx(v_thr, rel=0.05)
    assert v_col.uncertainty >= 0 and len(v_col.extra["jackknife"]) == v_col.n_points


def test_front_errors():
    times = np.arange(0, 100, 10)
    zero = make_profile(lambda r, t: np.zeros_like(r, float), times)
    with pytest.raises(NoFrontError):
        front_velocity(zero)
    prof = make_profile(lambda r, t: (r <= 0.25 * t).astype(float), times)
    with pytest.raises(ValueError):
        front_velocity(prof, theta=1.2)
    with pytest.raises(ValueError):
        front_velocity(prof, method="eyeball")
    with pytest.raises(InsufficientDataError):
        front_velocity(prof, t_min=70)


def test_bootstrap_constant_and_errors():
    assert bootstrap_ci(np.full(10, 2.5)) == (2.5, 2.5)
    with pytest.raises(ValueError):
        bootstrap_ci([])
    with pytest.raises(ValueError):
        bootstrap_ci([1.0, 2.0], n_resamples=0)


def test_bootstrap_coverage():
    gen = np.random.default_rng(3)
    hits = 0
    for m in range(200):
        # OTOC-like samples: 4 with probability 0.3
        lo, hi = bootstrap_ci(4.0 * (gen.random(40) < 0.3), n_resamples=300, seed=m)
        hits += lo <= 1.2 <= hi
    assert hits / 200 >= 0.6


def test_bootstrap_reproducible():
    data = np.random.default_rng(0).random(50)
    assert bootstrap_ci(data, seed=4) == bootstrap_ci(data, seed=4)
